use crate::kernel::{Expr, HookTarget, ScalarType};

/// Source line of a declaration. Compares equal to every other line so
/// that ASTs compare by structure only.
#[derive(Debug, Clone, Copy, Default)]
pub struct Line(pub usize);

impl PartialEq for Line {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelAst {
    pub items: Vec<Item>,
}

impl ModelAst {
    pub fn includes(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match i {
            Item::Include(p, _) => Some(p.as_str()),
            _ => None,
        })
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentAst> {
        self.items.iter().filter_map(|i| match i {
            Item::Component(c) => Some(c),
            _ => None,
        })
    }

    pub fn systems(&self) -> impl Iterator<Item = &SystemAst> {
        self.items.iter().filter_map(|i| match i {
            Item::System(s) => Some(s),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Include(String, Line),
    Component(ComponentAst),
    Mediator(MediatorAst),
    System(SystemAst),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamAst {
    pub name: String,
    pub ty: ScalarType,
    pub default: Expr,
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentAst {
    pub name: String,
    pub params: Vec<ParamAst>,
    pub members: Vec<Member>,
    pub line: Line,
}

impl ComponentAst {
    pub fn automata(&self) -> impl Iterator<Item = &AutomatonAst> {
        self.members.iter().filter_map(|m| match m {
            Member::Automaton(a) => Some(a),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Var {
        name: String,
        ty: ScalarType,
        init: Expr,
    },
    Ref {
        name: String,
        ty: ScalarType,
    },
    Automaton(AutomatonAst),
    MsgBox(MsgBoxAst),
    Hook(HookAst),
    Pdmp(PdmpAst),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonAst {
    pub name: String,
    /// `(state, is_initial)` in declaration order.
    pub states: Vec<(String, bool)>,
    pub transitions: Vec<TransAst>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Expo,
    Inst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransAst {
    pub name: Option<String>,
    pub source: String,
    pub target: String,
    pub law: LawKind,
    /// Rate for `expo`; optional weight for `inst`.
    pub law_arg: Option<Expr>,
    pub when: Option<Expr>,
    pub notify: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsgBoxAst {
    pub name: String,
    pub exports: Vec<(String, Expr)>,
    /// `(label, local reference name if different)`.
    pub imports: Vec<(String, Option<String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HookAst {
    pub name: String,
    pub actions: Vec<(HookTarget, String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdmpItem {
    Ode(String),
    Eq(String, Expr),
    Stop(Expr),
    Start(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdmpAst {
    pub manager: String,
    pub items: Vec<PdmpItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MediatorItem {
    Manager(String),
    Eq(Expr),
    Update {
        role: String,
        reference: String,
        value: Expr,
    },
    Stop {
        role: String,
        condition: Expr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediatorAst {
    pub name: String,
    pub items: Vec<MediatorItem>,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgAst {
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupItem {
    Subject { instance: String, variable: String },
    Active { instance: String, role: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemPdmpItem {
    Ode(String, String),
    Eq(String, String, Expr),
    Stop(String, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemStmt {
    Instance {
        name: String,
        component: String,
        args: Vec<ArgAst>,
        line: Line,
    },
    Connect {
        left: (String, String),
        right: (String, String),
        line: Line,
    },
    Mediator {
        name: String,
        mediator: String,
        items: Vec<GroupItem>,
        line: Line,
    },
    Chain(Vec<String>, Line),
    Pdmp {
        manager: String,
        items: Vec<SystemPdmpItem>,
        line: Line,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemAst {
    pub statements: Vec<SystemStmt>,
    pub line: Line,
}
