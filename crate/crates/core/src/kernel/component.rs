//! Component types: parameters, variables, automata, message boxes,
//! notification hooks and PDMP contributions.

use std::collections::HashSet;

use super::error::ModelError;
use super::expr::{static_type, Expr, ScalarType, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub ty: ScalarType,
    pub default: Value,
    /// All instances of the component must use distinct values.
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub ty: ScalarType,
    /// Initial value; may read parameters.
    pub init: Expr,
}

/// An import reference. Message-box imports declare their reference
/// implicitly; mediator-fed references are declared explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDef {
    pub name: String,
    pub ty: Option<ScalarType>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionLaw {
    /// Fires after an exponentially distributed delay; the rate is per time unit.
    Exponential { rate: Expr },
    /// Fires as soon as its condition holds, with probability `weight`.
    Instantaneous { weight: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDef {
    pub name: String,
    pub source: String,
    pub target: String,
    pub law: TransitionLaw,
    pub condition: Option<Expr>,
    pub fire_hooks: Vec<String>,
}

impl TransitionDef {
    pub fn exponential(source: &str, target: &str, rate: Expr) -> Self {
        Self::new(source, target, TransitionLaw::Exponential { rate })
    }

    pub fn instantaneous(source: &str, target: &str) -> Self {
        Self::new(
            source,
            target,
            TransitionLaw::Instantaneous {
                weight: Expr::Number(1.0),
            },
        )
    }

    fn new(source: &str, target: &str, law: TransitionLaw) -> Self {
        TransitionDef {
            name: format!("{source}_to_{target}"),
            source: source.to_string(),
            target: target.to_string(),
            law,
            condition: None,
            fire_hooks: Vec::new(),
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn when(mut self, condition: Expr) -> Self {
        self.condition = Some(condition);
        self
    }

    pub fn notify(mut self, hook: &str) -> Self {
        self.fire_hooks.push(hook.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonDef {
    pub name: String,
    pub states: Vec<String>,
    pub initial_state: String,
    pub transitions: Vec<TransitionDef>,
}

impl AutomatonDef {
    /// The first state listed is the initial one unless [`initial`](Self::initial) says otherwise.
    pub fn new(name: &str, states: &[&str]) -> Self {
        AutomatonDef {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            initial_state: states.first().map(|s| s.to_string()).unwrap_or_default(),
            transitions: Vec::new(),
        }
    }

    pub fn initial(mut self, state: &str) -> Self {
        self.initial_state = state.to_string();
        self
    }

    pub fn transition(mut self, t: TransitionDef) -> Self {
        self.transitions.push(t);
        self
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub label: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub label: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageBoxDef {
    pub name: String,
    pub exports: Vec<Export>,
    pub imports: Vec<Import>,
}

impl MessageBoxDef {
    pub fn new(name: &str) -> Self {
        MessageBoxDef {
            name: name.to_string(),
            exports: Vec::new(),
            imports: Vec::new(),
        }
    }

    pub fn export(mut self, label: &str, value: Expr) -> Self {
        self.exports.push(Export {
            label: label.to_string(),
            value,
        });
        self
    }

    pub fn import(mut self, label: &str, reference: &str) -> Self {
        self.imports.push(Import {
            label: label.to_string(),
            reference: reference.to_string(),
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookTarget {
    /// The instance whose transition fired.
    Own,
    /// Every instance downstream of the firing one in the backup chains,
    /// nearest first.
    Backups,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HookAction {
    pub target: HookTarget,
    pub variable: String,
    /// Evaluated in the scope of the firing instance.
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HookDef {
    pub name: String,
    pub actions: Vec<HookAction>,
}

/// A component's share of a named PDMP manager.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PdmpContribution {
    pub manager: String,
    pub ode_variables: Vec<String>,
    pub equations: Vec<(String, Expr)>,
    pub stop_conditions: Vec<Expr>,
    pub start_hooks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentDefinition {
    pub name: String,
    pub parameters: Vec<Parameter>,
    pub variables: Vec<VariableDef>,
    pub references: Vec<ReferenceDef>,
    pub automata: Vec<AutomatonDef>,
    pub message_boxes: Vec<MessageBoxDef>,
    pub notification_hooks: Vec<HookDef>,
    pub pdmp: Vec<PdmpContribution>,
}

/// What a bare identifier resolves to inside a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Parameter(usize),
    Variable(usize),
    Reference(usize),
}

impl ComponentDefinition {
    pub fn new(name: &str) -> Self {
        ComponentDefinition {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn param(mut self, name: &str, ty: ScalarType, default: Value) -> Self {
        self.parameters.push(Parameter {
            name: name.to_string(),
            ty,
            default,
            unique: false,
        });
        self
    }

    pub fn unique_param(mut self, name: &str, ty: ScalarType, default: Value) -> Self {
        self.parameters.push(Parameter {
            name: name.to_string(),
            ty,
            default,
            unique: true,
        });
        self
    }

    pub fn variable(mut self, name: &str, ty: ScalarType, init: Expr) -> Self {
        self.variables.push(VariableDef {
            name: name.to_string(),
            ty,
            init,
        });
        self
    }

    pub fn reference(mut self, name: &str, ty: Option<ScalarType>) -> Self {
        self.references.push(ReferenceDef {
            name: name.to_string(),
            ty,
        });
        self
    }

    pub fn automaton(mut self, a: AutomatonDef) -> Self {
        self.automata.push(a);
        self
    }

    pub fn message_box(mut self, mb: MessageBoxDef) -> Self {
        self.message_boxes.push(mb);
        self
    }

    pub fn hook(mut self, name: &str, actions: Vec<HookAction>) -> Self {
        self.notification_hooks.push(HookDef {
            name: name.to_string(),
            actions,
        });
        self
    }

    pub fn pdmp(mut self, contribution: PdmpContribution) -> Self {
        self.pdmp.push(contribution);
        self
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        if let Some(i) = self.parameters.iter().position(|p| p.name == name) {
            return Some(Symbol::Parameter(i));
        }
        if let Some(i) = self.variables.iter().position(|v| v.name == name) {
            return Some(Symbol::Variable(i));
        }
        self.references
            .iter()
            .position(|r| r.name == name)
            .map(Symbol::Reference)
    }

    pub fn symbol_type(&self, name: &str) -> Option<ScalarType> {
        match self.lookup(name)? {
            Symbol::Parameter(i) => Some(self.parameters[i].ty),
            Symbol::Variable(i) => Some(self.variables[i].ty),
            Symbol::Reference(i) => self.references[i].ty,
        }
    }

    pub fn automaton_index(&self, name: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.name == name)
    }

    pub fn find_message_box(&self, name: &str) -> Option<&MessageBoxDef> {
        self.message_boxes.iter().find(|m| m.name == name)
    }

    pub fn hook_def(&self, name: &str) -> Option<&HookDef> {
        self.notification_hooks.iter().find(|h| h.name == name)
    }

    /// Checks names and scopes, and declares the references implied by
    /// message-box imports. Returns the completed definition.
    pub fn define(mut self) -> Result<ComponentDefinition, ModelError> {
        let scope = format!("component {}", self.name);

        for mb in &self.message_boxes {
            for imp in &mb.imports {
                if !self.references.iter().any(|r| r.name == imp.reference) {
                    self.references.push(ReferenceDef {
                        name: imp.reference.clone(),
                        ty: None,
                    });
                }
            }
        }

        let mut names = HashSet::new();
        let symbols = self
            .parameters
            .iter()
            .map(|p| &p.name)
            .chain(self.variables.iter().map(|v| &v.name))
            .chain(self.references.iter().map(|r| &r.name));
        for n in symbols {
            if !names.insert(n.as_str()) {
                return Err(dup("variable", n, &scope));
            }
        }
        unique(self.automata.iter().map(|a| &a.name), "automaton", &scope)?;
        unique(self.message_boxes.iter().map(|m| &m.name), "message box", &scope)?;
        unique(self.notification_hooks.iter().map(|h| &h.name), "hook", &scope)?;

        for mb in &self.message_boxes {
            let mscope = format!("{scope}, message box {}", mb.name);
            unique(
                mb.exports.iter().map(|e| &e.label).chain(mb.imports.iter().map(|i| &i.label)),
                "wire label",
                &mscope,
            )?;
            for e in &mb.exports {
                self.check_expr(&e.value, &mscope)?;
            }
        }

        for v in &self.variables {
            self.check_expr(&v.init, &scope)?;
        }

        for a in &self.automata {
            let ascope = format!("{scope}, automaton {}", a.name);
            if a.states.is_empty() {
                return Err(ModelError::EmptyAutomaton {
                    scope,
                    automaton: a.name.clone(),
                });
            }
            unique(a.states.iter(), "state", &ascope)?;
            unique(a.transitions.iter().map(|t| &t.name), "transition", &ascope)?;
            for s in [&a.initial_state] {
                if a.state_index(s).is_none() {
                    return Err(unresolved_state(&scope, &a.name, s));
                }
            }
            for t in &a.transitions {
                for s in [&t.source, &t.target] {
                    if a.state_index(s).is_none() {
                        return Err(unresolved_state(&scope, &a.name, s));
                    }
                }
                let law = match &t.law {
                    TransitionLaw::Exponential { rate } => rate,
                    TransitionLaw::Instantaneous { weight } => weight,
                };
                self.check_expr(law, &ascope)?;
                if static_type(law, &|n| self.symbol_type(n)) == Some(ScalarType::Bool) {
                    return Err(ModelError::Invalid {
                        scope: ascope.clone(),
                        message: format!("law of `{}` must be numeric", t.name),
                    });
                }
                if let Some(c) = &t.condition {
                    self.check_expr(c, &ascope)?;
                    match static_type(c, &|n| self.symbol_type(n)) {
                        Some(ScalarType::Bool) | None => {}
                        Some(_) => {
                            return Err(ModelError::NonBooleanCondition {
                                scope: ascope,
                                transition: t.name.clone(),
                            })
                        }
                    }
                }
                for h in &t.fire_hooks {
                    if self.hook_def(h).is_none() {
                        return Err(ModelError::UnknownHook {
                            scope: ascope,
                            hook: h.clone(),
                        });
                    }
                }
            }
        }

        for h in &self.notification_hooks {
            let hscope = format!("{scope}, hook {}", h.name);
            for act in &h.actions {
                self.check_expr(&act.value, &hscope)?;
                if act.target == HookTarget::Own
                    && !matches!(self.lookup(&act.variable), Some(Symbol::Variable(_)))
                {
                    return Err(ModelError::UnresolvedIdentifier {
                        scope: hscope,
                        name: act.variable.clone(),
                    });
                }
            }
        }

        for p in &self.pdmp {
            let pscope = format!("{scope}, pdmp {}", p.manager);
            for v in p.ode_variables.iter().chain(p.equations.iter().map(|(v, _)| v)) {
                match self.lookup(v) {
                    Some(Symbol::Variable(i)) if self.variables[i].ty == ScalarType::Real => {}
                    Some(Symbol::Variable(_)) => {
                        return Err(ModelError::NotContinuous {
                            variable: format!("{}.{v}", self.name),
                        })
                    }
                    _ => {
                        return Err(ModelError::UnresolvedIdentifier {
                            scope: pscope,
                            name: v.clone(),
                        })
                    }
                }
            }
            for (_, e) in &p.equations {
                self.check_expr(e, &pscope)?;
            }
            for e in &p.stop_conditions {
                self.check_expr(e, &pscope)?;
            }
            for h in &p.start_hooks {
                if self.hook_def(h).is_none() {
                    return Err(ModelError::UnknownHook {
                        scope: pscope,
                        hook: h.clone(),
                    });
                }
            }
        }

        Ok(self)
    }

    /// Resolves every identifier of `expr` against this component's scope.
    pub fn check_expr(&self, expr: &Expr, scope: &str) -> Result<(), ModelError> {
        check_expr_in(expr, scope, false, &|n| self.lookup(n), &|a, s| {
            self.check_state(scope, a, s)
        })
    }

    fn check_state(&self, scope: &str, automaton: &str, state: &str) -> Result<(), ModelError> {
        let a = self
            .automata
            .iter()
            .find(|a| a.name == automaton)
            .ok_or_else(|| ModelError::UnresolvedAutomaton {
                scope: scope.to_string(),
                automaton: automaton.to_string(),
            })?;
        a.state_index(state)
            .map(|_| ())
            .ok_or_else(|| unresolved_state(scope, automaton, state))
    }
}

fn check_expr_in(
    expr: &Expr,
    scope: &str,
    in_aggregate: bool,
    lookup: &dyn Fn(&str) -> Option<Symbol>,
    state: &dyn Fn(&str, &str) -> Result<(), ModelError>,
) -> Result<(), ModelError> {
    let unresolved = |name: &str| ModelError::UnresolvedIdentifier {
        scope: scope.to_string(),
        name: name.to_string(),
    };
    match expr {
        Expr::Number(_) | Expr::Bool(_) => Ok(()),
        Expr::Name(n) => lookup(n).map(|_| ()).ok_or_else(|| unresolved(n)),
        Expr::Index(n, i) => {
            if !matches!(lookup(n), Some(Symbol::Reference(_))) {
                return Err(unresolved(n));
            }
            check_expr_in(i, scope, in_aggregate, lookup, state)
        }
        Expr::Active(path) => match path.as_slice() {
            [a, s] => state(a, s),
            _ => Err(unresolved(&path.join("."))),
        },
        Expr::Unary(_, e) => check_expr_in(e, scope, in_aggregate, lookup, state),
        Expr::Binary(_, a, b) => {
            check_expr_in(a, scope, in_aggregate, lookup, state)?;
            check_expr_in(b, scope, in_aggregate, lookup, state)
        }
        Expr::Aggregate { role, body, .. } => {
            if let Some(r) = role {
                return Err(ModelError::Invalid {
                    scope: scope.to_string(),
                    message: format!("role aggregate `{r}:` is only allowed in mediators"),
                });
            }
            if in_aggregate {
                return Err(ModelError::Invalid {
                    scope: scope.to_string(),
                    message: "nested aggregates are not supported".into(),
                });
            }
            check_expr_in(body, scope, true, lookup, state)
        }
    }
}

fn unique<'a>(
    names: impl Iterator<Item = &'a String>,
    kind: &'static str,
    scope: &str,
) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(dup(kind, n, scope));
        }
    }
    Ok(())
}

fn dup(kind: &'static str, name: &str, scope: &str) -> ModelError {
    ModelError::DuplicateName {
        kind,
        name: name.to_string(),
        scope: scope.to_string(),
    }
}

fn unresolved_state(scope: &str, automaton: &str, state: &str) -> ModelError {
    ModelError::UnresolvedState {
        scope: scope.to_string(),
        automaton: automaton.to_string(),
        state: state.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::expr::BinaryOp;

    fn power_automaton() -> AutomatonDef {
        AutomatonDef::new("Power", &["ON", "OFF"])
            .transition(TransitionDef::instantaneous("ON", "OFF").when(Expr::binary(
                BinaryOp::Ge,
                Expr::name("t"),
                Expr::num(22.0),
            )))
    }

    #[test]
    fn empty_component_is_valid() {
        let c = ComponentDefinition::new("Room").define().unwrap();
        assert!(c.automata.is_empty());
    }

    #[test]
    fn unknown_target_state_is_rejected() {
        let c = ComponentDefinition::new("Heater")
            .reference("t", Some(ScalarType::Real))
            .automaton(
                AutomatonDef::new("Power", &["ON", "OFF"])
                    .transition(TransitionDef::instantaneous("OFF", "ONN")),
            );
        match c.define() {
            Err(ModelError::UnresolvedState { state, .. }) => assert_eq!(state, "ONN"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let c = ComponentDefinition::new("H")
            .param("x", ScalarType::Real, Value::Num(1.0))
            .variable("x", ScalarType::Real, Expr::num(0.0));
        assert!(matches!(c.define(), Err(ModelError::DuplicateName { .. })));

        let c = ComponentDefinition::new("H")
            .reference("t", None)
            .automaton(power_automaton())
            .automaton(power_automaton());
        assert!(matches!(
            c.define(),
            Err(ModelError::DuplicateName {
                kind: "automaton",
                ..
            })
        ));
    }

    #[test]
    fn unresolved_identifier_in_condition() {
        let c = ComponentDefinition::new("H").automaton(power_automaton());
        match c.define() {
            Err(ModelError::UnresolvedIdentifier { name, .. }) => assert_eq!(name, "t"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn numeric_condition_is_rejected() {
        let c = ComponentDefinition::new("H")
            .param("p", ScalarType::Real, Value::Num(1.0))
            .automaton(
                AutomatonDef::new("A", &["X", "Y"])
                    .transition(TransitionDef::instantaneous("X", "Y").when(Expr::name("p"))),
            );
        assert!(matches!(
            c.define(),
            Err(ModelError::NonBooleanCondition { .. })
        ));
    }

    #[test]
    fn message_box_imports_declare_references() {
        let c = ComponentDefinition::new("H")
            .message_box(MessageBoxDef::new("mb").import("temperature", "roomTemperature"))
            .define()
            .unwrap();
        assert_eq!(c.lookup("roomTemperature"), Some(Symbol::Reference(0)));
    }

    #[test]
    fn duplicate_wire_label_is_rejected() {
        let c = ComponentDefinition::new("H").message_box(
            MessageBoxDef::new("mb")
                .export("x", Expr::num(1.0))
                .export("x", Expr::num(2.0)),
        );
        assert!(matches!(c.define(), Err(ModelError::DuplicateName { .. })));
    }
}
