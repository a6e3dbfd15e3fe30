//! Recursive-descent parser for `.model` files. The grammar is documented
//! in `docs/grammar.md`.

use std::collections::HashSet;

use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Pos, Tok, Token};
use crate::kernel::{AggregateOp, BinaryOp, Expr, HookTarget, ScalarType, UnaryOp};

const RESERVED: &[&str] = &[
    "and", "or", "not", "true", "false", "active", "sum", "any", "all", "count",
];

pub fn parse(text: &str) -> Result<ModelAst, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        i: 0,
        open: Vec::new(),
    };
    p.file()
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        i: 0,
        open: Vec::new(),
    };
    let e = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    /// Unclosed delimiters, innermost last.
    open: Vec<(&'static str, Pos)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        match t.tok {
            Tok::Punct(p @ ("(" | "{" | "[")) => self.open.push((p, t.pos)),
            Tok::Punct(")" | "}" | "]") => {
                self.open.pop();
            }
            _ => {}
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        if self.peek() == &Tok::Eof {
            if let Some((d, pos)) = self.open.last() {
                return ParseError::at(*pos, format!("unclosed `{d}`"));
            }
        }
        ParseError::at(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn line(&self) -> Line {
        Line(self.pos().line)
    }

    fn file(&mut self) -> Result<ModelAst, ParseError> {
        let mut items = Vec::new();
        let mut names = HashSet::new();
        loop {
            let pos = self.pos();
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(k) if k == "include" => {
                    self.advance();
                    let line = Line(pos.line);
                    match self.advance().tok {
                        Tok::Str(s) => items.push(Item::Include(s, line)),
                        _ => return Err(ParseError::at(pos, "expected a quoted path after `include`")),
                    }
                    self.eat_punct(";");
                }
                Tok::Ident(k) if k == "component" => {
                    let c = self.component()?;
                    if !names.insert(c.name.clone()) {
                        return Err(ParseError::at(pos, format!("duplicate declaration of `{}`", c.name)));
                    }
                    items.push(Item::Component(c));
                }
                Tok::Ident(k) if k == "mediator" => {
                    let m = self.mediator()?;
                    if !names.insert(m.name.clone()) {
                        return Err(ParseError::at(pos, format!("duplicate declaration of `{}`", m.name)));
                    }
                    items.push(Item::Mediator(m));
                }
                Tok::Ident(k) if k == "system" => items.push(Item::System(self.system()?)),
                _ => return Err(self.unexpected("`include`, `component`, `mediator` or `system`")),
            }
        }
        Ok(ModelAst { items })
    }

    fn scalar_type(&mut self) -> Result<ScalarType, ParseError> {
        let t = match self.peek() {
            Tok::Ident(s) if s == "real" => ScalarType::Real,
            Tok::Ident(s) if s == "int" => ScalarType::Int,
            Tok::Ident(s) if s == "bool" => ScalarType::Bool,
            _ => return Err(self.unexpected("a type (`real`, `int` or `bool`)")),
        };
        self.advance();
        Ok(t)
    }

    fn component(&mut self) -> Result<ComponentAst, ParseError> {
        let line = self.line();
        self.expect_kw("component")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.scalar_type()?;
                self.expect_punct("=")?;
                let default = self.expr()?;
                let unique = self.eat_kw("unique");
                params.push(ParamAst {
                    name: pname,
                    ty,
                    default,
                    unique,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut members = Vec::new();
        while !self.eat_punct("}") {
            members.push(self.member()?);
        }
        Ok(ComponentAst {
            name,
            params,
            members,
            line,
        })
    }

    fn member(&mut self) -> Result<Member, ParseError> {
        match self.peek() {
            Tok::Ident(k) if k == "var" => {
                self.advance();
                let name = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.scalar_type()?;
                self.expect_punct("=")?;
                let init = self.expr()?;
                self.expect_punct(";")?;
                Ok(Member::Var { name, ty, init })
            }
            Tok::Ident(k) if k == "ref" => {
                self.advance();
                let name = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.scalar_type()?;
                self.expect_punct(";")?;
                Ok(Member::Ref { name, ty })
            }
            Tok::Ident(k) if k == "automaton" => self.automaton().map(Member::Automaton),
            Tok::Ident(k) if k == "msgbox" => self.msgbox().map(Member::MsgBox),
            Tok::Ident(k) if k == "hook" => self.hook().map(Member::Hook),
            Tok::Ident(k) if k == "pdmp" => self.pdmp().map(Member::Pdmp),
            _ => Err(self.unexpected("`var`, `ref`, `automaton`, `msgbox`, `hook`, `pdmp` or `}`")),
        }
    }

    fn automaton(&mut self) -> Result<AutomatonAst, ParseError> {
        self.expect_kw("automaton")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut states = Vec::new();
        let mut transitions = Vec::new();
        while !self.eat_punct("}") {
            if self.eat_kw("state") {
                let s = self.ident()?;
                let init = self.eat_kw("init");
                self.expect_punct(";")?;
                states.push((s, init));
            } else if self.is_kw("trans") {
                transitions.push(self.transition()?);
            } else {
                return Err(self.unexpected("`state`, `trans` or `}`"));
            }
        }
        Ok(AutomatonAst {
            name,
            states,
            transitions,
        })
    }

    fn transition(&mut self) -> Result<TransAst, ParseError> {
        self.expect_kw("trans")?;
        let first = self.ident()?;
        let (name, source) = if self.eat_punct(":") {
            (Some(first), self.ident()?)
        } else {
            (None, first)
        };
        self.expect_punct("->")?;
        let target = self.ident()?;
        self.expect_kw("law")?;
        let (law, law_arg) = if self.eat_kw("expo") {
            self.expect_punct("(")?;
            let e = self.expr()?;
            self.expect_punct(")")?;
            (LawKind::Expo, Some(e))
        } else if self.eat_kw("inst") {
            if self.eat_punct("(") {
                let e = self.expr()?;
                self.expect_punct(")")?;
                (LawKind::Inst, Some(e))
            } else {
                (LawKind::Inst, None)
            }
        } else {
            return Err(self.unexpected("`expo` or `inst`"));
        };
        let when = if self.eat_kw("when") { Some(self.expr()?) } else { None };
        let mut notify = Vec::new();
        if self.eat_kw("notify") {
            loop {
                notify.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(";")?;
        Ok(TransAst {
            name,
            source,
            target,
            law,
            law_arg,
            when,
            notify,
        })
    }

    fn msgbox(&mut self) -> Result<MsgBoxAst, ParseError> {
        self.expect_kw("msgbox")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut exports = Vec::new();
        let mut imports = Vec::new();
        while !self.eat_punct("}") {
            if self.eat_kw("export") {
                let label = self.ident()?;
                self.expect_punct("=")?;
                let e = self.expr()?;
                self.expect_punct(";")?;
                exports.push((label, e));
            } else if self.eat_kw("import") {
                let label = self.ident()?;
                let local = if self.eat_kw("as") { Some(self.ident()?) } else { None };
                self.expect_punct(";")?;
                imports.push((label, local));
            } else {
                return Err(self.unexpected("`export`, `import` or `}`"));
            }
        }
        Ok(MsgBoxAst { name, exports, imports })
    }

    fn hook(&mut self) -> Result<HookAst, ParseError> {
        self.expect_kw("hook")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut actions = Vec::new();
        while !self.eat_punct("}") {
            let target = if self.is_kw("backups") && self.peek_at(1) == &Tok::Punct(".") {
                self.advance();
                self.advance();
                HookTarget::Backups
            } else {
                HookTarget::Own
            };
            let var = self.ident()?;
            self.expect_punct("=")?;
            let e = self.expr()?;
            self.expect_punct(";")?;
            actions.push((target, var, e));
        }
        Ok(HookAst { name, actions })
    }

    /// `d ( <lhs> ) / dt =`
    fn derivative_head(&mut self) -> Result<(), ParseError> {
        self.expect_kw("d")?;
        Ok(())
    }

    fn derivative_tail(&mut self) -> Result<(), ParseError> {
        self.expect_punct(")")?;
        self.expect_punct("/")?;
        self.expect_kw("dt")?;
        self.expect_punct("=")
    }

    fn pdmp(&mut self) -> Result<PdmpAst, ParseError> {
        self.expect_kw("pdmp")?;
        let manager = self.ident()?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.eat_punct("}") {
            if self.eat_kw("ode") {
                items.push(PdmpItem::Ode(self.ident()?));
            } else if self.eat_kw("eq") {
                self.derivative_head()?;
                self.expect_punct("(")?;
                let v = self.ident()?;
                self.derivative_tail()?;
                items.push(PdmpItem::Eq(v, self.expr()?));
            } else if self.eat_kw("stop") {
                items.push(PdmpItem::Stop(self.expr()?));
            } else if self.eat_kw("start") {
                items.push(PdmpItem::Start(self.ident()?));
            } else {
                return Err(self.unexpected("`ode`, `eq`, `stop`, `start` or `}`"));
            }
            self.expect_punct(";")?;
        }
        Ok(PdmpAst { manager, items })
    }

    fn mediator(&mut self) -> Result<MediatorAst, ParseError> {
        let line = self.line();
        self.expect_kw("mediator")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.eat_punct("}") {
            if self.eat_kw("manager") {
                items.push(MediatorItem::Manager(self.ident()?));
            } else if self.eat_kw("eq") {
                self.derivative_head()?;
                self.expect_punct("(")?;
                self.expect_kw("subject")?;
                self.derivative_tail()?;
                items.push(MediatorItem::Eq(self.expr()?));
            } else if self.eat_kw("update") {
                let role = self.ident()?;
                self.expect_punct(".")?;
                let reference = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                items.push(MediatorItem::Update { role, reference, value });
            } else if self.eat_kw("stop") {
                let role = self.ident()?;
                self.expect_punct(":")?;
                let condition = self.expr()?;
                items.push(MediatorItem::Stop { role, condition });
            } else {
                return Err(self.unexpected("`manager`, `eq`, `update`, `stop` or `}`"));
            }
            self.expect_punct(";")?;
        }
        Ok(MediatorAst { name, items, line })
    }

    fn qualified(&mut self) -> Result<(String, String), ParseError> {
        let a = self.ident()?;
        self.expect_punct(".")?;
        Ok((a, self.ident()?))
    }

    fn system(&mut self) -> Result<SystemAst, ParseError> {
        let line = self.line();
        self.expect_kw("system")?;
        self.expect_punct("{")?;
        let mut statements = Vec::new();
        let mut instances = HashSet::new();
        while !self.eat_punct("}") {
            let pos = self.pos();
            let line = Line(pos.line);
            if self.eat_kw("instance") {
                let name = self.ident()?;
                self.expect_punct(":")?;
                let component = self.ident()?;
                let mut args = Vec::new();
                if self.eat_punct("(") && !self.eat_punct(")") {
                    loop {
                        let name = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Punct("=") {
                            let n = self.ident()?;
                            self.advance();
                            Some(n)
                        } else {
                            None
                        };
                        args.push(ArgAst {
                            name,
                            value: self.expr()?,
                        });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                }
                self.expect_punct(";")?;
                if !instances.insert(name.clone()) {
                    return Err(ParseError::at(pos, format!("duplicate declaration of instance `{name}`")));
                }
                statements.push(SystemStmt::Instance {
                    name,
                    component,
                    args,
                    line,
                });
            } else if self.eat_kw("connect") {
                let left = self.qualified()?;
                self.expect_punct("<->")?;
                let right = self.qualified()?;
                self.expect_punct(";")?;
                statements.push(SystemStmt::Connect { left, right, line });
            } else if self.eat_kw("mediator") {
                let name = self.ident()?;
                self.expect_punct(":")?;
                let mediator = self.ident()?;
                self.expect_punct("{")?;
                let mut items = Vec::new();
                while !self.eat_punct("}") {
                    if self.eat_kw("subject") {
                        let (instance, variable) = self.qualified()?;
                        items.push(GroupItem::Subject { instance, variable });
                    } else if self.eat_kw("active") {
                        let instance = self.ident()?;
                        self.expect_kw("role")?;
                        let role = self.ident()?;
                        items.push(GroupItem::Active { instance, role });
                    } else {
                        return Err(self.unexpected("`subject`, `active` or `}`"));
                    }
                    self.expect_punct(";")?;
                }
                self.eat_punct(";");
                statements.push(SystemStmt::Mediator {
                    name,
                    mediator,
                    items,
                    line,
                });
            } else if self.eat_kw("chain") {
                let mut chain = vec![self.ident()?];
                while self.eat_punct("->") {
                    chain.push(self.ident()?);
                }
                self.expect_punct(";")?;
                statements.push(SystemStmt::Chain(chain, line));
            } else if self.eat_kw("pdmp") {
                let manager = self.ident()?;
                self.expect_punct("{")?;
                let mut items = Vec::new();
                while !self.eat_punct("}") {
                    if self.eat_kw("ode") {
                        let (i, v) = self.qualified()?;
                        items.push(SystemPdmpItem::Ode(i, v));
                    } else if self.eat_kw("eq") {
                        self.derivative_head()?;
                        self.expect_punct("(")?;
                        let (i, v) = self.qualified()?;
                        self.derivative_tail()?;
                        items.push(SystemPdmpItem::Eq(i, v, self.expr()?));
                    } else if self.eat_kw("stop") {
                        let i = self.ident()?;
                        self.expect_punct(":")?;
                        items.push(SystemPdmpItem::Stop(i, self.expr()?));
                    } else {
                        return Err(self.unexpected("`ode`, `eq`, `stop` or `}`"));
                    }
                    self.expect_punct(";")?;
                }
                self.eat_punct(";");
                statements.push(SystemStmt::Pdmp { manager, items, line });
            } else {
                return Err(self.unexpected("`instance`, `connect`, `mediator`, `chain`, `pdmp` or `}`"));
            }
        }
        Ok(SystemAst { statements, line })
    }

    // Expressions, loosest binding first.

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("or") {
            lhs = Expr::binary(BinaryOp::Or, lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw("and") {
            lhs = Expr::binary(BinaryOp::And, lhs, self.not_expr()?);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct(">=") => BinaryOp::Ge,
            Tok::Punct("==") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            _ => return Ok(lhs),
        };
        self.advance();
        Ok(Expr::binary(op, lhs, self.additive()?))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinaryOp::Add,
                Tok::Punct("-") => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinaryOp::Mul,
                Tok::Punct("/") => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(x) => {
                self.advance();
                Ok(Expr::Number(x))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(k) if k == "true" || k == "false" => {
                self.advance();
                Ok(Expr::Bool(k == "true"))
            }
            Tok::Ident(k) if k == "active" => {
                self.advance();
                self.expect_punct("(")?;
                let mut path = vec![self.ident()?];
                while self.eat_punct(".") {
                    path.push(self.ident()?);
                }
                self.expect_punct(")")?;
                if !(2..=3).contains(&path.len()) {
                    return Err(ParseError::at(self.pos(), "expected `Automaton.State` or `instance.Automaton.State`"));
                }
                Ok(Expr::Active(path))
            }
            Tok::Ident(k) if matches!(k.as_str(), "sum" | "any" | "all" | "count") => {
                let op = match k.as_str() {
                    "sum" => AggregateOp::Sum,
                    "any" => AggregateOp::Any,
                    "all" => AggregateOp::All,
                    _ => AggregateOp::Count,
                };
                self.advance();
                self.expect_punct("(")?;
                let role = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Punct(":") {
                    let r = self.ident()?;
                    self.advance();
                    Some(r)
                } else {
                    None
                };
                let body = self.expr()?;
                self.expect_punct(")")?;
                Ok(Expr::Aggregate {
                    op,
                    role,
                    body: Box::new(body),
                })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_punct("[") {
                    let idx = self.expr()?;
                    self.expect_punct("]")?;
                    return Ok(Expr::Index(name, Box::new(idx)));
                }
                Ok(Expr::Name(name))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_system_is_valid() {
        let ast = parse("system { }").unwrap();
        assert_eq!(ast.systems().count(), 1);
        assert!(ast.systems().next().unwrap().statements.is_empty());
    }

    #[test]
    fn unclosed_law_parenthesis_is_located() {
        let src = "component H() {\n  automaton A {\n    state A init;\n    state B;\n    trans A -> B law expo(";
        let err = parse(src).unwrap_err();
        assert_eq!((err.line, err.column), (5, 26), "{err}");
        assert!(err.message.contains("unclosed `(`"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("system {\n  instance h0 Heater;\n}").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("`:`"), "{err}");
    }

    #[test]
    fn duplicate_instance_is_rejected() {
        let err = parse("system { instance a: X; instance a: X; }").unwrap_err();
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn duplicate_component_is_rejected() {
        let err = parse("component A() { }\ncomponent A() { }").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a or b and not c <= 1 + 2 * x").unwrap();
        assert_eq!(e.to_string(), "a or b and not c <= 1 + 2 * x");
        match e {
            Expr::Binary(BinaryOp::Or, _, rhs) => assert!(matches!(*rhs, Expr::Binary(BinaryOp::And, ..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn aggregates_indices_and_states() {
        let e = parse_expr("sum(heater: power * active(Power.ON)) + x[2] + count(y)").unwrap();
        assert_eq!(e.to_string(), "sum(heater: power * active(Power.ON)) + x[2] + count(y)");
        let e = parse_expr("active(h0.Function.OK)").unwrap();
        assert_eq!(e, Expr::Active(vec!["h0".into(), "Function".into(), "OK".into()]));
    }

    #[test]
    fn unnamed_transitions_and_optional_weight() {
        let ast = parse("component H() { automaton P { state ON init; state OFF; trans ON -> OFF law inst when x; trans go: OFF -> ON law inst(0.5); } }").unwrap();
        let a = ast.components().next().unwrap().automata().next().unwrap().clone();
        assert_eq!(a.transitions[0].name, None);
        assert_eq!(a.transitions[1].name.as_deref(), Some("go"));
        assert_eq!(a.transitions[1].law_arg, Some(Expr::Number(0.5)));
    }
}
