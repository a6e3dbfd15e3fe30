//! Expression language shared by transition guards, rates, exports, hook
//! actions and ODE right-hand sides.
//!
//! Expressions are written against names ([`Expr`]) and compiled per
//! component instance into an index-resolved tree ([`Compiled`]) with
//! parameter values folded in. Evaluation never allocates.

use std::fmt;

use super::error::EvalError;

/// Declared type of a parameter, variable or reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Real,
    Int,
    Bool,
}

impl ScalarType {
    pub fn keyword(self) -> &'static str {
        match self {
            ScalarType::Real => "real",
            ScalarType::Int => "int",
            ScalarType::Bool => "bool",
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Runtime value. Integers are carried as `Num`; booleans coerce to 0/1 in
/// arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Num(x) => x,
            Value::Bool(true) => 1.0,
            Value::Bool(false) => 0.0,
        }
    }

    pub fn as_bool(self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Num(x) => Err(EvalError::TypeMismatch {
                expected: ScalarType::Bool,
                found: format!("{x}"),
            }),
        }
    }

    /// Coerces a value to the declared type of its destination.
    pub fn coerce(self, ty: ScalarType) -> Result<Value, EvalError> {
        match (ty, self) {
            (ScalarType::Bool, Value::Bool(_)) => Ok(self),
            (ScalarType::Bool, Value::Num(x)) => Err(EvalError::TypeMismatch {
                expected: ScalarType::Bool,
                found: format!("{x}"),
            }),
            (ScalarType::Real, v) => Ok(Value::Num(v.as_f64())),
            (ScalarType::Int, v) => {
                let x = v.as_f64();
                if x.fract() != 0.0 {
                    return Err(EvalError::TypeMismatch {
                        expected: ScalarType::Int,
                        found: format!("{x}"),
                    });
                }
                Ok(Value::Num(x))
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    /// Binding strength, higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateOp {
    Sum,
    Any,
    All,
    Count,
}

impl AggregateOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AggregateOp::Sum => "sum",
            AggregateOp::Any => "any",
            AggregateOp::All => "all",
            AggregateOp::Count => "count",
        }
    }
}

/// Name-level expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Bool(bool),
    /// Parameter, variable or import reference (connection 0, or the current
    /// connection inside an aggregate).
    Name(String),
    /// Import reference at an explicit connection index.
    Index(String, Box<Expr>),
    /// `active(Automaton.State)` or, at system scope,
    /// `active(instance.Automaton.State)`.
    Active(Vec<String>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Aggregate over connection indices. `role` is set only for mediator
    /// equations (`sum(heater: ...)`), where it ranges over grouped actives.
    Aggregate {
        op: AggregateOp,
        role: Option<String>,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn name(s: &str) -> Expr {
        Expr::Name(s.to_string())
    }

    pub fn num(x: f64) -> Expr {
        Expr::Number(x)
    }

    pub fn active(automaton: &str, state: &str) -> Expr {
        Expr::Active(vec![automaton.to_string(), state.to_string()])
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnaryOp::Not, Box::new(e))
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::And, lhs, rhs)
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Or, lhs, rhs)
    }

    pub fn aggregate(op: AggregateOp, body: Expr) -> Expr {
        Expr::Aggregate {
            op,
            role: None,
            body: Box::new(body),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Index(_, i) => i.walk(f),
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Aggregate { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// Returns a copy with `f` applied bottom-up.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Index(n, i) => Expr::Index(n.clone(), Box::new(i.map(f))),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Aggregate { op, role, body } => Expr::Aggregate {
                op: *op,
                role: role.clone(),
                body: Box::new(body.map(f)),
            },
            other => other.clone(),
        };
        f(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

fn fmt_expr(e: &Expr, parent: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Number(x) => write!(f, "{x}"),
        Expr::Bool(b) => write!(f, "{b}"),
        Expr::Name(n) => f.write_str(n),
        Expr::Index(n, i) => write!(f, "{n}[{i}]"),
        Expr::Active(path) => write!(f, "active({})", path.join(".")),
        Expr::Unary(UnaryOp::Neg, inner) => {
            f.write_str("-")?;
            fmt_expr(inner, 7, f)
        }
        Expr::Unary(UnaryOp::Not, inner) => {
            let wrap = parent > 3;
            if wrap {
                f.write_str("(")?;
            }
            f.write_str("not ")?;
            fmt_expr(inner, 3, f)?;
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let wrap = p < parent || (p == parent && op.is_comparison());
            if wrap {
                f.write_str("(")?;
            }
            fmt_expr(a, p, f)?;
            write!(f, " {} ", op.symbol())?;
            // Left-associative: the right operand needs parentheses at equal precedence.
            fmt_expr(b, p + 1, f)?;
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
        Expr::Aggregate { op, role, body } => {
            write!(f, "{}(", op.keyword())?;
            if let Some(r) = role {
                write!(f, "{r}: ")?;
            }
            fmt_expr(body, 0, f)?;
            f.write_str(")")
        }
    }
}

/// Index-resolved expression, compiled for one component instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Const(Value),
    /// Variable slot of the owning instance.
    Var(usize),
    /// Import reference slot; `None` means the enclosing aggregate's current
    /// connection, or connection 0 outside aggregates.
    Import {
        slot: usize,
        index: Option<Box<Compiled>>,
    },
    Active {
        automaton: usize,
        state: usize,
    },
    GlobalActive {
        instance: usize,
        automaton: usize,
        state: usize,
    },
    Unary(UnaryOp, Box<Compiled>),
    Binary(BinaryOp, Box<Compiled>, Box<Compiled>),
    Aggregate {
        op: AggregateOp,
        /// Import slots the body reads; they must agree on connection count.
        slots: Vec<usize>,
        body: Box<Compiled>,
    },
}

impl Compiled {
    /// True when the tree reads nothing but constants and discrete state.
    pub fn is_discrete(&self) -> bool {
        match self {
            Compiled::Const(_) | Compiled::Active { .. } | Compiled::GlobalActive { .. } => true,
            Compiled::Var(_) | Compiled::Import { .. } | Compiled::Aggregate { .. } => false,
            Compiled::Unary(_, e) => e.is_discrete(),
            Compiled::Binary(_, a, b) => a.is_discrete() && b.is_discrete(),
        }
    }
}

/// Read access to the instantaneous system state an expression is evaluated
/// against.
pub trait EvalContext {
    fn var(&self, instance: usize, slot: usize) -> Value;
    fn is_active(&self, instance: usize, automaton: usize, state: usize) -> bool;
    fn connection_count(&self, instance: usize, slot: usize) -> usize;
    /// Exporting instance and export expression of connection `index`.
    fn source(&self, instance: usize, slot: usize, index: usize) -> (usize, &Compiled);
    fn reference_name(&self, instance: usize, slot: usize) -> String;
}

const MAX_DEPTH: usize = 64;

/// Evaluates `expr` in the scope of `instance`.
pub fn evaluate<C: EvalContext + ?Sized>(
    ctx: &C,
    instance: usize,
    expr: &Compiled,
    connection: Option<usize>,
) -> Result<Value, EvalError> {
    eval_at(ctx, instance, expr, connection, 0)
}

fn eval_at<C: EvalContext + ?Sized>(
    ctx: &C,
    instance: usize,
    expr: &Compiled,
    connection: Option<usize>,
    depth: usize,
) -> Result<Value, EvalError> {
    if depth > MAX_DEPTH {
        return Err(EvalError::RecursionLimit);
    }
    match expr {
        Compiled::Const(v) => Ok(*v),
        Compiled::Var(slot) => Ok(ctx.var(instance, *slot)),
        Compiled::Active { automaton, state } => {
            Ok(Value::Bool(ctx.is_active(instance, *automaton, *state)))
        }
        Compiled::GlobalActive {
            instance,
            automaton,
            state,
        } => Ok(Value::Bool(ctx.is_active(*instance, *automaton, *state))),
        Compiled::Import { slot, index } => {
            let i = match index {
                Some(e) => {
                    let x = eval_at(ctx, instance, e, connection, depth + 1)?.as_f64();
                    if x < 0.0 || x.fract() != 0.0 {
                        return Err(EvalError::ConnectionOutOfRange {
                            reference: ctx.reference_name(instance, *slot),
                            index: x,
                            count: ctx.connection_count(instance, *slot),
                        });
                    }
                    x as usize
                }
                None => connection.unwrap_or(0),
            };
            let count = ctx.connection_count(instance, *slot);
            if i >= count {
                return Err(EvalError::ConnectionOutOfRange {
                    reference: ctx.reference_name(instance, *slot),
                    index: i as f64,
                    count,
                });
            }
            let (src, e) = ctx.source(instance, *slot, i);
            eval_at(ctx, src, e, None, depth + 1)
        }
        Compiled::Unary(UnaryOp::Neg, e) => Ok(Value::Num(
            -eval_at(ctx, instance, e, connection, depth + 1)?.as_f64(),
        )),
        Compiled::Unary(UnaryOp::Not, e) => Ok(Value::Bool(
            !eval_at(ctx, instance, e, connection, depth + 1)?.as_bool()?,
        )),
        Compiled::Binary(op, a, b) => {
            let lhs = eval_at(ctx, instance, a, connection, depth + 1)?;
            match op {
                BinaryOp::And => {
                    if !lhs.as_bool()? {
                        return Ok(Value::Bool(false));
                    }
                    let rhs = eval_at(ctx, instance, b, connection, depth + 1)?;
                    Ok(Value::Bool(rhs.as_bool()?))
                }
                BinaryOp::Or => {
                    if lhs.as_bool()? {
                        return Ok(Value::Bool(true));
                    }
                    let rhs = eval_at(ctx, instance, b, connection, depth + 1)?;
                    Ok(Value::Bool(rhs.as_bool()?))
                }
                _ => {
                    let rhs = eval_at(ctx, instance, b, connection, depth + 1)?;
                    binary(*op, lhs, rhs)
                }
            }
        }
        Compiled::Aggregate { op, slots, body } => {
            let n = aggregate_len(ctx, instance, slots)?;
            match op {
                AggregateOp::Count => Ok(Value::Num(n as f64)),
                AggregateOp::Sum => {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += eval_at(ctx, instance, body, Some(i), depth + 1)?.as_f64();
                    }
                    Ok(Value::Num(acc))
                }
                AggregateOp::Any => {
                    for i in 0..n {
                        if eval_at(ctx, instance, body, Some(i), depth + 1)?.as_bool()? {
                            return Ok(Value::Bool(true));
                        }
                    }
                    Ok(Value::Bool(false))
                }
                AggregateOp::All => {
                    for i in 0..n {
                        if !eval_at(ctx, instance, body, Some(i), depth + 1)?.as_bool()? {
                            return Ok(Value::Bool(false));
                        }
                    }
                    Ok(Value::Bool(true))
                }
            }
        }
    }
}

fn aggregate_len<C: EvalContext + ?Sized>(
    ctx: &C,
    instance: usize,
    slots: &[usize],
) -> Result<usize, EvalError> {
    let mut len: Option<usize> = None;
    for &s in slots {
        let n = ctx.connection_count(instance, s);
        match len {
            None => len = Some(n),
            Some(m) if m != n => {
                return Err(EvalError::MismatchedAggregate {
                    first: m,
                    second: n,
                })
            }
            _ => {}
        }
    }
    Ok(len.unwrap_or(0))
}

fn binary(op: BinaryOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    if let (Eq | Ne, Value::Bool(a), Value::Bool(b)) = (op, lhs, rhs) {
        return Ok(Value::Bool(if op == Eq { a == b } else { a != b }));
    }
    let (a, b) = (lhs.as_f64(), rhs.as_f64());
    Ok(match op {
        Add => Value::Num(a + b),
        Sub => Value::Num(a - b),
        Mul => Value::Num(a * b),
        Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Value::Num(a / b)
        }
        Lt => Value::Bool(a < b),
        Le => Value::Bool(a <= b),
        Gt => Value::Bool(a > b),
        Ge => Value::Bool(a >= b),
        Eq => Value::Bool(a == b),
        Ne => Value::Bool(a != b),
        And | Or => unreachable!("short-circuit operators handled by caller"),
    })
}

/// Static type of an expression, `None` when it depends on an untyped import.
pub fn static_type(expr: &Expr, lookup: &dyn Fn(&str) -> Option<ScalarType>) -> Option<ScalarType> {
    match expr {
        Expr::Number(_) => Some(ScalarType::Real),
        Expr::Bool(_) | Expr::Active(_) => Some(ScalarType::Bool),
        Expr::Name(n) | Expr::Index(n, _) => lookup(n),
        Expr::Unary(UnaryOp::Neg, _) => Some(ScalarType::Real),
        Expr::Unary(UnaryOp::Not, _) => Some(ScalarType::Bool),
        Expr::Binary(op, ..) => match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => Some(ScalarType::Real),
            _ => Some(ScalarType::Bool),
        },
        Expr::Aggregate { op, .. } => match op {
            AggregateOp::Sum | AggregateOp::Count => Some(ScalarType::Real),
            AggregateOp::Any | AggregateOp::All => Some(ScalarType::Bool),
        },
    }
}
