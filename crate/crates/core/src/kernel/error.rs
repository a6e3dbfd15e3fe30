use thiserror::Error;

use super::expr::ScalarType;

/// Failures while evaluating an expression against a system state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("connection index {index} out of range for `{reference}` ({count} connections)")]
    ConnectionOutOfRange {
        reference: String,
        index: f64,
        count: usize,
    },
    #[error("expected {expected}, found {found}")]
    TypeMismatch { expected: ScalarType, found: String },
    #[error("aggregate reads references with different connection counts ({first} vs {second})")]
    MismatchedAggregate { first: usize, second: usize },
    #[error("import chain too deep (cyclic exports?)")]
    RecursionLimit,
}

/// Structural errors raised while defining components or assembling a system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate {kind} `{name}` in {scope}")]
    DuplicateName {
        kind: &'static str,
        name: String,
        scope: String,
    },
    #[error("{scope}: unresolved state `{state}` in automaton `{automaton}`")]
    UnresolvedState {
        scope: String,
        automaton: String,
        state: String,
    },
    #[error("{scope}: unresolved automaton `{automaton}`")]
    UnresolvedAutomaton { scope: String, automaton: String },
    #[error("{scope}: unresolved identifier `{name}`")]
    UnresolvedIdentifier { scope: String, name: String },
    #[error("{scope}: condition of `{transition}` is not boolean")]
    NonBooleanCondition { scope: String, transition: String },
    #[error("{scope}: automaton `{automaton}` has no states")]
    EmptyAutomaton { scope: String, automaton: String },
    #[error("{scope}: unknown hook `{hook}`")]
    UnknownHook { scope: String, hook: String },
    #[error("{scope}: {message}")]
    Invalid { scope: String, message: String },
    #[error("unknown component type `{0}`")]
    UnknownComponentType(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("instance `{instance}` has no message box `{message_box}`")]
    UnknownMessageBox {
        instance: String,
        message_box: String,
    },
    #[error("{component}: unknown parameter `{parameter}`")]
    UnknownParameter {
        component: String,
        parameter: String,
    },
    #[error("{component}: too many positional arguments ({given} given, {expected} parameters)")]
    Arity {
        component: String,
        given: usize,
        expected: usize,
    },
    #[error("{component}.{parameter}: expected {expected}, got {found}")]
    ParameterType {
        component: String,
        parameter: String,
        expected: ScalarType,
        found: String,
    },
    #[error("connection {left} <-> {right}: import label `{label}` has no matching export")]
    LabelMismatch {
        left: String,
        right: String,
        label: String,
    },
    #[error("backup chains form a cycle through `{0}`")]
    CyclicBackupChain(String),
    #[error("instance `{0}` appears twice in a backup chain")]
    DuplicateInChain(String),
    #[error("ODE variable `{0}` is bound more than once")]
    OdeBoundTwice(String),
    #[error("ODE variable `{0}` has no derivative assignment")]
    MissingEquation(String),
    #[error("`{variable}` must be a real variable to be integrated")]
    NotContinuous { variable: String },
    #[error("instances `{first}` and `{second}` share the value {value} of unique parameter `{parameter}`")]
    DuplicateUniqueParameter {
        parameter: String,
        first: String,
        second: String,
        value: String,
    },
    #[error("hook on `{instance}` targets missing variable `{variable}` of `{target}`")]
    HookTarget {
        instance: String,
        target: String,
        variable: String,
    },
    #[error("evaluating {context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
}
