//! Data model for distributed stochastic hybrid automata.
//!
//! A [`ComponentDefinition`] is a reusable type holding automata,
//! variables, message boxes and notification hooks. [`assemble_system`]
//! instantiates definitions and links them into an immutable
//! [`SystemModel`]; simulation state lives separately in [`RuntimeState`].

mod component;
mod error;
mod expr;
mod system;

pub use component::{
    AutomatonDef, ComponentDefinition, Export, HookAction, HookDef, HookTarget, Import,
    MessageBoxDef, Parameter, PdmpContribution, ReferenceDef, Symbol, TransitionDef,
    TransitionLaw, VariableDef,
};
pub use error::{EvalError, ModelError};
pub use expr::{
    evaluate, static_type, AggregateOp, BinaryOp, Compiled, EvalContext, Expr, ScalarType,
    UnaryOp, Value,
};
pub use system::{
    assemble_system, Argument, CompiledAutomaton, CompiledHook, CompiledHookAction, CompiledLaw,
    CompiledTransition, ConnectionDecl, Endpoint, Instance, InstanceDecl, MediatorDef,
    MediatorGroup, PdmpBinding, RuntimeState, Source, SubjectGroup, SystemModel, SystemParts,
    View,
};

/// Validates a component definition: unique names, resolvable states and
/// identifiers, boolean conditions.
pub fn define_component(definition: ComponentDefinition) -> Result<ComponentDefinition, ModelError> {
    definition.define()
}

#[cfg(test)]
mod tests;
