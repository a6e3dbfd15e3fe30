//! Textual modeling language: parser, canonical printer, include
//! resolution and elaboration into a [`SystemModel`](crate::kernel::SystemModel).
//!
//! The grammar is documented in `docs/grammar.md`.

mod ast;
mod elaborate;
mod error;
mod lexer;
mod parser;
mod pretty;
mod source;

use std::path::Path;

pub use ast::*;
pub use elaborate::{component_definition, elaborate, elaborate_parts, mediator_definition};
pub use error::{DslError, ParseError};
pub use lexer::{tokenize, Pos, Tok, Token};
pub use parser::{parse, parse_expr};
pub use pretty::print;
pub use source::{file_set, normalize, FsLoader, MemoryLoader, SourceFile, SourceLoader};

use crate::kernel::SystemModel;

/// Loads, elaborates and assembles the model at `path` from the filesystem.
pub fn load_model(path: impl AsRef<Path>) -> Result<SystemModel, DslError> {
    load_model_with(&FsLoader, path.as_ref())
}

pub fn load_model_with(loader: &dyn SourceLoader, path: &Path) -> Result<SystemModel, DslError> {
    elaborate(&file_set(loader, path)?)
}

#[cfg(test)]
mod tests;
