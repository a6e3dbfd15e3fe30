use std::path::PathBuf;

use thiserror::Error;

use super::lexer::Pos;
use crate::kernel::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DslError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{}:{line}: {source}", path.display())]
    Model {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("{}: include cycle through this file", path.display())]
    IncludeCycle { path: PathBuf },
    #[error("expected exactly one system block, found {0}")]
    SystemCount(usize),
    #[error("{}:{line}: parameter values must be constants", path.display())]
    NonConstant { path: PathBuf, line: usize },
}

impl DslError {
    pub fn model(path: &std::path::Path, line: usize, source: ModelError) -> Self {
        DslError::Model {
            path: path.to_path_buf(),
            line,
            source: Box::new(source),
        }
    }
}
