//! Maintainability metrics over source text: LOC, line diff and RLOC,
//! Halstead measures, cyclomatic complexity and the maintainability index.
//! Tokenization is driven by a [`LanguageProfile`].

use std::path::PathBuf;

use thiserror::Error;

pub mod complexity;
pub mod diff;
pub mod halstead;
pub mod lines;
pub mod profile;
pub mod report;
pub mod scan;

pub use complexity::{cyclomatic, find_units, maintainability_index, measure_units, Cyclomatic, Unit, UnitMetrics};
pub use diff::{count_edits, diff_lines, diff_versions, myers, rloc, DiffCounts, Edit};
pub use halstead::{halstead, HalsteadMetrics};
pub use lines::{classify, classify_lines, code_lines, Classified, LineCounts};
pub use profile::{resolve_profile, search_path, LanguageProfile, UnitRule, PROFILE_PATH_VAR};
pub use report::{
    load_case_sets, measure, report_experiment, report_tables, write_file_metrics, CaseRow, CaseSources,
    FileMetrics, MetricsReport, PairRow, FILE_METRICS_HEADER, RLOC_PAIRS,
};
pub use scan::{scan, tokenize, LineKind, Token, TokenKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{line}:{column}: unexpected character `{found}`")]
    Token { line: usize, column: usize, found: char },
    #[error("RLOC is undefined for a target with no code lines")]
    UndefinedRatio,
    #[error("profile line {line}: {message}")]
    Profile { line: usize, message: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("report: {0}")]
    Report(String),
}
