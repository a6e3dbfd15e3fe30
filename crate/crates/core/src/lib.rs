//! Dependability modeling workbench.
//!
//! * [`kernel`]: components, automata, message boxes and system assembly.
//! * [`engine`]: one PDMP replication (RK4 flow, exponential clocks,
//!   guard localization, discrete cascades).
//! * [`dsl`]: the `.model` text format, parser and elaborator.
//! * [`cases`]: the Heated Room case catalog and its analytic oracles.
//! * [`montecarlo`]: replication orchestration, statistics, clustering.
//! * [`metrics`]: LOC, diff/RLOC, Halstead, cyclomatic complexity and
//!   maintainability index over source files.

pub mod cases;
pub mod dsl;
pub mod engine;
pub mod kernel;
pub mod metrics;
pub mod montecarlo;
