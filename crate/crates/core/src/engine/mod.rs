//! PDMP execution of one replication: RK4 flow between events, competing
//! exponential clocks sampled on state entry, guard-triggered instantaneous
//! jumps located by bisection, and deterministic discrete cascades.

mod rng;
mod simulator;
mod trace;

use thiserror::Error;

use crate::kernel::{EvalError, ModelError, SystemModel};

pub use rng::{sample_exponential, sample_exponential_from_uniform, LawError, RandomStream};
pub use simulator::{Simulator, StopReason};
pub use trace::{
    write_firings_csv, write_samples_csv, Firing, FiringLabel, Sample, SimulationTrace, FIRINGS_HEADER,
    SAMPLES_HEADER,
};

/// When exponential clocks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockPolicy {
    /// On entry to the source state; discarded on exit.
    #[default]
    OnEntry,
    /// Additionally redrawn for every enabled clock after each firing.
    /// Equivalent in law by memorylessness; kept for validation.
    ResampleEveryEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub step_size: f64,
    pub event_tolerance: f64,
    pub max_cascade_iterations: usize,
    /// A replication with this many firings is reported as Zeno.
    pub max_events: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Grid spacing for continuous samples; `None` samples `t = 0` only.
    pub sample_step: Option<f64>,
    pub clock_policy: ClockPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            step_size: 0.01,
            event_tolerance: 1e-9,
            max_cascade_iterations: 1000,
            max_events: 1_000_000,
            horizon: 1000.0,
            seed: 42,
            sample_step: Some(0.1),
            clock_policy: ClockPolicy::OnEntry,
        }
    }
}

impl EngineConfig {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_step(mut self, step_size: f64) -> Self {
        self.step_size = step_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sample_step(mut self, sample_step: Option<f64>) -> Self {
        self.sample_step = sample_step;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step size must be positive");
        }
        if !(self.event_tolerance > 0.0) {
            return bad("event tolerance must be positive");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be finite and non-negative");
        }
        if let Some(s) = self.sample_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sample step must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{transition} at t={time}: {source}")]
    Law {
        transition: String,
        time: f64,
        #[source]
        source: LawError,
    },
    #[error("non-finite derivative of {variable} at t={time}")]
    Numeric { variable: String, time: f64 },
    #[error("livelock: cascade at t={time} exceeded {limit} firings")]
    Livelock { time: f64, limit: usize },
    #[error("Zeno behavior: {limit} firings reached by t={time}")]
    Zeno { time: f64, limit: usize },
    #[error("{context} at t={time}: {source}")]
    Eval {
        context: String,
        time: f64,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Simulates one replication on random stream `stream`.
pub fn run_replication(model: &SystemModel, config: &EngineConfig, stream: u64) -> Result<SimulationTrace, EngineError> {
    Simulator::new(model, config.clone(), stream)?.run()
}
