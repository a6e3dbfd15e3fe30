use std::io::{self, Write};

use crate::kernel::SystemModel;

/// One discrete jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firing {
    pub time: f64,
    pub instance: usize,
    pub automaton: usize,
    /// Declaration index within the automaton.
    pub transition: usize,
    pub from: usize,
    pub to: usize,
}

/// Names of a firing, resolved against its model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringLabel<'a> {
    pub instance: &'a str,
    pub automaton: &'a str,
    pub transition: &'a str,
    pub from: &'a str,
    pub to: &'a str,
}

impl Firing {
    pub fn label<'a>(&self, model: &'a SystemModel) -> FiringLabel<'a> {
        let inst = &model.instances[self.instance];
        let a = &inst.automata[self.automaton];
        FiringLabel {
            instance: &inst.name,
            automaton: &a.name,
            transition: &a.transitions[self.transition].name,
            from: &a.states[self.from],
            to: &a.states[self.to],
        }
    }
}

/// Continuous values on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// One value per entry of [`SimulationTrace::sampled`].
    pub values: Vec<f64>,
}

/// Everything observed during one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub horizon: f64,
    /// Active state of every automaton (flat order) before the first firing.
    pub initial_active: Vec<usize>,
    pub firings: Vec<Firing>,
    /// `instance.variable` labels of the sampled variables.
    pub sampled: Vec<String>,
    pub samples: Vec<Sample>,
    pub end_state_signature: Vec<String>,
}

impl SimulationTrace {
    /// Calls `f(t0, t1, active)` for each interval of constant discrete state
    /// in `[0, horizon]`. Zero-length intervals (cascades) are skipped.
    pub fn for_each_segment(&self, model: &SystemModel, mut f: impl FnMut(f64, f64, &[usize])) {
        let mut active = self.initial_active.clone();
        let mut t = 0.0;
        for fi in &self.firings {
            if fi.time > t {
                f(t, fi.time, &active);
                t = fi.time;
            }
            active[model.automaton_flat_index(fi.instance, fi.automaton)] = fi.to;
        }
        if self.horizon > t {
            f(t, self.horizon, &active);
        }
    }

    /// Discrete states just after each instant at which something fired,
    /// plus the initial one. Transient states inside a cascade are skipped.
    pub fn settled_states(&self, model: &SystemModel) -> Vec<(f64, Vec<usize>)> {
        let mut out = Vec::new();
        let mut active = self.initial_active.clone();
        let mut i = 0;
        if self.firings.first().is_none_or(|f| f.time > 0.0) {
            out.push((0.0, active.clone()));
        }
        while i < self.firings.len() {
            let t = self.firings[i].time;
            while i < self.firings.len() && self.firings[i].time == t {
                let fi = &self.firings[i];
                active[model.automaton_flat_index(fi.instance, fi.automaton)] = fi.to;
                i += 1;
            }
            out.push((t, active.clone()));
        }
        out
    }
}

pub const FIRINGS_HEADER: &str = "run,time,instance,automaton,transition,from,to";
pub const SAMPLES_HEADER: &str = "run,time,variable,value";

pub fn write_firings_csv<W: Write>(
    w: &mut W,
    model: &SystemModel,
    run: usize,
    trace: &SimulationTrace,
) -> io::Result<()> {
    for fi in &trace.firings {
        let l = fi.label(model);
        writeln!(
            w,
            "{run},{:.9},{},{},{},{},{}",
            fi.time, l.instance, l.automaton, l.transition, l.from, l.to
        )?;
    }
    Ok(())
}

pub fn write_samples_csv<W: Write>(w: &mut W, run: usize, trace: &SimulationTrace) -> io::Result<()> {
    for s in &trace.samples {
        for (label, v) in trace.sampled.iter().zip(&s.values) {
            writeln!(w, "{run},{:.9},{label},{v:.9}", s.time)?;
        }
    }
    Ok(())
}
