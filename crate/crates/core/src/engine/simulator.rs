use crate::kernel::{evaluate, Compiled, CompiledLaw, EvalError, RuntimeState, SystemModel, Value, View};

use super::rng::{sample_exponential, RandomStream};
use super::trace::{Firing, Sample, SimulationTrace};
use super::{ClockPolicy, EngineConfig, EngineError};

/// Why [`Simulator::integrate_until_event`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CandidateReached,
    GuardCrossed,
    StopCondition,
}

#[derive(Debug, Clone, Copy)]
struct FlatTransition {
    instance: usize,
    automaton: usize,
    flat_automaton: usize,
    index: usize,
    source: usize,
    target: usize,
    exponential: bool,
}

struct Ode<'m> {
    value: usize,
    instance: usize,
    rhs: &'m Compiled,
}

#[derive(Clone, Copy)]
enum Monitor {
    /// Instantaneous transition: triggers on false -> true.
    Guard(usize),
    /// Stop condition: triggers on any change.
    Stop(usize),
}

/// One replication in progress.
pub struct Simulator<'m> {
    model: &'m SystemModel,
    config: EngineConfig,
    rng: RandomStream,
    state: RuntimeState,
    scratch: RuntimeState,
    t: f64,
    transitions: Vec<FlatTransition>,
    /// Flat transition indices per flat automaton.
    by_automaton: Vec<Vec<usize>>,
    clocks: Vec<f64>,
    rejected: Vec<bool>,
    odes: Vec<Ode<'m>>,
    stops: Vec<(usize, &'m Compiled)>,
    sampled: Vec<usize>,
    y0: Vec<f64>,
    k: [Vec<f64>; 4],
    next_grid: u64,
    grid_points: u64,
    trace: SimulationTrace,
}

fn eval_err(context: impl FnOnce() -> String, time: f64) -> impl FnOnce(EvalError) -> EngineError {
    move |source| EngineError::Eval {
        context: context(),
        time,
        source,
    }
}

impl<'m> Simulator<'m> {
    /// Initial state with start hooks run and clocks sampled. No transition
    /// has fired yet.
    pub fn new(model: &'m SystemModel, config: EngineConfig, stream: u64) -> Result<Self, EngineError> {
        config.validate()?;
        let state = model.initial_state()?;
        let mut transitions = Vec::new();
        let mut by_automaton = vec![Vec::new(); model.automaton_count()];
        for (i, inst) in model.instances.iter().enumerate() {
            for (a, aut) in inst.automata.iter().enumerate() {
                let flat = model.automaton_flat_index(i, a);
                for (k, tr) in aut.transitions.iter().enumerate() {
                    by_automaton[flat].push(transitions.len());
                    transitions.push(FlatTransition {
                        instance: i,
                        automaton: a,
                        flat_automaton: flat,
                        index: k,
                        source: tr.source,
                        target: tr.target,
                        exponential: matches!(tr.law, CompiledLaw::Exponential(_)),
                    });
                }
            }
        }
        let mut odes = Vec::new();
        let mut stops = Vec::new();
        for m in &model.pdmp_managers {
            for (&(inst, slot), (owner, rhs)) in m.ode_variables.iter().zip(&m.equations) {
                odes.push(Ode {
                    value: model.value_index(inst, slot),
                    instance: *owner,
                    rhs,
                });
            }
            stops.extend(m.stop_conditions.iter().map(|(i, c)| (*i, c)));
        }
        let sampled: Vec<usize> = odes.iter().map(|o| o.value).collect();
        let labels = model
            .pdmp_managers
            .iter()
            .flat_map(|m| m.ode_variables.iter().map(|&(i, s)| model.variable_label(i, s)))
            .collect();
        let grid_points = match config.sample_step {
            Some(step) => (config.horizon / step + 1e-9).floor() as u64 + 1,
            None => 1,
        };
        let n = odes.len();
        let n_trans = transitions.len();
        let mut sim = Simulator {
            model,
            rng: RandomStream::new(config.seed, stream),
            scratch: state.clone(),
            trace: SimulationTrace {
                horizon: config.horizon,
                initial_active: Vec::new(),
                firings: Vec::new(),
                sampled: labels,
                samples: Vec::new(),
                end_state_signature: Vec::new(),
            },
            config,
            state,
            t: 0.0,
            transitions,
            by_automaton,
            clocks: vec![f64::INFINITY; n_trans],
            rejected: vec![false; n_trans],
            odes,
            stops,
            sampled,
            y0: vec![0.0; n],
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            next_grid: 0,
            grid_points,
        };
        for m in &model.pdmp_managers {
            for &(inst, hook) in &m.start_hooks {
                model
                    .run_hooks(&mut sim.state, inst, &[hook])
                    .map_err(eval_err(|| format!("start hook of {}", model.instances[inst].name), 0.0))?;
            }
        }
        sim.trace.initial_active = sim.state.active.clone();
        for k in 0..sim.transitions.len() {
            let tr = sim.transitions[k];
            if tr.exponential && sim.state.active[tr.flat_automaton] == tr.source {
                sim.clocks[k] = sim.sample_clock(k)?;
            }
        }
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &RuntimeState {
        &self.state
    }

    pub fn trace(&self) -> &SimulationTrace {
        &self.trace
    }

    /// Earliest pending exponential firing time.
    pub fn next_clock(&self) -> f64 {
        self.clocks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Runs to the horizon and returns the trace.
    pub fn run(mut self) -> Result<SimulationTrace, EngineError> {
        self.cascade()?;
        while self.t < self.config.horizon {
            let t_cand = self.next_clock().min(self.config.horizon);
            self.integrate_until_event(t_cand)?;
            self.cascade()?;
        }
        self.record_due_samples();
        self.trace.end_state_signature = self.model.state_signature(&self.state);
        Ok(self.trace)
    }

    fn view<'a>(&'a self, state: &'a RuntimeState) -> View<'a> {
        View {
            model: self.model,
            state,
        }
    }

    fn condition(&self, k: usize, state: &RuntimeState) -> Result<bool, EngineError> {
        let tr = self.transitions[k];
        let compiled = &self.model.instances[tr.instance].automata[tr.automaton].transitions[tr.index];
        match &compiled.condition {
            None => Ok(true),
            Some(c) => evaluate(&self.view(state), tr.instance, c, None)
                .and_then(Value::as_bool)
                .map_err(eval_err(|| format!("condition of {}", self.transition_name(k)), self.t)),
        }
    }

    fn law_value(&self, k: usize) -> Result<f64, EngineError> {
        let tr = self.transitions[k];
        let compiled = &self.model.instances[tr.instance].automata[tr.automaton].transitions[tr.index];
        let e = match &compiled.law {
            CompiledLaw::Exponential(e) | CompiledLaw::Instantaneous(e) => e,
        };
        evaluate(&self.view(&self.state), tr.instance, e, None)
            .map(Value::as_f64)
            .map_err(eval_err(|| format!("law of {}", self.transition_name(k)), self.t))
    }

    fn transition_name(&self, k: usize) -> String {
        let tr = self.transitions[k];
        let inst = &self.model.instances[tr.instance];
        let a = &inst.automata[tr.automaton];
        format!("{}.{}.{}", inst.name, a.name, a.transitions[tr.index].name)
    }

    /// Absolute firing time of exponential transition `k`; a zero rate
    /// disables the clock.
    fn sample_clock(&mut self, k: usize) -> Result<f64, EngineError> {
        let rate = self.law_value(k)?;
        if rate == 0.0 {
            return Ok(f64::INFINITY);
        }
        let delay = sample_exponential(&mut self.rng, rate).map_err(|source| EngineError::Law {
            transition: self.transition_name(k),
            time: self.t,
            source,
        })?;
        Ok(self.t + delay)
    }

    /// Fires enabled transitions in priority order until none is enabled.
    fn cascade(&mut self) -> Result<(), EngineError> {
        let mut fired = 0;
        loop {
            let mut chosen = None;
            for k in 0..self.transitions.len() {
                let tr = self.transitions[k];
                if self.state.active[tr.flat_automaton] != tr.source {
                    continue;
                }
                if tr.exponential {
                    if self.clocks[k] > self.t {
                        continue;
                    }
                    if !self.condition(k, &self.state)? {
                        self.clocks[k] = self.sample_clock(k)?;
                        continue;
                    }
                    chosen = Some(k);
                    break;
                }
                let enabled = self.condition(k, &self.state)?;
                if self.rejected[k] {
                    if !enabled {
                        self.rejected[k] = false;
                    }
                    continue;
                }
                if !enabled {
                    continue;
                }
                let weight = self.law_value(k)?;
                if weight >= 1.0 || (weight > 0.0 && self.rng.uniform() < weight) {
                    chosen = Some(k);
                    break;
                }
                self.rejected[k] = true;
            }
            let Some(k) = chosen else { return Ok(()) };
            fired += 1;
            if fired > self.config.max_cascade_iterations {
                return Err(EngineError::Livelock {
                    time: self.t,
                    limit: self.config.max_cascade_iterations,
                });
            }
            self.fire(k)?;
        }
    }

    fn fire(&mut self, k: usize) -> Result<(), EngineError> {
        let tr = self.transitions[k];
        self.trace.firings.push(Firing {
            time: self.t,
            instance: tr.instance,
            automaton: tr.automaton,
            transition: tr.index,
            from: tr.source,
            to: tr.target,
        });
        if self.trace.firings.len() >= self.config.max_events {
            return Err(EngineError::Zeno {
                time: self.t,
                limit: self.config.max_events,
            });
        }
        self.state.active[tr.flat_automaton] = tr.target;
        for &j in &self.by_automaton[tr.flat_automaton] {
            self.clocks[j] = f64::INFINITY;
            self.rejected[j] = false;
        }
        let hooks = &self.model.instances[tr.instance].automata[tr.automaton].transitions[tr.index].hooks;
        if !hooks.is_empty() {
            let t = self.t;
            self.model
                .run_hooks(&mut self.state, tr.instance, hooks)
                .map_err(eval_err(|| format!("hooks of {}", self.transition_name(k)), t))?;
        }
        for idx in 0..self.by_automaton[tr.flat_automaton].len() {
            let j = self.by_automaton[tr.flat_automaton][idx];
            if self.transitions[j].exponential && self.transitions[j].source == tr.target {
                self.clocks[j] = self.sample_clock(j)?;
            }
        }
        if self.config.clock_policy == ClockPolicy::ResampleEveryEvent {
            for j in 0..self.transitions.len() {
                let o = self.transitions[j];
                if o.exponential && o.flat_automaton != tr.flat_automaton && self.state.active[o.flat_automaton] == o.source
                {
                    self.clocks[j] = self.sample_clock(j)?;
                }
            }
        }
        Ok(())
    }

    fn grid_time(&self, k: u64) -> f64 {
        match self.config.sample_step {
            Some(step) => (k as f64 * step).min(self.config.horizon),
            None => 0.0,
        }
    }

    fn record_due_samples(&mut self) {
        while self.next_grid < self.grid_points && self.grid_time(self.next_grid) <= self.t {
            let time = self.grid_time(self.next_grid);
            let values = self.sampled.iter().map(|&v| self.state.values[v].as_f64()).collect();
            self.trace.samples.push(Sample { time, values });
            self.next_grid += 1;
        }
    }

    fn next_grid_time(&self) -> f64 {
        if self.next_grid < self.grid_points {
            self.grid_time(self.next_grid)
        } else {
            f64::INFINITY
        }
    }

    /// Writes `dy/dt` at `state` into `out`.
    fn derivatives(&self, state: &RuntimeState, out: &mut [f64], t: f64) -> Result<(), EngineError> {
        let view = self.view(state);
        for (o, d) in self.odes.iter().zip(out.iter_mut()) {
            let v = evaluate(&view, o.instance, o.rhs, None)
                .map_err(eval_err(|| format!("derivative of {}", self.variable_name(o.value)), t))?
                .as_f64();
            if !v.is_finite() {
                return Err(EngineError::Numeric {
                    variable: self.variable_name(o.value),
                    time: t,
                });
            }
            *d = v;
        }
        Ok(())
    }

    fn variable_name(&self, value: usize) -> String {
        self.odes
            .iter()
            .position(|o| o.value == value)
            .map(|k| self.trace.sampled[k].clone())
            .unwrap_or_default()
    }

    /// One RK4 step of length `dt` from `y0`, leaving the result in `state`.
    fn rk4(&mut self, t0: f64, dt: f64) -> Result<(), EngineError> {
        let mut k = std::mem::take(&mut self.k);
        let result = (|| {
            let n = self.odes.len();
            self.scratch.values.clone_from(&self.state.values);
            self.scratch.active.clone_from(&self.state.active);
            for (i, o) in self.odes.iter().enumerate() {
                self.scratch.values[o.value] = Value::Num(self.y0[i]);
            }
            self.derivatives(&self.scratch, &mut k[0], t0)?;
            for stage in 1..4 {
                let c = if stage == 3 { dt } else { dt / 2.0 };
                for i in 0..n {
                    let y = self.y0[i] + c * k[stage - 1][i];
                    self.scratch.values[self.odes[i].value] = Value::Num(y);
                }
                let (_, tail) = k.split_at_mut(stage);
                self.derivatives(&self.scratch, &mut tail[0], t0 + c)?;
            }
            for i in 0..n {
                let y = self.y0[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                self.state.values[self.odes[i].value] = Value::Num(y);
            }
            Ok(())
        })();
        self.k = k;
        result
    }

    fn monitors(&self) -> Vec<Monitor> {
        let mut m = Vec::new();
        for (k, tr) in self.transitions.iter().enumerate() {
            if !tr.exponential && self.state.active[tr.flat_automaton] == tr.source {
                m.push(Monitor::Guard(k));
            }
        }
        m.extend((0..self.stops.len()).map(Monitor::Stop));
        m
    }

    fn monitor_values(&self, monitors: &[Monitor], out: &mut Vec<bool>) -> Result<(), EngineError> {
        out.clear();
        for m in monitors {
            out.push(match *m {
                Monitor::Guard(k) => self.condition(k, &self.state)?,
                Monitor::Stop(s) => {
                    let (inst, c) = self.stops[s];
                    evaluate(&self.view(&self.state), inst, c, None)
                        .and_then(Value::as_bool)
                        .map_err(eval_err(
                            || format!("stop condition of {}", self.model.instances[inst].name),
                            self.t,
                        ))?
                }
            });
        }
        Ok(())
    }

    /// The first monitor that triggers between `before` and `after`.
    fn triggered(monitors: &[Monitor], before: &[bool], after: &[bool]) -> Option<StopReason> {
        let mut reason = None;
        for (m, (b, a)) in monitors.iter().zip(before.iter().zip(after)) {
            match m {
                Monitor::Guard(_) if !b && *a => return Some(StopReason::GuardCrossed),
                Monitor::Stop(_) if b != a => reason = Some(StopReason::StopCondition),
                _ => {}
            }
        }
        reason
    }

    /// Integrates the continuous state towards `t_candidate`, stopping early
    /// at the first guard crossing or stop-condition flip, located by
    /// bisection to within the event tolerance.
    pub fn integrate_until_event(&mut self, t_candidate: f64) -> Result<(f64, StopReason), EngineError> {
        let monitors = self.monitors();
        let mut before = Vec::with_capacity(monitors.len());
        let mut after = Vec::with_capacity(monitors.len());
        self.monitor_values(&monitors, &mut before)?;
        loop {
            self.record_due_samples();
            if self.t >= t_candidate {
                return Ok((self.t, StopReason::CandidateReached));
            }
            let grid = self.next_grid_time();
            if self.odes.is_empty() {
                // Nothing flows, so no condition can change before the candidate.
                self.t = grid.min(t_candidate);
                continue;
            }
            let t0 = self.t;
            let t_end = (t0 + self.config.step_size).min(grid).min(t_candidate);
            let dt = t_end - t0;
            for (i, o) in self.odes.iter().enumerate() {
                self.y0[i] = self.state.values[o.value].as_f64();
            }
            self.rk4(t0, dt)?;
            self.t = t_end;
            self.monitor_values(&monitors, &mut after)?;
            if let Some(reason) = Self::triggered(&monitors, &before, &after) {
                let (mut lo, mut hi) = (0.0, dt);
                while hi - lo > self.config.event_tolerance {
                    let mid = 0.5 * (lo + hi);
                    self.rk4(t0, mid)?;
                    self.t = t0 + mid;
                    self.monitor_values(&monitors, &mut after)?;
                    if Self::triggered(&monitors, &before, &after).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.rk4(t0, hi)?;
                self.t = t0 + hi;
                self.monitor_values(&monitors, &mut after)?;
                let reason = Self::triggered(&monitors, &before, &after).unwrap_or(reason);
                return Ok((self.t, reason));
            }
            for (k, m) in monitors.iter().enumerate() {
                if let Monitor::Guard(j) = *m {
                    if !after[k] {
                        self.rejected[j] = false;
                    }
                }
            }
            std::mem::swap(&mut before, &mut after);
        }
    }
}
