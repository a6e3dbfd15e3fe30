//! Replication orchestration, time-fraction statistics and end-state
//! clustering.
//!
//! Replication `r` uses random stream `r` of the experiment seed, so results
//! depend only on the spec. Runs are summarized independently (in parallel
//! with the `parallel` feature) and aggregated in replication order.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::engine::{run_replication, EngineConfig, EngineError, SimulationTrace};
use crate::kernel::{evaluate, Compiled, Expr, ModelError, SystemModel, Value, View};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub replications: usize,
    /// Horizon, seed, step size and sample grid.
    pub engine: EngineConfig,
    /// Named system-level state predicates whose time fraction is estimated,
    /// e.g. `nok = active(heater.Function.NOK)`.
    pub observe: Vec<(String, Expr)>,
    /// Restricts clustering to these `instance.Automaton` prefixes.
    pub cluster_projection: Option<Vec<String>>,
}

impl ExperimentSpec {
    pub fn new(replications: usize, engine: EngineConfig) -> Self {
        ExperimentSpec {
            replications,
            engine,
            observe: Vec::new(),
            cluster_projection: None,
        }
    }

    pub fn observe(mut self, name: &str, predicate: Expr) -> Self {
        self.observe.push((name.to_string(), predicate));
        self
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error("observable `{name}`: {source}")]
    Observable {
        name: String,
        #[source]
        source: ModelError,
    },
    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: EngineError,
    },
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

impl Estimate {
    /// Sample mean and standard error (zero for a single run), summed in
    /// the given order.
    pub fn from_values(values: &[f64]) -> Estimate {
        let n = values.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                runs: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, runs: n }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Time fraction of one automaton state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFraction {
    pub instance: String,
    pub automaton: String,
    pub state: String,
    pub estimate: Estimate,
}

/// Mean and envelope of a sampled variable at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variable: String,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub signature: Vec<String>,
    pub count: usize,
    /// Lowest replication index ending in this signature.
    pub representative: usize,
}

/// What one replication contributes to the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub replication: usize,
    /// Time fraction per flat `(automaton, state)`.
    pub state_fractions: Vec<f64>,
    /// Time fraction per observable.
    pub observed: Vec<f64>,
    /// Grid samples, one row per sample time.
    pub samples: Vec<(f64, Vec<f64>)>,
    pub sampled: Vec<String>,
    pub signature: Vec<String>,
    pub firings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: usize,
    pub horizon: f64,
    pub state_fractions: Vec<StateFraction>,
    pub observed: Vec<(String, Estimate)>,
    pub trajectories: Vec<Trajectory>,
    /// Largest cluster first, ties by signature.
    pub clusters: Vec<Cluster>,
    pub per_run: Vec<RunSummary>,
}

impl ExperimentResult {
    pub fn state_fraction(&self, instance: &str, automaton: &str, state: &str) -> Option<Estimate> {
        self.state_fractions
            .iter()
            .find(|s| s.instance == instance && s.automaton == automaton && s.state == state)
            .map(|s| s.estimate)
    }

    pub fn observed(&self, name: &str) -> Option<Estimate> {
        self.observed.iter().find(|(n, _)| n == name).map(|(_, e)| *e)
    }

    /// Per-run values of an observable, in replication order.
    pub fn observed_values(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.observed.iter().position(|(n, _)| n == name)?;
        Some(self.per_run.iter().map(|r| r.observed[k]).collect())
    }
}

/// Flat `(automaton, state)` numbering of a model.
struct StateIndex {
    /// First flat state of each flat automaton.
    offsets: Vec<usize>,
    labels: Vec<(String, String, String)>,
}

impl StateIndex {
    fn new(model: &SystemModel) -> Self {
        let mut offsets = Vec::new();
        let mut labels = Vec::new();
        for inst in &model.instances {
            for a in &inst.automata {
                offsets.push(labels.len());
                for s in &a.states {
                    labels.push((inst.name.clone(), a.name.clone(), s.clone()));
                }
            }
        }
        StateIndex { offsets, labels }
    }
}

fn compile_observables(model: &SystemModel, spec: &ExperimentSpec) -> Result<Vec<Compiled>, ExperimentError> {
    spec.observe
        .iter()
        .map(|(name, e)| {
            model.compile_state_predicate(e).map_err(|source| ExperimentError::Observable {
                name: name.clone(),
                source,
            })
        })
        .collect()
}

fn summarize(
    model: &SystemModel,
    index: &StateIndex,
    observables: &[Compiled],
    replication: usize,
    trace: SimulationTrace,
) -> Result<RunSummary, ModelError> {
    let mut fractions = vec![0.0; index.labels.len()];
    let mut observed = vec![0.0; observables.len()];
    let mut state = model.initial_state()?;
    let mut err = None;
    let mut weigh = |dt: f64, active: &[usize]| {
        for (a, &s) in active.iter().enumerate() {
            fractions[index.offsets[a] + s] += dt;
        }
        state.active.copy_from_slice(active);
        for (k, c) in observables.iter().enumerate() {
            let view = View { model, state: &state };
            match evaluate(&view, 0, c, None).and_then(Value::as_bool) {
                Ok(true) => observed[k] += dt,
                Ok(false) => {}
                Err(source) => {
                    err.get_or_insert(ModelError::Eval {
                        context: "observable".into(),
                        source,
                    });
                }
            }
        }
    };
    if trace.horizon > 0.0 {
        trace.for_each_segment(model, |t0, t1, active| weigh((t1 - t0) / trace.horizon, active));
    } else {
        let settled = trace.settled_states(model);
        weigh(1.0, &settled.last().expect("initial state").1);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(RunSummary {
        replication,
        state_fractions: fractions,
        observed,
        samples: trace.samples.into_iter().map(|s| (s.time, s.values)).collect(),
        sampled: trace.sampled,
        signature: trace.end_state_signature,
        firings: trace.firings.len(),
    })
}

fn run_one(
    model: &SystemModel,
    spec: &ExperimentSpec,
    index: &StateIndex,
    observables: &[Compiled],
    r: usize,
) -> Result<RunSummary, ExperimentError> {
    let tag = |source| ExperimentError::Replication { replication: r, source };
    let trace = run_replication(model, &spec.engine, r as u64).map_err(tag)?;
    summarize(model, index, observables, r, trace).map_err(|e| tag(EngineError::Model(e)))
}

/// Runs `spec.replications` replications and aggregates them.
pub fn run_experiment(model: &SystemModel, spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    if spec.replications == 0 {
        return Err(ExperimentError::NoReplications);
    }
    spec.engine
        .validate()
        .map_err(|source| ExperimentError::Replication { replication: 0, source })?;
    let observables = compile_observables(model, spec)?;
    let index = StateIndex::new(model);

    #[cfg(feature = "parallel")]
    let results: Vec<Result<RunSummary, ExperimentError>> = {
        use rayon::prelude::*;
        (0..spec.replications)
            .into_par_iter()
            .map(|r| run_one(model, spec, &index, &observables, r))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<RunSummary, ExperimentError>> = (0..spec.replications)
        .map(|r| run_one(model, spec, &index, &observables, r))
        .collect();

    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(model, spec, summaries))
}

/// Merges run summaries. The result does not depend on the order of
/// `summaries`.
pub fn aggregate(model: &SystemModel, spec: &ExperimentSpec, mut summaries: Vec<RunSummary>) -> ExperimentResult {
    summaries.sort_by_key(|s| s.replication);
    let index = StateIndex::new(model);
    let column = |f: &dyn Fn(&RunSummary) -> f64| summaries.iter().map(f).collect::<Vec<f64>>();

    let state_fractions = index
        .labels
        .iter()
        .enumerate()
        .map(|(k, (i, a, s))| StateFraction {
            instance: i.clone(),
            automaton: a.clone(),
            state: s.clone(),
            estimate: Estimate::from_values(&column(&|r| r.state_fractions[k])),
        })
        .collect();

    let observed = spec
        .observe
        .iter()
        .enumerate()
        .map(|(k, (name, _))| (name.clone(), Estimate::from_values(&column(&|r| r.observed[k]))))
        .collect();

    let mut trajectories = Vec::new();
    if let Some(first) = summaries.first() {
        let n_points = summaries.iter().map(|s| s.samples.len()).min().unwrap_or(0);
        for (v, label) in first.sampled.iter().enumerate() {
            let points = (0..n_points)
                .map(|p| {
                    let values = column(&|r| r.samples[p].1[v]);
                    TrajectoryPoint {
                        time: first.samples[p].0,
                        mean: values.iter().sum::<f64>() / values.len() as f64,
                        min: values.iter().copied().fold(f64::INFINITY, f64::min),
                        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    }
                })
                .collect();
            trajectories.push(Trajectory {
                variable: label.clone(),
                points,
            });
        }
    }

    let clusters = cluster_sequences(
        summaries.iter().map(|s| (s.replication, s.signature.as_slice())),
        spec.cluster_projection.as_deref(),
    );

    ExperimentResult {
        runs: summaries.len(),
        horizon: spec.engine.horizon,
        state_fractions,
        observed,
        trajectories,
        clusters,
        per_run: summaries,
    }
}

/// Groups runs by end-state signature. With a projection, only signature
/// entries starting with one of the given `instance.Automaton` prefixes
/// are kept.
pub fn cluster_sequences<'a>(
    runs: impl IntoIterator<Item = (usize, &'a [String])>,
    projection: Option<&[String]>,
) -> Vec<Cluster> {
    let mut groups: BTreeMap<Vec<String>, (usize, usize)> = BTreeMap::new();
    for (run, sig) in runs {
        let key: Vec<String> = match projection {
            None => sig.to_vec(),
            Some(p) => sig
                .iter()
                .filter(|s| p.iter().any(|pre| s.strip_prefix(pre.as_str()).is_some_and(|r| r.starts_with('.'))))
                .cloned()
                .collect(),
        };
        let e = groups.entry(key).or_insert((0, run));
        e.0 += 1;
        e.1 = e.1.min(run);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|(signature, (count, representative))| Cluster {
            signature,
            count,
            representative,
        })
        .collect();
    clusters.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.signature.cmp(&b.signature)));
    clusters
}

pub const RESULTS_HEADER: &str = "statistic,instance,key,mean,stderr,runs";
pub const CLUSTERS_HEADER: &str = "signature,count";

/// Results CSV: state time fractions, then observables.
pub fn write_results_csv<W: Write>(w: &mut W, result: &ExperimentResult) -> io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for s in &result.state_fractions {
        let e = s.estimate;
        writeln!(
            w,
            "state_fraction,{},{}.{},{:.9},{:.9},{}",
            s.instance, s.automaton, s.state, e.mean, e.stderr, e.runs
        )?;
    }
    for (name, e) in &result.observed {
        writeln!(w, "observed,,{name},{:.9},{:.9},{}", e.mean, e.stderr, e.runs)?;
    }
    Ok(())
}

/// Cluster CSV; the signature's entries are joined with `;`.
pub fn write_clusters_csv<W: Write>(w: &mut W, result: &ExperimentResult) -> io::Result<()> {
    writeln!(w, "{CLUSTERS_HEADER}")?;
    for c in &result.clusters {
        writeln!(w, "{},{}", c.signature.join(";"), c.count)?;
    }
    Ok(())
}

/// Trajectory CSV with header `time,variable,mean,min,max`.
pub fn write_trajectories_csv<W: Write>(w: &mut W, result: &ExperimentResult) -> io::Result<()> {
    writeln!(w, "time,variable,mean,min,max")?;
    for t in &result.trajectories {
        for p in &t.points {
            writeln!(w, "{:.9},{},{:.9},{:.9},{:.9}", p.time, t.variable, p.mean, p.min, p.max)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{self, CaseId, RateProfile};
    use crate::dsl::parse_expr;

    fn sig(states: &[&str]) -> Vec<String> {
        states.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_end_states_form_one_cluster() {
        let s = sig(&["h.F.OK"]);
        let c = cluster_sequences([(0, s.as_slice()), (1, s.as_slice()), (2, s.as_slice())], None);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].count, 3);
        assert_eq!(c[0].representative, 0);
    }

    #[test]
    fn distinct_end_states_form_distinct_clusters() {
        let (a, b) = (sig(&["h.F.OK"]), sig(&["h.F.NOK"]));
        let c = cluster_sequences([(0, a.as_slice()), (1, b.as_slice()), (2, b.as_slice())], None);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].count, c[0].representative), (2, 1));
    }

    #[test]
    fn projection_keeps_matching_automata() {
        let a = sig(&["h.Function.OK", "h.Power.ON"]);
        let b = sig(&["h.Function.OK", "h.Power.OFF"]);
        let p = vec!["h.Function".to_string()];
        let c = cluster_sequences([(0, a.as_slice()), (1, b.as_slice())], Some(&p));
        assert_eq!(c, vec![Cluster {
            signature: sig(&["h.Function.OK"]),
            count: 2,
            representative: 0
        }]);
    }

    #[test]
    fn standard_error() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(Estimate::from_values(&[0.3]).stderr, 0.0);
    }

    #[test]
    fn deterministic_single_run() {
        let m = cases::build(CaseId::Case0, &RateProfile::Uniform { lambda: 0.0, mu: 0.1 }).unwrap();
        let spec = ExperimentSpec::new(1, EngineConfig::default().with_horizon(100.0).with_sample_step(Some(1.0)));
        let r = run_experiment(&m, &spec).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert!((r.state_fraction("heater", "Function", "OK").unwrap().mean - 1.0).abs() < 1e-12);
        assert_eq!(r.trajectories[0].points.len(), 101);
        let p = r.trajectories[0].points[10];
        assert_eq!((p.mean, p.min), (p.max, p.max));
    }

    #[test]
    fn fractions_sum_to_one_per_automaton() {
        let m = cases::build(CaseId::Case2, &RateProfile::Figure).unwrap();
        let spec = ExperimentSpec::new(8, EngineConfig::default().with_horizon(300.0).with_step(0.5).with_sample_step(None));
        let r = run_experiment(&m, &spec).unwrap();
        for run in &r.per_run {
            let mut k = 0;
            for inst in &m.instances {
                for a in &inst.automata {
                    let total: f64 = run.state_fractions[k..k + a.states.len()].iter().sum();
                    assert!((total - 1.0).abs() < 1e-9);
                    k += a.states.len();
                }
            }
        }
        assert_eq!(r.clusters.iter().map(|c| c.count).sum::<usize>(), 8);
    }

    #[test]
    fn observables_must_be_state_predicates() {
        let m = cases::build(CaseId::Case0, &RateProfile::Text).unwrap();
        let spec = ExperimentSpec::new(1, EngineConfig::default()).observe("t", parse_expr("temperature > 1").unwrap());
        assert!(matches!(run_experiment(&m, &spec), Err(ExperimentError::Observable { .. })));
    }

    #[test]
    fn engine_errors_carry_the_replication() {
        let m = cases::build(CaseId::Case0, &RateProfile::Uniform { lambda: -1.0, mu: 0.1 }).unwrap();
        let spec = ExperimentSpec::new(3, EngineConfig::default());
        match run_experiment(&m, &spec) {
            Err(ExperimentError::Replication { replication: 0, source: EngineError::Law { .. } }) => {}
            other => panic!("{other:?}"),
        }
    }
}
