//! Browser bindings: simulate an edited case, measure it, and diff it
//! against another version. Every export returns JSON text.

use std::path::Path;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hybridsim::cases;
use hybridsim::dsl;
use hybridsim::engine::{run_replication, EngineConfig};
use hybridsim::metrics::{self, LanguageProfile};

// The edited text replaces this path, so its includes resolve against the
// embedded component files.
const USER_PATH: &str = "cases/user.model";

#[derive(Serialize)]
struct Firing<'a> {
    time: f64,
    instance: &'a str,
    automaton: &'a str,
    transition: &'a str,
    from: &'a str,
    to: &'a str,
}

#[derive(Serialize)]
struct Simulation<'a> {
    horizon: f64,
    time: Vec<f64>,
    series: Vec<(String, Vec<f64>)>,
    firings: Vec<Firing<'a>>,
    end_state: Vec<String>,
}

#[derive(Serialize)]
struct Unit {
    name: String,
    loc: usize,
    cc: usize,
    volume: f64,
    mi: f64,
}

#[derive(Serialize)]
struct Measurement {
    code: usize,
    comment: usize,
    blank: usize,
    operators: usize,
    operands: usize,
    volume: f64,
    difficulty: f64,
    effort: f64,
    cc: usize,
    mi: f64,
    units: Vec<Unit>,
}

#[derive(Serialize)]
struct Diff {
    same: usize,
    modified: usize,
    added: usize,
    removed: usize,
    loc_target: usize,
    rloc_percent: Option<f64>,
}

/// Text of an embedded case file, e.g. `case1a`.
#[wasm_bindgen]
pub fn case_source(name: &str) -> Result<String, JsError> {
    case_text(name).map(str::to_string).ok_or_else(|| JsError::new(&format!("unknown case {name}")))
}

/// One replication of the edited model.
#[wasm_bindgen]
pub fn simulate(source: &str, horizon: f64, seed: u32, step: f64) -> Result<String, JsError> {
    simulate_json(source, horizon, seed.into(), step).map_err(|e| JsError::new(&e))
}

/// Size and complexity metrics of the edited model.
#[wasm_bindgen]
pub fn measure(source: &str) -> Result<String, JsError> {
    measure_json(source).map_err(|e| JsError::new(&e))
}

/// Line changes from `old` to `new` and the relative change size.
#[wasm_bindgen]
pub fn diff(old: &str, new: &str) -> String {
    diff_json(old, new)
}

pub fn case_text(name: &str) -> Option<&'static str> {
    let path = format!("cases/{name}.model");
    cases::SOURCES.iter().find(|(p, _)| *p == path).map(|(_, t)| *t)
}

pub fn simulate_json(source: &str, horizon: f64, seed: u64, step: f64) -> Result<String, String> {
    let loader = cases::loader().with(USER_PATH, source);
    let model = dsl::load_model_with(&loader, Path::new(USER_PATH)).map_err(|e| e.to_string())?;
    let config = EngineConfig::default()
        .with_horizon(horizon)
        .with_seed(seed)
        .with_step(step)
        .with_sample_step(Some((horizon / 500.0).max(step)));
    let trace = run_replication(&model, &config, 0).map_err(|e| e.to_string())?;
    let series = trace
        .sampled
        .iter()
        .enumerate()
        .map(|(k, name)| (name.clone(), trace.samples.iter().map(|s| s.values[k]).collect()))
        .collect();
    let firings = trace
        .firings
        .iter()
        .map(|f| {
            let l = f.label(&model);
            Firing {
                time: f.time,
                instance: l.instance,
                automaton: l.automaton,
                transition: l.transition,
                from: l.from,
                to: l.to,
            }
        })
        .collect();
    let out = Simulation {
        horizon,
        time: trace.samples.iter().map(|s| s.time).collect(),
        series,
        firings,
        end_state: trace.end_state_signature.clone(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn measure_json(source: &str) -> Result<String, String> {
    let m = metrics::measure(source, &LanguageProfile::model_dsl()).map_err(|e| e.to_string())?;
    let out = Measurement {
        code: m.lines.code,
        comment: m.lines.comment,
        blank: m.lines.blank,
        operators: m.halstead.n1,
        operands: m.halstead.n2,
        volume: m.halstead.volume,
        difficulty: m.halstead.difficulty,
        effort: m.halstead.effort,
        cc: m.cc,
        mi: m.mi_normalized,
        units: m
            .units
            .into_iter()
            .map(|u| Unit {
                name: u.name,
                loc: u.loc,
                cc: u.cc,
                volume: u.halstead.volume,
                mi: u.mi_normalized,
            })
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn diff_json(old: &str, new: &str) -> String {
    let p = LanguageProfile::model_dsl();
    let d = metrics::diff_versions(old, new, &p);
    let loc_target = metrics::classify_lines(new, &p).code;
    let out = Diff {
        same: d.same,
        modified: d.modified,
        added: d.added,
        removed: d.removed,
        loc_target,
        rloc_percent: metrics::rloc(&d, loc_target).ok(),
    };
    serde_json::to_string(&out).expect("plain numbers serialize")
}
