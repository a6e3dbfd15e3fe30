//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybridsim::cases::{self, CaseId, RateProfile, RoomConstants};
use hybridsim::dsl::parse_expr;
use hybridsim::engine::{run_replication, write_firings_csv, write_samples_csv, EngineConfig};
use hybridsim::kernel::SystemModel;
use hybridsim::metrics::{self, DiffCounts, LanguageProfile};
use hybridsim::montecarlo::{aggregate, run_experiment, ExperimentSpec};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn no_failures(case: CaseId) -> SystemModel {
    cases::build(case, &RateProfile::Uniform { lambda: 0.0, mu: 0.1 }).unwrap()
}

fn thermostat_cycle() -> Check {
    let start = Instant::now();
    let m = no_failures(CaseId::Case0);
    let trace = run_replication(&m, &EngineConfig::default(), 0).map_err(|e| e.to_string())?;
    let room = RoomConstants::default();
    let on_off = room.time_to_reach(1, 17.0, 22.0).unwrap();
    let off_on = on_off + room.time_to_reach(0, 22.0, 15.0).unwrap();
    let label = |k: usize| trace.firings[k].label(&m).transition.to_string();
    ensure(trace.firings.len() >= 2, "fewer than two firings")?;
    ensure(label(0) == "ON_to_OFF" && label(1) == "OFF_to_ON", "unexpected firing order")?;
    let (t0, t1) = (trace.firings[0].time, trace.firings[1].time);
    ensure((t0 - on_off).abs() < 1e-6, format!("first ON->OFF at {t0}, expected {on_off}"))?;
    ensure((t1 - off_on).abs() < 1e-6, format!("first OFF->ON at {t1}, expected {off_on}"))?;
    for s in trace.samples.iter().filter(|s| s.time >= t0) {
        ensure(
            (15.0 - 1e-6..=22.0 + 1e-6).contains(&s.values[0]),
            format!("T({}) = {}", s.time, s.values[0]),
        )?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("ON->OFF {t0:.7}, OFF->ON {t1:.7}, {elapsed:.2?}"))
}

/// Long-horizon statistics: a coarse step is exact enough for time fractions.
fn long_run() -> EngineConfig {
    EngineConfig::default().with_horizon(1e4).with_step(0.5).with_sample_step(None).with_seed(2024)
}

fn availability() -> Check {
    let start = Instant::now();
    let m = cases::build(CaseId::Case0, &RateProfile::Text).unwrap();
    let spec = ExperimentSpec::new(1000, long_run())
        .observe("nok", parse_expr("active(heater.Function.NOK)").unwrap());
    let r = run_experiment(&m, &spec).map_err(|e| e.to_string())?;
    let nok = r.observed("nok").unwrap();
    let target = cases::steady_state_unavailability(0.01, 0.1);
    let elapsed = start.elapsed();
    ensure(nok.covers(target, 3.0), format!("NOK {:.6} ± {:.6}, target {target:.6}", nok.mean, nok.stderr))?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("NOK {:.6} ± {:.6} vs {target:.6}, {elapsed:.2?}", nok.mean, nok.stderr))
}

fn standby_redundancy() -> Check {
    let zero_ok = "not (active(h0.Function.OK) or active(h1.Function.OK) or active(h2.Function.OK) or active(h3.Function.OK))";
    let mut notes = Vec::new();
    for case in [CaseId::Case2, CaseId::Case2a] {
        let m = cases::build(case, &RateProfile::Figure).unwrap();
        let config = long_run();
        let on: Vec<usize> = ["h0", "h1", "h2", "h3"]
            .iter()
            .map(|h| {
                let i = m.instance_index(h).unwrap();
                m.automaton_flat_index(i, m.instances[i].automaton_index("Power").unwrap())
            })
            .collect();
        let power = &m.instances[0].automata[1];
        let on_state = power.states.iter().position(|s| s == "ON").unwrap();
        for run in 0..100 {
            let trace = run_replication(&m, &config, run).map_err(|e| e.to_string())?;
            for (t, active) in trace.settled_states(&m) {
                let n = on.iter().filter(|&&a| active[a] == on_state).count();
                ensure(n <= 1, format!("{case} run {run}: {n} heaters ON at t={t}"))?;
            }
        }
        let spec = ExperimentSpec::new(100, config).observe("zero_ok", parse_expr(zero_ok).unwrap());
        let r = run_experiment(&m, &spec).map_err(|e| e.to_string())?;
        let z = r.observed("zero_ok").unwrap();
        ensure(
            z.covers(1.0 / 12.0, 3.0),
            format!("{case}: zero-OK {:.5} ± {:.5}, target 0.08333", z.mean, z.stderr),
        )?;
        notes.push(format!("{case} zero-OK {:.5} ± {:.5}", z.mean, z.stderr));
    }
    Ok(notes.join("; "))
}

fn design_equivalence() -> Check {
    let config = EngineConfig::default().with_horizon(1000.0);
    for case in [CaseId::Case0, CaseId::Case1, CaseId::Case2] {
        let (a, b) = (no_failures(case), no_failures(case.counterpart()));
        let ta = run_replication(&a, &config, 0).map_err(|e| e.to_string())?;
        let tb = run_replication(&b, &config, 0).map_err(|e| e.to_string())?;
        ensure(ta.firings.len() == tb.firings.len(), format!("{case}: firing counts differ"))?;
        for (x, y) in ta.firings.iter().zip(&tb.firings) {
            let (lx, ly) = (x.label(&a), y.label(&b));
            ensure(
                (lx.instance, lx.automaton, lx.transition) == (ly.instance, ly.automaton, ly.transition),
                format!("{case}: {lx:?} vs {ly:?}"),
            )?;
            ensure((x.time - y.time).abs() < 1e-6, format!("{case}: {} vs {}", x.time, y.time))?;
        }
        ensure(ta.samples.len() == tb.samples.len(), format!("{case}: sample counts differ"))?;
        for (x, y) in ta.samples.iter().zip(&tb.samples) {
            ensure(
                (x.values[0] - y.values[0]).abs() < 1e-6,
                format!("{case}: T({}) {} vs {}", x.time, x.values[0], y.values[0]),
            )?;
        }
    }
    Ok("cases 0/0a, 1/1a, 2/2a trace-equivalent".into())
}

fn metric_oracles() -> Check {
    let p = LanguageProfile::model_dsl();
    let h = metrics::halstead("a = b + b * 2", &p).map_err(|e| e.to_string())?;
    ensure((h.eta1, h.eta2, h.n1, h.n2) == (3, 3, 3, 4), format!("{h:?}"))?;
    ensure((h.volume - 7.0 * 6f64.log2()).abs() < 1e-9, format!("V = {}", h.volume))?;
    let (mi, _) = metrics::maintainability_index(100.0, 5.0, 50);
    ensure((mi - 82.528).abs() < 1e-3, format!("MI = {mi}"))?;
    let r = metrics::rloc(&DiffCounts { same: 0, modified: 2, added: 3, removed: 1 }, 20).map_err(|e| e.to_string())?;
    ensure(format!("{r:.2}") == "30.00", format!("RLOC = {r}"))?;
    let cc = metrics::cyclomatic("component A() { var x: real = 1; }", &p);
    ensure(cc.units[0].1 == 1, format!("CC = {}", cc.units[0].1))?;
    Ok(format!("V = {:.6}, MI = {mi:.4}, RLOC = {r:.2}%, CC = 1", h.volume))
}

fn cases_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn design_ordering() -> Check {
    let sets = metrics::load_case_sets(&cases_dir()).map_err(|e| e.to_string())?;
    let r = metrics::report_experiment(&sets, &LanguageProfile::model_dsl()).map_err(|e| e.to_string())?;
    let rl = |a, b| r.pair(a, b).unwrap().rloc;
    let loc = |c| r.case(c).unwrap().lines.code;
    ensure(rl("case0a", "case1a") < rl("case0", "case1"), "RLOC(0a->1a) >= RLOC(0->1)")?;
    ensure(rl("case1a", "case2a") < rl("case1", "case2"), "RLOC(1a->2a) >= RLOC(1->2)")?;
    ensure(loc("case0a") > loc("case0"), "LOC(0a) <= LOC(0)")?;
    Ok(format!(
        "RLOC 0->1 {:.2}% vs 0a->1a {:.2}%, 1->2 {:.2}% vs 1a->2a {:.2}%, LOC 0 {} vs 0a {}",
        rl("case0", "case1"),
        rl("case0a", "case1a"),
        rl("case1", "case2"),
        rl("case1a", "case2a"),
        loc("case0"),
        loc("case0a")
    ))
}

fn random_lines(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("x{} = {};", rng.random_range(0..6), rng.random_range(0..4))).collect()
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            dp[i][j] = if a[i] == b[j] { dp[i + 1][j + 1] + 1 } else { dp[i + 1][j].max(dp[i][j + 1]) };
        }
    }
    dp[0][0]
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Diff accounting on random edit pairs.
    for k in 0..1000 {
        let n = rng.random_range(0..40);
        let old = random_lines(&mut rng, n);
        let mut new = old.clone();
        for _ in 0..rng.random_range(0..10) {
            let at = rng.random_range(0..=new.len());
            match rng.random_range(0..3) {
                0 => new.insert(at, random_lines(&mut rng, 1).remove(0)),
                1 if at < new.len() => {
                    new.remove(at);
                }
                _ if at < new.len() => new[at] = random_lines(&mut rng, 1).remove(0),
                _ => {}
            }
        }
        let d = metrics::diff_lines(&old, &new);
        ensure(d.same + d.modified + d.removed == old.len(), format!("pair {k}: old identity {d:?}"))?;
        ensure(d.same + d.modified + d.added == new.len(), format!("pair {k}: new identity {d:?}"))?;
        ensure(d.same == lcs(&old, &new), format!("pair {k}: script is not shortest"))?;
    }

    // Comment and blank-line insertion.
    let p = LanguageProfile::model_dsl();
    let sources: Vec<&str> = cases::SOURCES.iter().map(|(_, t)| *t).collect();
    for k in 0..100 {
        let text = sources[k % sources.len()];
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        for _ in 0..rng.random_range(1..6) {
            let at = rng.random_range(0..=lines.len());
            match rng.random_range(0..3) {
                0 => lines.insert(at, String::new()),
                1 => lines.insert(at, format!("  # note {k} and or when")),
                _ if at < lines.len() && !lines[at].trim().is_empty() && !lines[at].contains('#') => {
                    lines[at].push_str(" # trailing when");
                }
                _ => {}
            }
        }
        let mutated = lines.join("\n");
        let (a, b) = (metrics::measure(text, &p), metrics::measure(&mutated, &p));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure(a.halstead == b.halstead, format!("file {k}: Halstead changed"))?;
        ensure(a.cc == b.cc, format!("file {k}: CC changed"))?;
        ensure(a.lines.code == b.lines.code && a.mi_raw == b.mi_raw, format!("file {k}: MI changed"))?;
    }

    // Seed determinism: byte-identical trace CSVs.
    let m = cases::build(CaseId::Case2, &RateProfile::Figure).unwrap();
    let config = EngineConfig::default().with_horizon(500.0).with_step(0.1);
    let csv = || -> Vec<u8> {
        let t = run_replication(&m, &config, 5).unwrap();
        let mut out = Vec::new();
        write_firings_csv(&mut out, &m, 5, &t).unwrap();
        write_samples_csv(&mut out, 5, &t).unwrap();
        out
    };
    ensure(csv() == csv(), "trace CSVs differ between identical runs")?;

    // Replication-order independence.
    let m = cases::build(CaseId::Case0, &RateProfile::Text).unwrap();
    let spec = ExperimentSpec::new(16, EngineConfig::default().with_horizon(300.0).with_step(0.5).with_sample_step(Some(10.0)));
    let r = run_experiment(&m, &spec).map_err(|e| e.to_string())?;
    let mut shuffled = r.per_run.clone();
    shuffled.reverse();
    shuffled.swap(3, 11);
    ensure(aggregate(&m, &spec, shuffled) == r, "aggregation depends on completion order")?;

    Ok("1000 diff pairs, 100 mutated files, CSV determinism, order independence".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("1 deterministic thermostat cycle", thermostat_cycle),
        ("2 availability", availability),
        ("3 standby redundancy", standby_redundancy),
        ("4 design equivalence", design_equivalence),
        ("5 metric formula oracles", metric_oracles),
        ("6 design-comparison ordering", design_ordering),
        ("7 property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
