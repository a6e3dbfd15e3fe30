use hybridsim::cases::{self, CaseId, RateProfile};
use hybridsim::engine::{run_replication, ClockPolicy, EngineConfig};
use hybridsim::montecarlo::{run_experiment, ExperimentSpec};

fn quick(horizon: f64) -> EngineConfig {
    EngineConfig::default().with_horizon(horizon).with_step(0.5).with_sample_step(None).with_seed(7)
}

// Asymptotic Kolmogorov distribution tail with the Stephens correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let l = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * l * l).exp()).sum();
    p.clamp(0.0, 1.0)
}

fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    ks_p_value(d, xs.len())
}

#[test]
fn first_failure_is_exponential_under_both_clock_policies() {
    let lambda = 0.01;
    let model = cases::build(CaseId::Case0, &RateProfile::Uniform { lambda, mu: 0.0 }).unwrap();
    for policy in [ClockPolicy::OnEntry, ClockPolicy::ResampleEveryEvent] {
        let config = EngineConfig { clock_policy: policy, ..quick(3000.0) };
        let times: Vec<f64> = (0..500)
            .map(|r| {
                let trace = run_replication(&model, &config, r).unwrap();
                trace
                    .firings
                    .iter()
                    .find(|f| f.label(&model).transition == "OK_to_NOK")
                    .expect("failure before the horizon")
                    .time
            })
            .collect();
        let p = ks_exponential(times, lambda);
        assert!(p > 0.01, "{policy:?}: p = {p}");
    }
}

#[test]
fn ks_rejects_the_wrong_rate() {
    let xs: Vec<f64> = (1..=500).map(|k| -(1.0 - k as f64 / 501.0).ln() / 0.01).collect();
    assert!(ks_exponential(xs.clone(), 0.01) > 0.5);
    assert!(ks_exponential(xs, 0.015) < 0.01);
}

#[test]
fn standard_error_shrinks_as_root_r() {
    let model = cases::build(CaseId::Case0, &RateProfile::Text).unwrap();
    let se: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&r| {
            let res = run_experiment(&model, &ExperimentSpec::new(r, quick(2000.0))).unwrap();
            res.state_fraction("heater", "Function", "NOK").unwrap().stderr
        })
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "SE ratio {ratio} from {se:?}");
    }
}

#[test]
fn end_state_clusters_follow_stationary_law() {
    let model = cases::build(CaseId::Case0, &RateProfile::Text).unwrap();
    let mut spec = ExperimentSpec::new(1000, quick(500.0));
    spec.cluster_projection = Some(vec!["heater.Function".into()]);
    let res = run_experiment(&model, &spec).unwrap();
    assert_eq!(res.clusters.len(), 2);
    assert_eq!(res.clusters.iter().map(|c| c.count).sum::<usize>(), 1000);
    let nok = res.clusters.iter().find(|c| c.signature == ["heater.Function.NOK"]).unwrap();
    let p = nok.count as f64 / 1000.0;
    let target: f64 = 0.01 / 0.11;
    let se = (target * (1.0 - target) / 1000.0).sqrt();
    assert!((p - target).abs() < 3.0 * se, "NOK end-state share {p} vs {target}");
    assert_eq!(res.clusters[0].signature, ["heater.Function.OK"]);
}
