use hybridsim_web::{case_text, diff_json, measure_json, simulate_json};
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn simulates_an_embedded_case() {
    let v = json(&simulate_json(case_text("case0").unwrap(), 100.0, 42, 0.01).unwrap());
    let first = &v["firings"][0];
    assert_eq!(first["transition"], "ON_to_OFF");
    assert!((first["time"].as_f64().unwrap() - 17.9175947).abs() < 1e-6);
    assert_eq!(v["time"].as_array().unwrap().len(), v["series"][0][1].as_array().unwrap().len());
}

#[test]
fn simulation_errors_are_reported() {
    assert!(simulate_json("system {", 10.0, 1, 0.01).unwrap_err().contains("user.model"));
    assert!(simulate_json(case_text("case0").unwrap(), -1.0, 1, 0.01).is_err());
}

#[test]
fn measures_source() {
    let v = json(&measure_json(case_text("case0").unwrap()).unwrap());
    assert_eq!(v["code"], 7);
    assert!(v["mi"].as_f64().unwrap() > 0.0);
}

#[test]
fn diffs_versions() {
    let (a, b) = (case_text("case0").unwrap(), case_text("case1").unwrap());
    let v = json(&diff_json(a, b));
    assert_eq!(v["loc_target"], 13);
    assert_eq!(json(&diff_json(a, a))["rloc_percent"], 0.0);
    assert!(json(&diff_json(a, ""))["rloc_percent"].is_null());
}
