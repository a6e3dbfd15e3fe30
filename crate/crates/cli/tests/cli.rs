use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridsim"))
}

fn cases() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn case(name: &str) -> String {
    cases().join(format!("{name}.model")).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hybridsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["simulate", &case("case0"), "--horizon", "100", "--seed", "42", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["firings.csv", "samples.csv"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert_eq!(x, y, "{f}");
    }
    let firings = fs::read_to_string(a.join("firings.csv")).unwrap();
    let mut lines = firings.lines();
    assert_eq!(lines.next(), Some("run,time,instance,automaton,transition,from,to"));
    assert!(lines.next().unwrap().starts_with("0,17.91759"));
}

#[test]
fn missing_model_is_an_input_error() {
    let o = run(&["simulate", "no/such/file.model"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/file.model"), "{}", stderr(&o));
}

#[test]
fn parse_errors_are_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.model");
    fs::write(&path, "system {\n  instance h: Heater(\n}\n").unwrap();
    let o = run(&["simulate", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.model:"), "{}", stderr(&o));
}

#[test]
fn engine_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        &case("case0"),
        "--set",
        "heater.lambda=-1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn horizon_zero_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", &case("case0"), "--horizon", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let samples = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2);
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(run(&["simulate", &case("case0"), "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn experiment_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    for n in ["a", "b"] {
        let o = run(&[
            "experiment",
            &case("case0"),
            "--runs",
            "4",
            "--horizon",
            "500",
            "--step",
            "0.5",
            "--observe",
            "nok=active(heater.Function.NOK)",
            "--out",
            &out(n),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("nok:"));
    }
    for f in ["results.csv", "clusters.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let results = fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    assert!(results.starts_with("statistic,instance,key,mean,stderr,runs\n"));
    assert!(results.contains("observed,,nok,"));
    let clusters = fs::read_to_string(dir.path().join("a/clusters.csv")).unwrap();
    assert!(clusters.starts_with("signature,count\n"));
}

#[test]
fn single_run_experiment_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "experiment",
        &case("case0"),
        "--runs",
        "1",
        "--horizon",
        "100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.ends_with(",0.000000000,1")), "{results}");
}

#[test]
fn observables_must_parse() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["experiment", &case("case0"), "--observe", "x=(", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_row() {
    let o = run(&["metrics", &case("case0"), "--profile", "model-dsl", "--units"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let mut lines = s.lines();
    assert!(lines.next().unwrap().starts_with("file,code,comment,blank,"));
    assert!(lines.next().unwrap().contains("case0.model,7,1,1,"), "{s}");
    assert!(s.contains("file,unit,loc,cc"));
}

#[test]
fn diff_reports_rloc() {
    let o = run(&["diff", &case("case0"), &case("case1"), "--profile", "model-dsl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().next(), Some("same,modified,added,removed,loc_target,rloc_percent"));
    let row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    assert_eq!(row[4], "13");
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--cases", cases().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["loc_by_file.csv", "loc_total.csv", "rloc.csv", "cc.csv", "halstead.csv", "mi.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let rloc = fs::read_to_string(dir.path().join("rloc.csv")).unwrap();
    assert_eq!(rloc.lines().count(), 5);
}

#[test]
fn report_without_cases_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--cases", dir.path().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("case0.model"), "{}", stderr(&o));
}

#[test]
fn profiles_resolve_from_search_path() {
    assert_eq!(run(&["metrics", &case("case0"), "--profile", "nope"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let text = hybridsim::metrics::profile::MODEL_DSL.replace("name = model-dsl", "name = custom");
    fs::write(dir.path().join("custom.profile"), text).unwrap();
    let o = bin()
        .args(["metrics", &case("case0"), "--profile", "custom"])
        .env("HYBRIDSIM_PROFILE_PATH", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}
