use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const THETA: &str = r#"{"vertices":["a","b"],"edges":[
  {"u":"a","v":"b","length":"1","id":"e0"},
  {"u":"a","v":"b","length":"1","id":"e1"},
  {"u":"a","v":"b","length":"1","id":"e2"}]}"#;

const THETA_112: &str = r#"{"vertices":["a","b"],"edges":[
  {"u":"a","v":"b","length":"1"},{"u":"a","v":"b","length":"1"},{"u":"a","v":"b","length":"2"}]}"#;

const CYCLE4: &str = r#"{"vertices":["a","b","c","d"],"edges":[
  {"u":"a","v":"b","length":"1"},{"u":"b","v":"c","length":"1"},
  {"u":"c","v":"d","length":"1"},{"u":"d","v":"a","length":"1"}]}"#;

const K4: &str = r#"{"vertices":["0","1","2","3"],"edges":[
  {"u":"0","v":"1","length":"1"},{"u":"0","v":"2","length":"1"},{"u":"0","v":"3","length":"1"},
  {"u":"1","v":"2","length":"1"},{"u":"1","v":"3","length":"1"},{"u":"2","v":"3","length":"1"}]}"#;

const SUBDIVIDED_THETA: &str = r#"{"vertices":["a","b","m"],"edges":[
  {"u":"a","v":"m","length":"1/2","id":"p"},{"u":"m","v":"b","length":"1/2","id":"q"},
  {"u":"a","v":"b","length":"1","id":"r"},{"u":"a","v":"b","length":"1","id":"s"}]}"#;

const SEGMENT_34: &str = r#"{"vertices":["x","y"],"edges":[{"u":"x","v":"y","length":"1","id":"e"}],
  "groups":{"vertex_orders":{"x":3,"y":4},"edge_orders":{"e":1}}}"#;

const DOUBLE_COVER: &str = r#"{
  "source":{"vertices":["a1","a2","b1","b2"],"edges":[
    {"u":"a1","v":"b1","length":"1/6","id":"f0"},{"u":"a2","v":"b2","length":"1/6","id":"f1"},
    {"u":"a1","v":"b2","length":"1/6","id":"f2"},{"u":"a2","v":"b1","length":"1/6","id":"f3"},
    {"u":"a1","v":"b1","length":"1/6","id":"f4"},{"u":"a2","v":"b2","length":"1/6","id":"f5"}]},
  "target":{"vertices":["a","b"],"edges":[
    {"u":"a","v":"b","id":"e0"},{"u":"a","v":"b","id":"e1"},{"u":"a","v":"b","id":"e2"}]},
  "vmap":{"a1":"a","a2":"a","b1":"b","b2":"b"},
  "emap":{"f0":"e0","f1":"e0","f2":"e1","f3":"e1","f4":"e2","f5":"e2"},
  "sheets":2}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: TempDir::new().unwrap() }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }
}

fn run(args: &[&str], input: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graph-entropy"));
    cmd.args(args);
    if let Some(path) = input {
        cmd.arg(path);
    }
    cmd.output().unwrap()
}

fn structured(args: &[&str], input: &Path) -> (i32, Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "structured"]);
    let out = run(&all, Some(input));
    let doc = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad output {e}: {}", String::from_utf8_lossy(&out.stdout));
    });
    (out.status.code().unwrap(), doc)
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key} in {v}"))
}

const LN2: f64 = std::f64::consts::LN_2;

#[test]
fn entropy_of_theta() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["entropy"], &ws.file("theta.json", THETA));
    assert_eq!(code, 0);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["status"], "ok");
    assert!((num(&doc, "h") - LN2).abs() < 1e-9);
    assert!(num(&doc, "residual") <= 1e-9);
}

#[test]
fn entropy_of_cycle_is_a_validation_failure() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["entropy"], &ws.file("cycle4.json", CYCLE4));
    assert_eq!(code, 1);
    assert_eq!(doc["status"], "validation_failure");
    assert!(doc["error"].as_str().unwrap().contains("cycle"));
}

#[test]
fn minimize_k4() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["minimize", "--samples", "10"], &ws.file("k4.json", K4));
    assert_eq!(code, 0);
    assert!((num(&doc, "h_min") - 6.0 * LN2).abs() < 1e-9);
    for (_, l) in doc["lengths"].as_object().unwrap() {
        assert!((l.as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }
    assert!(num(&doc["sampling"], "min_gap") >= -1e-9);
}

#[test]
fn minimized_graph_round_trips_through_entropy() {
    let ws = Workspace::new();
    let (_, doc) = structured(&["minimize", "--samples", "0"], &ws.file("theta.json", THETA_112));
    let graph = serde_json::to_string(&doc["graph"]).unwrap();
    let (code, again) = structured(&["entropy"], &ws.file("min.json", &graph));
    assert_eq!(code, 0);
    assert!((num(&again, "h") - num(&doc, "h_min")).abs() < 1e-9);
}

#[test]
fn structured_output_is_reproducible() {
    let ws = Workspace::new();
    let path = ws.file("theta.json", THETA_112);
    let a = run(&["entropy", "--format", "structured"], Some(&path));
    let b = run(&["entropy", "--format", "structured"], Some(&path));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn oracle_agrees_with_entropy_within_band() {
    let ws = Workspace::new();
    let path = ws.file("theta.json", THETA_112);
    let (_, solved) = structured(&["entropy"], &path);
    let (code, est) = structured(&["oracle", "--r-max", "40"], &path);
    assert_eq!(code, 0);
    assert!((num(&est, "h_est") - num(&solved, "h")).abs() <= num(&est, "error_band"));
}

#[test]
fn oracle_reports_insufficient_growth_as_numerical() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["oracle", "--r-max", "8"], &ws.file("theta.json", THETA));
    assert_eq!(code, 2);
    assert_eq!(doc["status"], "numerical_failure");
}

#[test]
fn dump_matrix_lists_nonzero_entries() {
    let ws = Workspace::new();
    let (_, doc) = structured(&["entropy", "--dump-matrix"], &ws.file("theta.json", THETA));
    let entries = doc["matrix"].as_array().unwrap();
    assert_eq!(entries.len(), 12);
    assert!(entries.iter().all(|e| (e["value"].as_f64().unwrap() - 0.5).abs() < 1e-9));
}

#[test]
fn reduce_and_volume() {
    let ws = Workspace::new();
    let path = ws.file("sub.json", SUBDIVIDED_THETA);
    let (code, doc) = structured(&["reduce"], &path);
    assert_eq!(code, 0);
    assert_eq!(doc["identity"], false);
    assert_eq!(doc["graph"]["vertices"].as_array().unwrap().len(), 2);
    let (_, vol) = structured(&["volume"], &path);
    assert_eq!(vol["volume"], "3");
    let reduced = serde_json::to_string(&doc["graph"]).unwrap();
    let (_, a) = structured(&["entropy"], &path);
    let (_, b) = structured(&["entropy"], &ws.file("reduced.json", &reduced));
    assert!((num(&a, "h") - num(&b, "h")).abs() < 1e-9);
}

#[test]
fn validate_reports_checks() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["validate"], &ws.file("theta.json", THETA));
    assert_eq!(code, 0);
    assert_eq!(doc["irreducible"], true);
    assert_eq!(doc["free_rank"], 2);
    let (code, _) = structured(&["validate"], &ws.file("cycle.json", CYCLE4));
    assert_eq!(code, 1);
}

#[test]
fn graph_of_groups_commands() {
    let ws = Workspace::new();
    let path = ws.file("segment.json", SEGMENT_34);
    let (code, doc) = structured(&["gog-entropy"], &path);
    assert_eq!(code, 0);
    assert!((num(&doc, "h") - 0.5 * 6f64.ln()).abs() < 1e-9);
    let (code, doc) = structured(&["gog-minimize"], &path);
    assert_eq!(code, 0);
    assert!((num(&doc, "h_min") - num(&doc, "solver_h")).abs() < 1e-9);
}

#[test]
fn cover_check_reports_equality() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["cover-check"], &ws.file("cover.json", DOUBLE_COVER));
    assert_eq!(code, 0);
    assert_eq!(doc["sheets"], 2);
    let ineq = &doc["inequality"];
    assert!((num(ineq, "lhs") - 6.0 * LN2).abs() < 1e-9);
    assert_eq!(ineq["equality"], true);
    assert!((num(ineq, "lambda") - 0.5).abs() < 1e-9);

    let bad = DOUBLE_COVER.replace(r#""sheets":2"#, r#""sheets":3"#);
    let (code, doc) = structured(&["cover-check"], &ws.file("bad.json", &bad));
    assert_eq!(code, 1);
    assert!(doc["error"].as_str().unwrap().contains("declared 3 sheets"));
}

#[test]
fn parse_errors_name_the_location() {
    let ws = Workspace::new();
    let (code, doc) = structured(&["entropy"], &ws.file("bad.json", "{\"vertices\": [\"a\"],\n \"edgez\": []}"));
    assert_eq!(code, 1);
    let msg = doc["error"].as_str().unwrap();
    assert!(msg.contains("edgez") && msg.contains("line 2"), "{msg}");
}

#[test]
fn usage_errors_exit_three() {
    let ws = Workspace::new();
    let path = ws.file("theta.json", THETA);
    assert_eq!(run(&["entropy", "--tol-root", "-1"], Some(&path)).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"], Some(&path)).status.code(), Some(3));
    assert_eq!(run(&["entropy", "/nonexistent/graph.json"], None).status.code(), Some(3));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
}

#[test]
fn human_output_is_plain_text() {
    let ws = Workspace::new();
    let out = run(&["entropy"], Some(&ws.file("theta.json", THETA)));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("h: 0.693147")), "{text}");
}
