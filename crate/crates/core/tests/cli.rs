use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

use signet::cli::{GraphSpec, PeriodicSpec, ScenarioFile, ScheduleSpec, ToleranceSpec};

const BALANCED: &str =
    r#"{"graphs": [{"n": 2, "edges": [[1, 2, -1.0], [2, 1, -1.0]]}], "horizon": 20, "x0": [1, 0], "sample_dt": 0.5}"#;
const CONFLICT: &str =
    r#"{"graphs": [{"n": 2, "edges": [[1, 2, 1.0], [2, 1, -1.0]]}], "horizon": 40, "x0": [1, 0], "sample_dt": 1}"#;
const DISCONNECTED: &str = r#"{"graphs": [{"n": 3, "edges": [[1, 2, 1.0]]}], "horizon": 40}"#;
const POSITIVE: &str = r#"{"graphs": [{"n": 3, "edges": [[1, 2, 1.0], [2, 3, 0.5], [3, 1, 2.0]]}, {"n": 3, "edges": [[2, 1, 1.0]]}],
  "schedule": {"periodic": {"pattern": [[0.5, 1], [0.7, 2]], "repeats": 5}}, "tau_min": 0.5, "horizon": 6}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn signet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signet")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,x1"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    v.as_array().unwrap().iter().map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()).collect()
}

#[test]
fn simulate_balanced_reaches_polarized_state() {
    let sb = Sandbox::new();
    let (sc, out) = (sb.file("s.json", BALANCED), sb.path("x.csv"));
    let o = signet(&["simulate", "--scenario", p(&sc), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("final state") && summary.contains("holds"));
    let rows = csv_rows(&out);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 20.0);
    assert!((last[1] - 0.5).abs() < 1e-12 && (last[2] + 0.5).abs() < 1e-12, "{last:?}");
}

#[test]
fn simulate_zero_state_stays_zero() {
    let sb = Sandbox::new();
    let sc = sb.file("s.json", &BALANCED.replace("[1, 0]", "[0, 0]"));
    let out = sb.path("x.csv");
    assert_eq!(signet(&["simulate", "--scenario", p(&sc), "--out", p(&out), "--quiet"]).status.code(), Some(0));
    assert!(csv_rows(&out).iter().all(|r| r[1..].iter().all(|&v| v == 0.0)));
}

#[test]
fn simulate_conflict_decays() {
    let sb = Sandbox::new();
    let sc = sb.file("s.json", CONFLICT);
    let o = signet(&["simulate", "--scenario", p(&sc)]);
    assert_eq!(o.status.code(), Some(0));
    // payload on stdout, summary on stderr
    let text = String::from_utf8(o.stdout).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[1].abs() < 1e-15 && last[2].abs() < 1e-15, "{last:?}");
    assert!(String::from_utf8(o.stderr).unwrap().contains("final state"));
}

#[test]
fn classify_verdicts() {
    let sb = Sandbox::new();
    let out = sb.path("r.json");

    let sc = sb.file("b.json", BALANCED);
    let o = signet(&["classify", "--scenario", p(&sc), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("verdict: BipartiteConsensus"));
    assert!(stdout.contains("graph-side: BipartiteConsensus  numeric: BipartiteConsensus"));
    let r = json(&out);
    assert_eq!(r["verdict"], "BipartiteConsensus");
    assert_eq!(r["D"], serde_json::json!([1, -1]));
    assert!((r["nu"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((r["c"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((r["rate"]["rate"].as_f64().unwrap() - 2.0).abs() < 1e-3);

    let sc = sb.file("u.json", CONFLICT);
    assert_eq!(signet(&["classify", "--scenario", p(&sc), "--out", p(&out)]).status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"], "Stable");
    assert!((r["rate"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-2);

    let sc = sb.file("d.json", DISCONNECTED);
    assert_eq!(signet(&["classify", "--scenario", p(&sc), "--out", p(&out)]).status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"], "Undetermined");
    assert_eq!(r["reason"], "union not strongly connected");
}

#[test]
fn analyze_bundles() {
    let sb = Sandbox::new();
    let out = sb.path("a.json");

    let sc = sb.file("b.json", BALANCED);
    assert_eq!(signet(&["analyze", "--scenario", p(&sc), "--t", "0", "--out", p(&out)]).status.code(), Some(0));
    let b = json(&out);
    assert_eq!(matrix(&b["phi_even"]), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(matrix(&b["phi_odd"]), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);

    assert_eq!(signet(&["analyze", "--scenario", p(&sc), "--t", "3.5", "--out", p(&out)]).status.code(), Some(0));
    let b = json(&out);
    for key in ["decomposition", "sum", "bound", "norm", "block_symmetry"] {
        assert!(b["residuals"][key].as_f64().unwrap() < 1e-8, "{key}");
    }
    assert_eq!(matrix(&b["psi"]).len(), 4);

    let sc = sb.file("p.json", POSITIVE);
    assert_eq!(signet(&["analyze", "--scenario", p(&sc), "--t", "4.2", "--out", p(&out)]).status.code(), Some(0));
    let b = json(&out);
    assert!(matrix(&b["phi_odd"]).iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn numbers_carry_seventeen_digits() {
    let sb = Sandbox::new();
    let (sc, out) = (sb.file("b.json", BALANCED), sb.path("a.json"));
    assert_eq!(signet(&["analyze", "--scenario", p(&sc), "--t", "0.3", "--out", p(&out)]).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let phi = text.split("\"phi\"").nth(1).unwrap();
    let first = phi
        .split(|c: char| c == '[' || c == ',' || c == ':' || c.is_whitespace())
        .find(|s| s.parse::<f64>().is_ok())
        .unwrap();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17, "{first}");
}

#[test]
fn verify_exit_codes() {
    let sb = Sandbox::new();
    let out = sb.path("v.jsonl");
    let small = r#"{"sets": [{"template": {"horizon": 60}, "first_seed": 3, "count": 2}],
                    "checks": ["eq23-decomposition", "eq27-bound", "thm6-stability"]}"#;
    let suite = sb.file("suite.json", small);
    let o = signet(&["verify", "--suite", p(&suite), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> =
        std::fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[6]["summary"]["total"], 6);

    let forced = small.replace("\"checks\"", "\"tolerances\": {\"eq23-decomposition\": 0.0}, \"checks\"");
    let suite = sb.file("forced.json", &forced);
    assert_eq!(signet(&["verify", "--suite", p(&suite), "--out", p(&out), "--quiet"]).status.code(), Some(1));
    let failed: Vec<Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["status"] == "fail")
        .collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|v| v["check"] == "eq23-decomposition"));

    let empty = sb.file("empty.json", r#"{"sets": []}"#);
    assert_eq!(signet(&["verify", "--suite", p(&empty), "--out", p(&out)]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1);

    let unknown = sb.file("unknown.json", r#"{"sets": [], "checks": ["no-such-check"]}"#);
    assert_eq!(signet(&["verify", "--suite", p(&unknown)]).status.code(), Some(2));
}

#[test]
fn usage_parse_and_io_exit_codes() {
    let sb = Sandbox::new();
    let cases: Vec<(&str, &str)> = vec![
        ("malformed.json", r#"{"graphs": [{"n": 2}], "horizon": "#),
        ("unknown.json", r#"{"graphs": [{"n": 2}], "horizon": 5, "colour": 1}"#),
        (
            "dwell.json",
            r#"{"graphs": [{"n": 2}], "schedule": {"explicit": [[0, 1], [0.5, 1]]}, "tau_min": 1, "horizon": 3}"#,
        ),
        ("x0.json", r#"{"graphs": [{"n": 2}], "horizon": 3, "x0": [1]}"#),
        ("label.json", r#"{"graphs": [{"n": 2}], "schedule": {"explicit": [[0, 2]]}, "horizon": 3}"#),
    ];
    for (name, body) in cases {
        let sc = sb.file(name, body);
        let o = signet(&["simulate", "--scenario", p(&sc)]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!o.stderr.is_empty());
    }
    let dwell = signet(&["simulate", "--scenario", p(&sb.path("dwell.json"))]);
    assert!(String::from_utf8(dwell.stderr).unwrap().contains("interval 0"));
    let unknown = signet(&["simulate", "--scenario", p(&sb.path("unknown.json"))]);
    assert!(String::from_utf8(unknown.stderr).unwrap().contains("colour"));

    let sc = sb.file("b.json", BALANCED);
    assert_eq!(signet(&["analyze", "--scenario", p(&sc), "--t", "99"]).status.code(), Some(2));
    assert_eq!(signet(&["simulate"]).status.code(), Some(2));
    assert_eq!(signet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(signet(&["--help"]).status.code(), Some(0));

    assert_eq!(signet(&["simulate", "--scenario", p(&sb.path("missing.json"))]).status.code(), Some(3));
    let bad_out = sb.path("no/such/dir/x.csv");
    assert_eq!(signet(&["simulate", "--scenario", p(&sc), "--out", p(&bad_out)]).status.code(), Some(3));
}

fn scenario_file() -> impl Strategy<Value = ScenarioFile> {
    let schedule = prop_oneof![
        Just(None),
        prop::collection::vec((0.1f64..2.0, 1usize..3), 1..4)
            .prop_map(|p| Some(ScheduleSpec::Periodic(PeriodicSpec { pattern: p, repeats: 3 }))),
        prop::collection::vec(0.1f64..2.0, 1..4).prop_map(|gaps| {
            let mut t = 0.0;
            let entries = gaps
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let e = (t, k % 2 + 1);
                    t += g;
                    e
                })
                .collect();
            Some(ScheduleSpec::Explicit(entries))
        }),
    ];
    let edges = prop::collection::vec((1usize..4, 1usize..4, -3.0f64..3.0), 0..6);
    (
        prop::collection::vec(edges, 2),
        schedule,
        prop::option::of(prop::collection::vec(-1.0f64..1.0, 3)),
        prop::option::of(0.01f64..1.0),
        prop::option::of((1e-9f64..1e-3, 1e-9f64..1e-3)),
    )
        .prop_map(|(edges, schedule, x0, sample_dt, tol)| ScenarioFile {
            graphs: edges.into_iter().map(|e| GraphSpec { n: 3, edges: e }).collect(),
            schedule,
            tau_min: Some(0.1),
            t0: Some(0.0),
            horizon: 30.0,
            x0,
            sample_dt,
            tolerances: tol.map(|(limit, zero)| ToleranceSpec { limit, zero }),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_files_round_trip(file in scenario_file()) {
        let again = ScenarioFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(&again, &file);
        // when the file is valid, resolving is idempotent and loads the same objects
        if let Ok(loaded) = file.load() {
            let reparsed = ScenarioFile::from_json(&loaded.resolved.to_json_compact()).unwrap();
            prop_assert_eq!(&reparsed, &loaded.resolved);
            prop_assert_eq!(reparsed.load().unwrap(), loaded);
        }
    }
}
