use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BUNDLED: &[&str] = &[
    "pwl-decompose",
    "pwl-criteria",
    "net-zonotope",
    "erm2-tent",
    "erm2-optimality",
    "optim-deterministic",
    "optim-stochastic",
    "tron-suite",
    "tron-utility",
];

fn relulab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relulab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    relulab(&args)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_shows_bundled_configs() {
    let out = relulab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5);
    for name in BUNDLED {
        assert!(text.contains(name), "{name} missing from list");
    }
}

#[test]
fn every_bundled_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUNDLED {
        let out = dir.path().join(name);
        let o = run_into(name, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let r = report(&out);
        assert_eq!(r["passed"], true, "{name}");
        assert_eq!(r["schema_version"], 1);
        for task in r["results"].as_array().unwrap() {
            for csv in task["series"].as_array().unwrap() {
                assert!(out.join(csv.as_str().unwrap()).is_file(), "{name}: {csv}");
            }
        }
    }
}

#[test]
fn tent_is_fit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_into("erm2-tent", dir.path(), &[]).status.success());
    let r = report(dir.path());
    for task in r["results"].as_array().unwrap() {
        assert!(task["result"]["loss"].as_f64().unwrap() <= 1e-10);
    }
    let csv = fs::read_to_string(dir.path().join("01-predictions.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,y,prediction"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["pwl-decompose", "tron-utility", "optim-stochastic"] {
        let (a, b) = (dir.path().join(format!("{name}-a")), dir.path().join(format!("{name}-b")));
        assert!(run_into(name, &a, &[]).status.success());
        assert!(run_into(name, &b, &[]).status.success());
        let (mut ra, mut rb) = (report(&a), report(&b));
        ra.as_object_mut().unwrap().remove("timestamp");
        rb.as_object_mut().unwrap().remove("timestamp");
        assert_eq!(ra, rb, "{name}");
        for entry in fs::read_dir(&a).unwrap() {
            let file = entry.unwrap().file_name();
            if file != "report.json" {
                assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap(), "{file:?}");
            }
        }
    }
}

#[test]
fn seeds_flag_replaces_config_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into("optim-stochastic", dir.path(), &["--seeds", "7,8,9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(dir.path())["seeds"], serde_json::json!([7, 8, 9]));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // one unit cannot fit a tent
    let cfg = write_config(
        dir.path(),
        "narrow.json",
        r#"{"schema": 1, "experiment": {"subcommand": "erm2", "tasks": [
            {"task": "solve", "points": [[0.0], [1.0], [2.0]], "labels": [0.0, 1.0, 0.0],
             "width": 1, "loss": "squared", "solver": "general", "max_loss": 1e-10}]}}"#,
    );
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed.json", "{ \"schema\": 1, "),
        ("schema.json", r#"{"schema": 2, "experiment": {"subcommand": "net", "tasks": []}}"#),
        (
            "unknown.json",
            r#"{"schema": 1, "colour": "red", "experiment": {"subcommand": "net", "tasks": []}}"#,
        ),
        (
            "noseeds.json",
            r#"{"schema": 1, "experiment": {"subcommand": "tron", "tasks": [{"task": "glm",
              "problem": {"w_star": [1.0], "sampler": {"kind": "point_mass", "point": [1.0]},
                          "noise": {"kind": "none"}, "activation": {"kind": "relu"}},
              "samples": 4, "eps": 0.1}]}}"#,
        ),
        (
            "library.json",
            r#"{"schema": 1, "experiment": {"subcommand": "pwl", "tasks": [{"task": "hard_counts",
              "scale": 1.0, "p_values": [1], "k_values": [0], "seed": 0}]}}"#,
        ),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, body);
        let o = run_into(&cfg, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let o = run_into("no-such-config", &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn net_loads_from_file() {
    let dir = tempfile::tempdir().unwrap();
    // relu(x) − 2relu(x − 1): a tent on [0, 2] continued with slope −1
    let net = r#"{"layers": [{"W": [[1.0], [1.0]], "b": [0.0, -1.0]}],
                  "output": {"W": [[1.0, -2.0]], "b": [0.0]}}"#;
    fs::write(dir.path().join("tent.json"), net).unwrap();
    let net_path = dir.path().join("tent.json");
    let cfg = write_config(
        dir.path(),
        "eval.json",
        &format!(
            r#"{{"schema": 1, "experiment": {{"subcommand": "net", "tasks": [
                {{"task": "evaluate", "net": {:?}, "inputs": [[-1.0], [0.5], [1.0], [3.0]],
                  "expected": [[0.0], [0.5], [1.0], [-1.0]]}}]}}}}"#,
            net_path.to_str().unwrap()
        ),
    );
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["results"][0]["result"]["pieces"], 3);
    let csv = fs::read_to_string(out.join("01-outputs.csv")).unwrap();
    assert_eq!(csv, "x1,y1\n-1,0\n0.5,0.5\n1,1\n3,-1\n");
}
