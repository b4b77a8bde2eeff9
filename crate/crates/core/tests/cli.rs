//! End-to-end runs of the `twold` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use twisted_wold::io::TupleFile;
use twisted_wold::report::{run_decompose, DecomposeRun, Format};

fn twold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twold"))
        .args(args)
        .env_remove("TWOLD_RESIDUAL_TOL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn zoo(dir: &TempDir, file: &str, args: &[&str]) -> PathBuf {
    let out = dir.path().join(file);
    let mut all = vec!["zoo"];
    all.extend_from_slice(args);
    all.extend(["--out", out.to_str().unwrap()]);
    let o = twold(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_passes_and_fails_with_the_right_codes() {
    let dir = TempDir::new().unwrap();
    let du = zoo(&dir, "du.json", &["hardy-du", "--theta", "0.4pi"]);
    let o = twold(&["verify", s(&du)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));

    let br = zoo(&dir, "br.json", &["counterexample-br", "--theta", "0.4pi"]);
    let o = twold(&["verify", s(&br)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("adjoint relation (1, 2)"), "{}", stderr(&o));
}

#[test]
fn unreadable_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format_version\": 1,\n").unwrap();
    let o = twold(&["verify", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = twold(&["decompose", s(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = twold(&["wold"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wold_on_commuting_shifts_is_all_pure() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "shifts.json", &["shifts", "--d-plus", "2"]);
    let o = twold(&["wold", s(&f), "--window", "6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("window     6 (36 indices)"));
    assert!(text.contains("{1,2}        36"), "{text}");
    assert!(text.contains("undecided  0"));
}

#[test]
fn wold_oracle_agrees_on_the_phase_pair() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "du.json", &["hardy-du", "--theta", "0.4pi"]);
    let o = twold(&["wold", s(&f), "--window", "6", "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(100.0%)"), "{}", stdout(&o));
}

#[test]
fn wold_reports_bilateral_unitary_direction() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "bi.json", &["hardy-du", "--bilateral"]);
    let o = twold(&["wold", s(&f), "--window", "6", "--format", "json", "--canonical"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["unitary_directions"], serde_json::json!([3]));
    assert!(v.get("generated_at_unix").is_none());
}

#[test]
fn wold_rejects_non_isometric_tuples() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "ar.json", &["hardy-ar", "--theta", "0.3pi", "--alpha", "0.5"]);
    let o = twold(&["wold", s(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not isometric"));
}

#[test]
fn clock_shift_lands_in_the_top_slice() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "cs.json", &["clock-shift", "--dim", "3"]);
    let o = twold(&["decompose", s(&f), "--format", "text"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("{1,2}        dim    3"), "{text}");
    assert!(text.contains("dims       3 of 3"));
}

#[test]
fn planted_sidecar_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "p.json", &["planted", "--n", "3", "--seed", "11", "--dim", "2"]);
    let truth = dir.path().join("p.json.truth.json");
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(truth).unwrap()).unwrap();
    assert_eq!(t["seed"], 11);
    assert_eq!(t["slices"].as_array().unwrap().len(), 8);

    let out = dir.path().join("report.json");
    let o = twold(&["decompose", s(&f), "--canonical", "--threads", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_cli = std::fs::read_to_string(out).unwrap();

    let (file, bytes) = TupleFile::read(&f).unwrap();
    let in_process = run_decompose(&file, &bytes, &DecomposeRun::default()).unwrap().render(Format::Json);
    assert_eq!(from_cli, in_process);
}

#[test]
fn residual_tolerance_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let f = zoo(&dir, "du.json", &["hardy-du", "--theta", "0.4pi"]);
    let run = |val: &str| {
        Command::new(env!("CARGO_BIN_EXE_twold"))
            .args(["verify", s(&f), "--format", "json", "--canonical"])
            .env("TWOLD_RESIDUAL_TOL", val)
            .output()
            .unwrap()
    };
    let o = run("1e-6");
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tolerance"]["residual_tol"], 1e-6);

    let o = run("abc");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TWOLD_RESIDUAL_TOL"));
}
