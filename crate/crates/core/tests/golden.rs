//! Byte-for-byte comparison of canonical reports against checked-in fixtures.
//!
//! Set `TWOLD_BLESS=1` to rewrite the expected files after an intended change.

use std::fs;
use std::path::PathBuf;

use twisted_wold::io::TupleFile;
use twisted_wold::report::{run_decompose, run_verify, run_wold, DecomposeRun, Format, VerifyOptions, WoldRun};
use twisted_wold::ToleranceProfile;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn check(expected: &str, actual: String) {
    let path = data(expected);
    if std::env::var_os("TWOLD_BLESS").is_some() {
        fs::write(&path, &actual).unwrap();
        return;
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if want != actual {
        let line = want.lines().zip(actual.lines()).position(|(a, b)| a != b).map_or(0, |k| k + 1);
        panic!("{expected} differs near line {line}:\n--- actual ---\n{actual}");
    }
}

fn load(name: &str) -> (TupleFile, Vec<u8>) {
    TupleFile::read(&data(name)).unwrap()
}

#[test]
fn planted_triple_decomposition_json() {
    let (file, bytes) = load("planted_n3_s7.json");
    let r = run_decompose(&file, &bytes, &DecomposeRun::default()).unwrap();
    check("planted_n3_s7.decompose.json", r.render(Format::Json));
}

#[test]
fn planted_triple_decomposition_text() {
    let (file, bytes) = load("planted_n3_s7.json");
    let r = run_decompose(&file, &bytes, &DecomposeRun::default()).unwrap();
    check("planted_n3_s7.decompose.txt", r.render(Format::Text));
}

#[test]
fn planted_triple_matches_its_truth_file() {
    let (file, bytes) = load("planted_n3_s7.json");
    let r = run_decompose(&file, &bytes, &DecomposeRun::default()).unwrap();
    let truth: serde_json::Value = serde_json::from_str(&fs::read_to_string(data("planted_n3_s7.json.truth.json")).unwrap()).unwrap();
    let slices = truth["slices"].as_array().unwrap();
    assert_eq!(slices.len(), r.slices.len());
    for (want, got) in slices.iter().zip(&r.slices) {
        assert_eq!(want["label"].as_str().unwrap(), got.label.to_string());
        assert_eq!(want["dim"].as_u64().unwrap() as usize, got.dim);
    }
}

#[test]
fn hardy_du_verify_text() {
    let (file, bytes) = load("hardy_du.json");
    let opts = VerifyOptions {
        tol: ToleranceProfile::default(),
        window: 8,
        canonical: true,
    };
    let r = run_verify(&file, &bytes, &opts).unwrap();
    assert!(r.pass);
    check("hardy_du.verify.txt", r.render(Format::Text));
}

#[test]
fn hardy_du_wold_json() {
    let (file, bytes) = load("hardy_du.json");
    let run = WoldRun {
        window: 5,
        step_cap: None,
        oracle: true,
        margin: 2,
        tol: ToleranceProfile::default(),
        canonical: true,
    };
    let r = run_wold(&file, &bytes, &run).unwrap();
    check("hardy_du.wold.json", r.render(Format::Json));
}
