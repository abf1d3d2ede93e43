use std::path::Path;
use std::process::{Command, Output};

fn gdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdg")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn single_fault_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dem = dir.path().join("pheno.dem");
    let out = gdg(&[
        "build-model", "pheno", "--rounds", "2", "--p-d", "0.001", "--p-s", "0.001", "--out", path(&dem),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dem).unwrap();
    let errors: Vec<&str> = text.lines().filter(|l| l.starts_with("error")).collect();
    assert_eq!(errors.len(), 2 * (288 + 144));

    for column in [0, 300, 500] {
        let detectors: Vec<&str> = errors[column].split_whitespace().filter(|t| t.starts_with('D')).collect();
        let syndrome = dir.path().join(format!("s{column}.txt"));
        std::fs::write(&syndrome, detectors.join(" ")).unwrap();
        let report = json(&gdg(&[
            "decode", "--model", path(&dem), "--syndrome", path(&syndrome), "--window", "2,1",
        ]));
        assert_eq!(report["syndrome_ok"], true);
        assert_eq!(report["faults"], serde_json::json!([column]), "column {column}");
    }
}

#[test]
fn dem_import_reproduces_export() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.dem");
    let second = dir.path().join("b.dem");
    assert!(gdg(&["build-model", "single-shot", "--p-d", "0.03", "--p-s", "0.01", "--out", path(&first)])
        .status
        .success());
    assert!(gdg(&["build-model", "dem", "--input", path(&first), "--out", path(&second)])
        .status
        .success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn analyze_counts_report() {
    let report = json(&gdg(&["analyze", "counts"]));
    assert_eq!(report["weight2_syndrome_configs"], 864);
    assert_eq!(report["config_b_coefficient"], 2592);
    assert_eq!(report["weight2_syndrome_codewords"], 216);
}

#[test]
fn simulate_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sweep");
    let out = gdg(&[
        "simulate", "--noise", "data", "--p-d", "0.01,0.02", "--trials", "20", "--out", path(&stem),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.dem");
    assert_eq!(gdg(&["simulate", "--window", "3,3", "--trials", "1"]).status.code(), Some(2));
    assert_eq!(gdg(&["simulate", "--noise", "dem", "--trials", "1"]).status.code(), Some(2));
    assert_eq!(gdg(&["simulate", "--p-d", "1.5", "--trials", "1"]).status.code(), Some(2));
    assert_eq!(
        gdg(&["decode", "--model", path(&missing), "--syndrome", path(&missing)]).status.code(),
        Some(3)
    );
    let dem = dir.path().join("m.dem");
    assert!(gdg(&["build-model", "data", "--p-d", "0.01", "--out", path(&dem)]).status.success());
    let syndrome = dir.path().join("s.txt");
    std::fs::write(&syndrome, "D9999").unwrap();
    assert_eq!(
        gdg(&["decode", "--model", path(&dem), "--syndrome", path(&syndrome)]).status.code(),
        Some(2)
    );
}
