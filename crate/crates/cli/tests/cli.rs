use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ctlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctlab")).args(args).output().expect("ctlab runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn status(report: &Value, property: &str) -> String {
    report["summary"][property]["status"].as_str().unwrap().to_string()
}

#[test]
fn classify_example55() {
    let out = ctlab(&["--preset", "example55", "classify"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    assert_eq!(r["schema_version"], "ctlab/1");
    for p in ["chaotic", "fhc", "ufhc", "vp"] {
        assert_eq!(status(&r, p), "holds", "{p}");
    }
    assert_eq!(status(&r, "mixing"), "fails");
    assert_eq!(r["summary"]["c_upper"]["detail"], "9/10");
    assert!(r["summary"]["vp"]["detail"].as_str().unwrap().contains("min C = 3"));
}

#[test]
fn classify_example59_and_c2mix() {
    let r = json_stdout(&ctlab(&["--preset", "example59", "classify"]));
    assert_eq!(status(&r, "ufhc"), "holds");
    assert_eq!(status(&r, "fhc"), "fails");
    let r = json_stdout(&ctlab(&["--preset", "c2mix", "classify"]));
    assert_eq!(status(&r, "mixing"), "holds");
    assert_eq!(status(&r, "ufhc"), "fails");
    assert_eq!(status(&r, "chaotic"), "holds");
}

#[test]
fn orbit_of_e0_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctlab(&["--preset", "example55-small", "orbit", "--horizon", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "j,in_ball,prefix_count,prefix_density,prefix_density_exact");
    assert_eq!(lines.len(), 102);
    // T e_0 = −e_0 stays in the closed unit ball: density 1 throughout.
    assert!(lines[1..].iter().all(|l| l.ends_with(",1")));
    let meta = read_json(&dir.path().join("orbit.json"));
    assert_eq!(meta["density"]["period"], 2);
}

#[test]
fn build_ufhc_writes_json_and_density_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctlab(&["--preset", "example59-small", "build", "ufhc", "--stages", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let staged = read_json(&dir.path().join("staged.json"));
    assert_eq!(staged["all_hold"], true);
    assert_eq!(staged["reverified"], true);
    assert_eq!(staged["staged"]["stages"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("densities.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "upper");
    assert_eq!(row[8], "1/18");
    assert_eq!(row[10], "true");
    let cfg = read_json(&dir.path().join("config.json"));
    assert_eq!(cfg["command"], "build ufhc");
    assert_eq!(cfg["params"]["alpha"], "1/8");
}

#[test]
fn eigen_grid_of_sixteen_roots() {
    let out = ctlab(&["--preset", "thsmx", "eigen", "ctype", "--grid", "16", "--stages", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    for row in rows {
        assert!(row["residual"].as_f64().unwrap() < 1e-8, "{row}");
    }
}

#[test]
fn diagshift_includes_the_first_diagonal_value() {
    let r = json_stdout(&ctlab(&["eigen", "diagshift", "--preset", "thsmx"]));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0]["lambda"], "lambda_1");
    assert_eq!(rows[0]["residual"].as_f64(), Some(0.0));
    assert!(rows.iter().all(|row| row["residual"].as_f64().unwrap() < 1e-10));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = ctlab(&["--preset", "example55-small", "densities", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let out = ctlab(&["--preset", "thsmx", "eigen", "diagshift", "--seed", "3", "--out", d.path().join("eig").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["densities.json", "densities.csv", "config.json", "eig/eigen.json", "eig/eigen.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_operators_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    fs::write(&spec, r#"{"family":"cplus1","tables":{"tau":[1,2],"delta":[2,4],"Delta":[4,3]}}"#).unwrap();
    let out = ctlab(&["--spec", spec.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let r = json_stdout(&out);
    assert_eq!(r["valid"], false);
    assert_eq!(r["report"]["violations"][0]["constraint"], "δ < Δ");

    let out = ctlab(&["--preset", "nosuch", "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ctlab(&["--preset", "nosuch", "classify"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tabulated_operators_are_undetermined_dominant() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("table.json");
    fs::write(&spec, r#"{"family":"cplus1","tables":{"tau":[1,2,3],"delta":[2,4,6],"Delta":[8,16,32]}}"#).unwrap();
    let out = ctlab(&["--spec", spec.to_str().unwrap(), "classify"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_stdout(&out)["undetermined_dominant"], true);
    let out = ctlab(&["--spec", spec.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn report_prints_the_certificate_chain() {
    let out = ctlab(&["--preset", "example55", "report"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("certificate chain:"));
    assert!(text.contains("ergodic_frequency_bound"));
}

#[test]
fn presets_are_listed() {
    let r = json_stdout(&ctlab(&["presets"]));
    let names: Vec<&str> = r["presets"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    for n in ["example55", "example59", "c2mix", "thsmx", "example59-small"] {
        assert!(names.contains(&n), "{n}");
    }
}
