use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn prepspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prepspace")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SIGMA_X_PROBLEM: &str = r#"{
    "hamiltonian": {"re": [[0.0, 1.0], [1.0, 0.0]], "im": [[0.0, 0.0], [0.0, 0.0]]},
    "initial": {"p": [1.0, 0.0], "phi": [0.0, 0.0]},
    "t_final": 0.7853981633974483,
    "dt": 0.001,
    "method": "implicit-midpoint"
}"#;

#[test]
fn verify_default_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = prepspace(&["verify", "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);

    let report: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["seed"], 42);
    assert_eq!(report["pass"], true);
    let checks = report["checks"].as_array().unwrap();
    let names: Vec<(&str, u64)> =
        checks.iter().map(|c| (c["check"].as_str().unwrap(), c["n"].as_u64().unwrap())).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for module in ["prep_state.", "frame_transform.", "metric.", "dynamics.", "bloch2.", "hilbert_oracle."] {
        assert!(names.iter().any(|(c, _)| c.starts_with(module)), "no checks for {module}");
    }
    for c in checks {
        for key in ["check", "n", "cases", "max_residual", "pass"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn verify_unattainable_tolerance_fails() {
    let o = prepspace(&["verify", "--tolerance", "1e-20", "--n", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn verify_rejects_bad_dimension() {
    assert_eq!(prepspace(&["verify", "--n", "1"]).status.code(), Some(2));
}

#[test]
fn evolve_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", SIGMA_X_PROBLEM);
    let out = dir.path().join("t.csv");
    let o = prepspace(&["evolve", "--input", &input, "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,p_1,p_2,phi_1,phi_2,energy");
    assert_eq!(lines.len(), 1 + 787);
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    assert!((last[1] - 0.5).abs() < 1e-3 && (last[2] - 0.5).abs() < 1e-3);
    // 17 significant digits
    assert_eq!(lines[1].split(',').next().unwrap(), "0.0000000000000000e0");

    let again = dir.path().join("t2.csv");
    prepspace(&["evolve", "--input", &input, "--output", again.to_str().unwrap()]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn evolve_flags_override_problem() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", SIGMA_X_PROBLEM);
    let o = prepspace(&["evolve", "--input", &input, "--dt", "0.1", "--t-final", "1", "--method", "rk4-renormalized"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1 + 11);
}

#[test]
fn bloch_writes_sphere_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "p.json",
        r#"{"hamiltonian": {"re": [[1.0, 0.0], [0.0, 0.0]], "im": [[0.0, 0.0], [0.0, 0.0]]},
            "initial": {"p": [0.5, 0.5], "phi": [0.0, 0.0]}, "t_final": 1.0, "dt": 0.25}"#,
    );
    let o = prepspace(&["bloch", "--input", &input]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,theta,phi");
    assert_eq!(lines.len(), 6);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((v[2] + v[0]).abs() < 1e-12);
    }
}

#[test]
fn bloch_rejects_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "p.json",
        r#"{"hamiltonian": {"re": [[0,0,0],[0,0,0],[0,0,0]], "im": [[0,0,0],[0,0,0],[0,0,0]]},
            "initial": {"p": [0.2, 0.3, 0.5], "phi": [0, 0, 0]}, "t_final": 1.0, "dt": 0.5}"#,
    );
    assert_eq!(prepspace(&["bloch", "--input", &input]).status.code(), Some(2));
}

#[test]
fn transform_hadamard_on_equal_superposition() {
    let dir = tempfile::tempdir().unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let input = write(
        dir.path(),
        "t.json",
        &format!(
            r#"{{"unitary": {{"re": [[{r}, {r}], [{r}, {m}]], "im": [[0, 0], [0, 0]]}},
                 "state": {{"p": [0.5, 0.5], "phi": [0, 0]}}}}"#,
            m = -r
        ),
    );
    let o = prepspace(&["transform", "--input", &input]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = |x: &Value| x.as_f64().unwrap();
    assert!((f(&v["state"]["p"][0]) - 1.0).abs() < 1e-12);
    assert!(f(&v["state"]["p"][1]).abs() < 1e-12);
    assert!((f(&v["classical"][0]) - 0.5).abs() < 1e-12);
    assert!((f(&v["interference"][0]) - 0.5).abs() < 1e-12);
    assert!((f(&v["interference"][1]) + 0.5).abs() < 1e-12);
    assert!(f(&v["interference_sum"]).abs() < 1e-12);
}

#[test]
fn transform_needs_exactly_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", r#"{"state": {"p": [0.5, 0.5], "phi": [0, 0]}}"#);
    assert_eq!(prepspace(&["transform", "--input", &input]).status.code(), Some(2));
}

#[test]
fn distance_reports_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "d.json",
        r#"{"from": {"p": [0.5, 0.5], "phi": [0, 0]}, "to": {"p": [0.5, 0.5], "phi": [0, 0.02]}, "scale": 0.5}"#,
    );
    let o = prepspace(&["distance", "--input", &input]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = |k: &str| v[k].as_f64().unwrap();
    assert_eq!(f("classical_part"), 0.0);
    // variance of (0, 0.01) at equal weights
    assert!((f("variance_part") - 2.5e-5).abs() < 1e-15);
    assert!((f("total") - f("classical_part") - f("variance_part")).abs() < 1e-18);
    assert!((f("fubini_study_angle") - 0.01).abs() < 1e-6);
}

#[test]
fn missing_input_is_an_error() {
    let o = prepspace(&["evolve", "--input", "/nonexistent/problem.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reading"));
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = SIGMA_X_PROBLEM.replace("\"dt\"", "\"step\": 1, \"dt\"");
    let input = write(dir.path(), "p.json", &body);
    assert_eq!(prepspace(&["evolve", "--input", &input]).status.code(), Some(2));
}
