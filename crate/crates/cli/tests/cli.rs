use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elliptic")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn plucker_rejects_six_cusps() {
    let r = report(&run(&["plucker", "--profile", "5,0,0,6"]));
    assert_eq!(r["payload"]["admissible"], false);
    assert_eq!(r["payload"]["dualDegree"], 2);
    assert_eq!(r["command"], "plucker");
    assert_eq!(r["inputsDigest"].as_str().unwrap().len(), 64);
}

#[test]
fn plucker_enumeration_is_csv() {
    let out = run(&["plucker", "--enumerate", "2"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "d,g,delta,kappa,dualDegree\n2,0,0,0,2\n");
}

#[test]
fn standard_control_has_zero_separation() {
    let r = report(&run(&["dual-nonlinearity", "--coefficient", "0", "--alpha", "1+0i"]));
    assert_eq!(r["payload"]["certificates"][0]["separation"], 0.0);
    let r = report(&run(&["dual-nonlinearity", "--alpha", "1"]));
    let sep = r["payload"]["certificates"][0]["separation"].as_f64().unwrap();
    assert!((sep - 0.5278640).abs() < 1e-7);
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn holomorphic_solve_reproduces_identity() {
    let r = report(&run(&["solve"]));
    assert!(r["payload"]["trace"]["equationResidual"].as_f64().unwrap() < 1e-10);
    let out = run(&["solve", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re_z,im_z,re_f,im_f"));
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[2]).abs() < 1e-10 && (v[1] - v[3]).abs() < 1e-10);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "--n", "16"]).status.code(), Some(2));
    assert_eq!(run(&["crofton", "--n", "100"]).status.code(), Some(2));
    assert_eq!(run(&["dual-nonlinearity", "--alpha", "1,5"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"schemaVersion":1,"kind":"field","field":{"variant":"standard"},"unknown":true}"#,
    );
    assert_eq!(run(&["taming", "--seed", "1", "--input", &bad]).status.code(), Some(2));
    let rot = write(
        dir.path(),
        "rot.json",
        r#"{"schemaVersion":1,"kind":"fiber","fiber":{"variant":"closedForm","name":"isometry","axis":[0,0,1],"angle":1.0}}"#,
    );
    let out = run(&["retract", "--input", &rot]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no convergence"));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["crofton", "--seed", "7", "--n", "300", "--patch", "conic", "--out", d.to_str().unwrap(), "--format", "csv"]);
        assert!(out.status.success());
    }
    let read = |d: &Path| -> Value { serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap() };
    let (ra, rb) = (read(&a), read(&b));
    assert_eq!(serde_json::to_string(&ra["payload"]).unwrap(), serde_json::to_string(&rb["payload"]).unwrap());
    assert_eq!(ra["inputsDigest"], rb["inputsDigest"]);
    assert_eq!(ra["payload"]["estimate"]["mean"], 2.0);
    assert_eq!(std::fs::read(a.join("crofton.csv")).unwrap(), std::fs::read(b.join("crofton.csv")).unwrap());

    let other = report(&run(&["crofton", "--seed", "8", "--n", "300", "--patch", "conic"]));
    assert_ne!(other["inputsDigest"], ra["inputsDigest"]);
}

#[test]
fn audit_and_taming_of_documents() {
    let dir = tempfile::tempdir().unwrap();
    let fiber = write(
        dir.path(),
        "fiber.json",
        r#"{"schemaVersion":1,"kind":"fiber","fiber":{"variant":"closedForm","name":"radialPull","center":[0,0,1],"lipschitz":0.5},"audit":{"resolution":3,"samples":100}}"#,
    );
    let r = report(&run(&["audit", "--seed", "3", "--input", &fiber]));
    assert_eq!(r["payload"]["pass"], true);
    let lip = r["payload"]["ellipticity"]["lipEstimate"].as_f64().unwrap();
    assert!((lip - 0.5).abs() < 0.01);

    let field = write(
        dir.path(),
        "field.json",
        r#"{"schemaVersion":1,"kind":"field","field":{"variant":"example5","coefficient":0.2}}"#,
    );
    let r = report(&run(&["taming", "--seed", "4", "--n", "500", "--input", &field]));
    assert_eq!(r["payload"]["pass"], true);
    let r = report(&run(&["taming", "--seed", "4", "--n", "50", "--form", "split"]));
    assert_eq!(r["payload"]["pass"], false);

    let r = report(&run(&["retract", "--n", "3"]));
    assert_eq!(r["payload"]["steps"].as_array().unwrap().len(), 3);
    assert_eq!(r["payload"]["pass"], true);
}
