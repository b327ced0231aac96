use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shiftcompact"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn manifest() -> String {
    format!("{}/../../manifests/acceptance.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn pekar_writes_json_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["pekar", "--mass", "1.0", "--points", "800", "--out", "p.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(body["config"]["solver"]["points"], 800);
    assert!((body["result"]["energy"].as_f64().unwrap() - 0.217).abs() < 0.002);
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(csv.starts_with("r,psi\n"));
    assert_eq!(csv.lines().count(), 802);
    let meta = std::fs::read_to_string(dir.path().join("p.meta.json")).unwrap();
    assert!(meta.contains("started_unix"));
    assert!(!body.to_string().contains("started_unix"));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"command":"pekar","params":{"mas":1.0},"out":"r.json"}"#,
        r#"{"command":"tube","params":{},"out":"r.json"}"#,
        r#"{"command":"nope","out":"r.json"}"#,
        r#"{"command":"pekar","params":{"mass":-1.0},"out":"r.json"}"#,
        "not json",
    ];
    for (i, c) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.json"));
        std::fs::write(&cfg, c).unwrap();
        let out = run(&["run", cfg.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(2), "case {i}");
        assert!(!out.stderr.is_empty());
    }
    let entries: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(
        entries.iter().all(|n| n.to_string_lossy().starts_with('c')),
        "{entries:?}"
    );
}

#[test]
fn field_path_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command":"pekar","params":{"solver":{"pts":3}}}"#).unwrap();
    let out = run(&["run", cfg.to_str().unwrap()], dir.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params.solver"), "{err}");
}

#[test]
fn numerical_flag_exits_3_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"command":"pekar","params":{"solver":{"points":600,"max_iterations":1}},"out":"r.json"}"#,
    )
    .unwrap();
    let out = run(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let body = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert!(body.contains("NoConvergence"));
}

#[test]
fn metric_reads_collection_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = r#"{"components":[{"dim":1,"spacing":0.5,"origin":[0.0],"shape":[3],"weights":[0.1,0.2,0.1]}]}"#;
    let b = r#"{"components":[{"dim":1,"spacing":0.5,"origin":[7.5],"shape":[3],"weights":[0.1,0.2,0.1]}]}"#;
    std::fs::write(dir.path().join("a.json"), a).unwrap();
    std::fs::write(dir.path().join("b.json"), b).unwrap();
    let out = run(&["metric", "--a", "a.json", "--b", "b.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["result"]["value"], 0.0);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["khasminskii", "--paths", "500", "--dt", "0.01", "--seed", "3"];
    let a = run(&args, dir.path());
    let b = run(&args, dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(
        &["khasminskii", "--paths", "500", "--dt", "0.01", "--seed", "4"],
        dir.path(),
    );
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn empty_manifest_passes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"entries":[]}"#).unwrap();
    let out = run(&["reproduce", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 checks, 0 failed"));
}

#[test]
fn tightened_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let m = r#"{"entries":[{"name":"pekar","config":{"command":"pekar","params":{"solver":{"points":600}}},
        "checks":[{"pointer":"/result/energy","min":0.2171,"max":0.2172}]}]}"#;
    std::fs::write(dir.path().join("m.json"), m).unwrap();
    let out = run(&["reproduce", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL | pekar"));
}

#[test]
fn shipped_manifest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", &manifest()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn help_documents_flags() {
    let out = bin().args(["tube", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--t", "--dt", "--eps", "--beta", "--seed", "--chains", "--grid-h", "--out",
    ] {
        assert!(text.contains(flag), "{flag}");
    }
}
