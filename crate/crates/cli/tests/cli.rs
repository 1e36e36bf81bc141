use std::path::Path;
use std::process::{Command, Output};

fn stspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stspin")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn inspect_lists_generators_in_token_format() {
    let out = stspin(&["inspect", "--builtin", "rep_memory", "-d", "2", "--duration", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("# qubits 2 layers 3 generators 9"));
    assert!(text.contains("Z 0@1.5 Z 1@1.5"));
    assert!(text.contains("observable"));
    assert!(!text.contains("issue"));
}

#[test]
fn build_model_writes_header_and_graph() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.jsonl");
    let graph = dir.path().join("g.json");
    let out = stspin(&[
        "build-model",
        "--builtin",
        "rep_memory",
        "-d",
        "3",
        "-p",
        "0.1",
        "--simplify",
        "-o",
        model.to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&model).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["css"], true);
    let n = header["interactions"].as_u64().unwrap() as usize;
    assert_eq!(text.lines().count(), n + 1);
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&graph).unwrap()).unwrap();
    assert!(g.is_object());
}

#[test]
fn oracle_reports_success_and_coset_probability() {
    let base = ["oracle", "--builtin", "rep_memory", "-d", "3", "--duration", "3", "-p", "0.1"];
    let out = stspin(&base);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let s = v["success"].as_f64().unwrap();
    assert!(s > 0.5 && s < 1.0);
    let mut args = base.to_vec();
    args.extend(["--coset", "X 0@0.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&stspin(&args))).unwrap();
    let p = v["probability"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn run_experiment_then_estimate_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"circuit": {"builtin": "rep_memory", "distances": [3, 5]},
            "noise": "x", "p_values": [0.06, 0.1, 0.14], "realizations": 400, "seed": 5}"#,
    );
    let csv = dir.path().join("out.csv");
    let out = stspin(&["run-experiment", &cfg, "-o", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("d,p,rate,ci,n,seed"));
    assert_eq!(text.lines().count(), 7);
    assert!(dir.path().join("out.manifest.json").exists());

    let out = stspin(&["estimate-threshold", csv.to_str().unwrap(), "--bootstrap", "50"]);
    match out.status.code() {
        Some(0) => {
            let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
            assert!(v["x_c"].as_f64().unwrap() > 0.0);
        }
        // Two small sizes may not cross inside the window; that is a
        // numerical outcome, not a usage error.
        code => assert_eq!(code, Some(2)),
    }
}

#[test]
fn missing_crossing_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    std::fs::write(
        &csv,
        "d,p,rate,ci,n,seed,argmax_rate,argmax_ci\n\
         3,0.1,0.1,0.01,1000,1,0.1,0.01\n3,0.2,0.2,0.01,1000,1,0.2,0.01\n\
         5,0.1,0.05,0.01,1000,1,0.05,0.01\n5,0.2,0.15,0.01,1000,1,0.15,0.01\n",
    )
    .unwrap();
    let out = stspin(&["estimate-threshold", csv.to_str().unwrap(), "--window", "0.1", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_exits_with_config_status() {
    assert_eq!(stspin(&["inspect", "--builtin", "nope"]).status.code(), Some(1));
    assert_eq!(stspin(&["inspect"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"circuit": {"builtin": "rep_memory", "distances": [3]}, "noise": "x"}"#);
    assert_eq!(stspin(&["run-experiment", &cfg]).status.code(), Some(1));
    let cfg = write_config(
        dir.path(),
        r#"{"circuit": {"builtin": "rep_memory", "distances": [3]}, "noise": "x",
            "p_values": [0.7], "realizations": 10}"#,
    );
    assert_eq!(stspin(&["run-experiment", &cfg]).status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(stspin(&["--help"]).status.code(), Some(0));
}
