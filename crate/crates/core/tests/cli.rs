use std::path::{Path, PathBuf};
use std::process::Command;

fn ddsde() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddsde"))
}

fn smoke(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke").join(name)
}

#[test]
fn list_and_describe() {
    let out = ddsde().arg("list-models").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "landau") && text.lines().any(|l| l == "linear_meanfield"), "{text}");

    let out = ddsde().args(["describe", "landau"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());

    let out = ddsde().args(["describe", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_report_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddsde().args(["run"]).arg(smoke("couple.json")).env("DDSDE_OUTPUT_DIR", dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "couple");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("couple.csv")).unwrap();
    assert!(csv.starts_with("t,gap_q,weight_mean,weight_entropy"));
}

#[test]
fn bad_config_exits_with_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(smoke("simulate.json")).unwrap().replace("\"seed\"", "\"sede\"");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, text).unwrap();
    let out = ddsde().arg("run").arg(&cfg).env("DDSDE_OUTPUT_DIR", dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sede") && err.contains("did you mean `seed`"), "{err}");
}

#[test]
fn numerical_abort_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.json");
    std::fs::write(
        &cfg,
        r#"{
            "model": {"name": "linear_meanfield", "a": -20000.0, "c": 0.0, "sigma": [[1.0]]},
            "sim": {"n_particles": 4, "dt": 0.1, "t_end": 10.0, "seed": 1, "init": {"kind": "dirac", "point": [1.0]}},
            "experiment": {"type": "simulate"}
        }"#,
    )
    .unwrap();
    let out = ddsde().arg("run").arg(&cfg).env("DDSDE_OUTPUT_DIR", dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
