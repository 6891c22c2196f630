use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cautious_cli::{exit_code, parse_args, EXIT_INVALID_CONFIG, EXIT_IO, EXIT_VERIFY_FAILED};

fn cautious(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cautious"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn run_writes_fingerprinted_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"n_steps": 3}"#).unwrap();
    let out = cautious(&["run", "--config", "c.json", "--out", "o", "--format", "csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<_> = fs::read_dir(dir.path().join("o")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    let text = fs::read_to_string(&files[1]).unwrap();
    assert!(files[1].to_string_lossy().contains("-gdm-seed0.csv"));
    assert_eq!(text.lines().next().unwrap(), "step,loss,hamiltonian,mask_ratio,effective_lr,w0,w1");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"n_steps": 2, "seeds": [0, 1, 2], "w0": "random"}"#).unwrap();
    let out = cautious(&["run", "--config", "c.json", "--out", "o", "--seed", "9", "--format", "csv"], dir.path());
    assert!(out.status.success());
    let names: Vec<String> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| n.ends_with("seed9.csv")), "{names:?}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"n_steps": 3, "workers": 0}"#).unwrap();
    let out = cautious(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = cautious(&["sweep", "--format", "xml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("neg.json"), r#"{"grid": {"lr": [-0.1]}}"#).unwrap();
    let out = cautious(&["sweep", "--config", "neg.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_and_unwritable_dir_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = cautious(&["run", "--config", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    fs::write(dir.path().join("blocker"), b"").unwrap();
    fs::write(dir.path().join("c.json"), r#"{"n_steps": 2}"#).unwrap();
    let out = cautious(&["run", "--config", "c.json", "--out", "blocker/sub"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn small_verify_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("v.json"),
        r#"{"verify": {"single_step_instances": 20, "inner_product_instances": 10, "separable_instances": 5,
             "descent_instances": 20, "reduction_steps": 10}}"#,
    )
    .unwrap();
    let out = cautious(&["verify", "--config", "v.json", "--out", "o", "--workers", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("identity_reduction"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn dynamics_writes_flow_columns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.json"), r#"{"dynamics": {"t_end": 0.1, "sample_every": 10}}"#).unwrap();
    let out = cautious(&["dynamics", "--config", "d.json", "--out", "o", "--format", "csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let f = fs::read_dir(dir.path().join("o")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(f).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,w0,w1,s0,s1,loss,hamiltonian");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn exit_code_mapping() {
    let io = cautious::Error::Io {
        path: "x".into(),
        source: std::io::Error::other("boom"),
    };
    assert_eq!(exit_code(&io), EXIT_IO);
    assert_eq!(exit_code(&cautious::Error::InvalidConfig("x".into())), EXIT_INVALID_CONFIG);
    assert_eq!(exit_code(&cautious::Error::FlowBlowUp { time: 1.0 }), EXIT_VERIFY_FAILED);
}

#[test]
fn parses_every_subcommand() {
    for sub in ["run", "sweep", "ablate-phi", "verify", "train", "dynamics"] {
        assert!(parse_args(["cautious", sub, "--workers", "2", "--format", "csv,svg"]).is_ok(), "{sub}");
    }
    assert!(parse_args(["cautious", "fly"]).is_err());
}
