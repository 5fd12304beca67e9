use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrm"))
        .args(args)
        .current_dir(dir)
        .env_remove("LRM_OUT")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"kind": "homogeneous", "seed": 4, "n_p": 3000, "angles": [0.5, 2.0]}"#;

#[test]
fn run_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", SMALL);
    let out = lrm(&["run", &cfg, "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "report.json", "spin_law.csv"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "{not json",
        r#"{"kind": "homogeneous", "seed": 1, "angels": []}"#,
        r#"{"kind": "teleport", "seed": 1}"#,
    ] {
        let cfg = write(dir.path(), "bad.json", body);
        let out = lrm(&["run", &cfg], dir.path());
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let cfg = write(dir.path(), "h.json", SMALL);
    assert_eq!(lrm(&["run", &cfg, "--threads", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(lrm(&["run", &cfg, "--mode", "sideways"], dir.path()).status.code(), Some(2));
    assert_eq!(lrm(&["run", "missing.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_three_only_in_check_mode() {
    let dir = tempfile::tempdir().unwrap();
    // Too few particles for the 0.005 tolerance.
    let cfg = write(dir.path(), "h.json", r#"{"kind": "homogeneous", "seed": 1, "n_p": 20}"#);
    let out = lrm(&["check", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert_eq!(lrm(&["run", &cfg], dir.path()).status.code(), Some(0));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.json",
        r#"{"kind": "homogeneous", "seed": 4, "n_p": 100, "angles": [1.0], "output_dir": "from_config"}"#,
    );
    assert_eq!(lrm(&["run", &cfg], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("from_config/report.json").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_lrm"))
        .args(["run", &cfg])
        .current_dir(dir.path())
        .env("LRM_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from_env/report.json").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_lrm"))
        .args(["run", &cfg, "--out", "from_flag"])
        .current_dir(dir.path())
        .env("LRM_OUT", "from_env_again")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from_flag/report.json").exists());
    assert!(!dir.path().join("from_env_again").exists());
}

#[test]
fn seed_flag_overrides_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", SMALL);
    let csv = |args: &[&str], out: &str| {
        let mut all = vec!["run", cfg.as_str(), "--out", out];
        all.extend_from_slice(args);
        assert_eq!(lrm(&all, dir.path()).status.code(), Some(0));
        fs::read(dir.path().join(out).join("spin_law.csv")).unwrap()
    };
    let base = csv(&["--threads", "1"], "a");
    assert_eq!(base, csv(&["--threads", "3"], "b"));
    assert_eq!(base, csv(&["--seed", "4"], "c"));
    assert_ne!(base, csv(&["--seed", "5"], "d"));
    let echo = fs::read_to_string(dir.path().join("d/config.json")).unwrap();
    assert!(echo.contains("\"seed\": 5"));
}

#[test]
fn oracle_mode_writes_references() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"kind": "sg_single", "seed": 1}"#);
    let out = lrm(&["oracle", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_dir(dir.path().join("o")).unwrap().count() >= 3);
}
