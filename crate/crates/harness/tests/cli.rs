use std::process::Command;

fn lsoc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lsoc"));
    c.env_remove("LSOC_OUT_DIR");
    c
}

#[test]
fn weights_subcommand_writes_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = lsoc()
        .args(["weights", "--scenario", "uav-example2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("kernel weights"));
    assert!(dir.path().join("weights.json").exists());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn out_dir_precedence() {
    let env_dir = tempfile::tempdir().unwrap();
    let file_dir = tempfile::tempdir().unwrap();
    let config = file_dir.path().join("exp.toml");
    let target = file_dir.path().join("from-file");
    std::fs::write(
        &config,
        format!("scenario = \"grid\"\nout = {:?}\n", target.to_str().unwrap()),
    )
    .unwrap();

    let status = lsoc()
        .args(["weights", "--scenario", "grid"])
        .env("LSOC_OUT_DIR", env_dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(env_dir.path().join("weights.json").exists());

    let status = lsoc()
        .arg("weights")
        .arg("--config")
        .arg(&config)
        .env("LSOC_OUT_DIR", env_dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(target.join("weights.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        lsoc()
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(
        code(&["compose", "--scenario", "uav-example2", "--dt", "-1"]),
        Some(2)
    );
    assert_eq!(code(&["compare", "--scenario", "uav-example1"]), Some(2));
    assert_eq!(code(&["rollout", "--scenario", "grid"]), Some(2));
    assert_eq!(
        code(&[
            "weights",
            "--scenario",
            "grid",
            "--config",
            "/nonexistent/exp.toml"
        ]),
        Some(4)
    );
}
