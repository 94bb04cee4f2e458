use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau-lab"))
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{ "degree": 0 }"#).unwrap();
    let out = lab().arg("nullspace").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degree"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn malformed_window_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab().args(["decay", "--window", "5"]).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nullspace_run_writes_checked_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{ "degree": 4 }"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = lab().arg("nullspace").arg("--config").arg(&cfg).arg("--out").arg(&out_dir).args(["--seed", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["passed"], true);
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(out_dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(landau_lab::run::sha256_hex(&bytes), f["sha256"].as_str().unwrap());
    }
}

#[test]
fn decay_component_filter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{ "degree": 4 }"#).unwrap();
    let out = lab()
        .arg("decay")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--component", "g-fluid", "--k", "1", "--threads", "2"])
        .output()
        .unwrap();
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/decay_fits.json")).unwrap()).unwrap();
    let recs = fits.as_array().unwrap();
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["component"] == "g-fluid" && r["k"] == 1));
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
}
