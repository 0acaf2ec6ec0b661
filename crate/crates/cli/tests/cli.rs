use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mini/corpus").canonicalize().unwrap()
}

fn write_config(dir: &Path, feature_sets: &str, sts: &str) -> PathBuf {
    let c = corpus();
    let text = format!(
        "seed = 7\nfeature_sets = {feature_sets}\n\n[paths]\ncorpus = {:?}\noutput = \"out\"\njudgments = {:?}\ngold = {:?}\n\n\
         [cluster]\nmode = \"n_clusters\"\nvalue = 12\n\n[filter]\ncorrelation_floor = {{ absolute = 0.4 }}\n\n[sts]\n{sts}\n",
        c,
        c.join("judgments.jsonl"),
        c.join("gold.jsonl"),
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn afs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afs")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn full_run_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"["N", "U"]"#, "provider = \"constant\"\nscore = 0.5");
    let out = afs(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("N vs U"), "{stdout}");
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn stage_subcommand_and_flag_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"["N"]"#, "provider = \"none\"");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(afs(&["--config", cfg, "select"]).status.code(), Some(0));
    let selected = std::fs::read(dir.path().join("out/selected.json")).unwrap();
    assert_eq!(afs(&["--config", cfg, "--stage", "select", "run"]).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("out/selected.json")).unwrap(), selected);
    assert!(!dir.path().join("out/pyramids.json").exists());
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(afs(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(afs(&["--config", "/nonexistent/experiment.toml", "run"]).status.code(), Some(1));
    let cfg = write_config(dir.path(), r#"["N"]"#, "provider = \"none\"");
    assert_eq!(afs(&["--config", cfg.to_str().unwrap(), "--stage", "bogus", "run"]).status.code(), Some(1));
    let bad = write_config(dir.path(), r#"["Q"]"#, "provider = \"none\"");
    assert_eq!(afs(&["--config", bad.to_str().unwrap(), "run"]).status.code(), Some(1));
}

#[test]
fn missing_upstream_artifact_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"["N"]"#, "provider = \"none\"");
    let out = afs(&["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn offline_cache_miss_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"["U"]"#, "provider = \"constant\"\nscore = 0.5");
    let out = afs(&["--config", cfg.to_str().unwrap(), "--offline", "run"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("featurize"));
}
