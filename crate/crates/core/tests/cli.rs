use std::path::Path;
use std::process::Command;

fn diachron() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diachron"))
}

#[test]
fn missing_manifest_is_a_usage_error() {
    let out = tempfile::tempdir().unwrap();
    let status = diachron()
        .args(["ingest", "--manifest", "/nonexistent/manifest.csv", "--out"])
        .arg(out.path().join("corpus"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "manifest = \"m.csv\"\noutput_dir = \"out\"\nbogus = 1\n").unwrap();
    let out = diachron().args(["report", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let status = diachron().arg("frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn ingest_then_stats_prints_pronoun_ratios() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let status = diachron().args(["ingest", "--manifest"]).arg(&manifest).arg("--out").arg(&corpus).status().unwrap();
    assert!(status.success());
    let out = diachron().args(["stats", "--metric", "mpr", "--corpus"]).arg(&corpus).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().next().unwrap().starts_with("bucket,"));
    assert!(text.contains("old,all,"));
}

#[test]
fn weat_on_unknown_space_fails_as_analysis_error() {
    let dir = tempfile::tempdir().unwrap();
    let vec = dir.path().join("tiny.vec");
    std::fs::write(&vec, "2 2\nfoo 1.0 0.0\nbar 0.0 1.0\n").unwrap();
    let out = diachron().args(["weat", "--builtin", "gender-occupations", "--space"]).arg(&vec).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("failed"));
}
