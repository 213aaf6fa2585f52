use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use walkdir::WalkDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_warpbench"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Runs in `dir` with the cache rooted inside it.
fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env("WARPBENCH_CACHE", dir.join("cache"))
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out: Vec<String> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned())
        .collect();
    out.sort();
    out
}

#[test]
fn help_exits_zero() {
    let out = bin().args(["warp", "--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--config"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["warp", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "version = 1\nname = \"x\"\nlevels = [1]\nsedes = [1]\n[instance]\nkind = \"profinite\"\ndepth = 3\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sedes"));
}

#[test]
fn empty_stage_list_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "version = 1\nname = \"e\"\nlevels = [1]\noutput = \"out\"\n[instance]\nkind = \"profinite\"\ndepth = 3\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["stages"].as_array().unwrap().len(), 0);
    assert_eq!(m["files"], serde_json::json!(["manifest.json"]));
}

#[test]
fn gap_matches_cycle_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("zmod-gap.toml");
    let out = run_in(dir.path(), &["gap", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/gap/series.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let m: f64 = cols[0].trim_start_matches("Z/").parse().unwrap();
        let gap: f64 = cols[4].parse().unwrap();
        // independent oracle: the second eigenvalue of the cycle averaging operator
        assert!((gap - (1.0 - (2.0 * PI / m).cos())).abs() <= 1e-8, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn profinite_demo_reruns_from_cache_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("profinite-z.toml");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", "o"];
    let first = run_in(dir.path(), &args);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let out = dir.path().join("o");
    let m = manifest(&out);
    let stages = m["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 7);
    assert!(stages.iter().all(|s| s["status"] == "ok"));
    let listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, files_under(&out));
    for level in ["2", "64", "576", "1024"] {
        assert!(out.join(format!("warp/{level}.csv")).exists());
    }
    let req = |level: &str| -> serde_json::Value {
        serde_json::from_slice(&fs::read(out.join(format!("embed-check/{level}_R3.json"))).unwrap()).unwrap()
    };
    assert_eq!(req("2")["status"], "rejected");
    assert_eq!(req("576")["status"], "pass");
    assert_eq!(req("576")["requirement_1"]["identity_deviation"], 0.0);

    let snapshot: Vec<(String, Vec<u8>)> = files_under(&out)
        .into_iter()
        .filter(|f| f != "manifest.json")
        .map(|f| (f.clone(), fs::read(out.join(&f)).unwrap()))
        .collect();
    let second = run_in(dir.path(), &args);
    assert_eq!(second.status.code(), Some(0));
    let m = manifest(&out);
    assert!(m["stages"].as_array().unwrap().iter().all(|s| s["status"] == "cached"));
    for (f, bytes) in snapshot {
        assert_eq!(
            fs::read(out.join(&f)).unwrap(),
            bytes,
            "{f} changed on the cached rerun"
        );
    }
}

#[test]
fn failed_stage_is_recorded_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    // the golden rotation of a coarse circle net has several orbits, so no section exists
    fs::write(
        &cfg,
        "version = 1\nname = \"c\"\nstages = [\"cnd\", \"gap\"]\nlevels = [2]\noutput = \"o\"\ncache = \"off\"\n\
         [instance]\nkind = \"circle\"\nepsilon = 0.5\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(&dir.path().join("o"));
    assert_eq!(m["stages"][0]["status"], "failed");
    assert!(m["stages"][0]["reason"].as_str().unwrap().contains("orbit"));
    assert_eq!(m["stages"][1]["status"], "ok");
    assert!(!dir.path().join("cache").exists());
}
