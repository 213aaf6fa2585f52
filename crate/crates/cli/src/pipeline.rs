//! Stage scheduling, the content-addressed stage cache and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::{CachePolicy, ExperimentConfig, Stage};
use crate::error::CliError;
use crate::instance::{prepare, Prepared};
use crate::stages::{self, StageOutput};
use crate::with_levels;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CACHE_ENV: &str = "WARPBENCH_CACHE";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Cached,
    Failed,
    Violation,
    Skipped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: Status,
    pub reason: Option<String>,
    /// Property violations, also kept when replayed from the cache.
    pub violations: Vec<String>,
    pub seconds: f64,
    pub cache_key: String,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub name: String,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
    /// Every file under the output directory, this manifest included.
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self
            .stages
            .iter()
            .any(|s| matches!(s.status, Status::Failed | Status::Skipped))
        {
            2
        } else if self.stages.iter().any(|s| !s.violations.is_empty()) {
            3
        } else {
            0
        }
    }
}

/// What the cache stores next to a stage's files.
#[derive(Serialize, Deserialize)]
struct CacheMeta {
    stage: Stage,
    tool_version: String,
    violations: Vec<String>,
    artifacts: Vec<String>,
}

fn sha256_json(value: &Json) -> String {
    // serde_json maps are ordered by key, so this encoding is canonical
    let bytes = serde_json::to_vec(value).expect("JSON values always encode");
    hex::encode(Sha256::digest(&bytes))
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let value = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sha256_json(&value))
}

/// Hash of everything that can change a stage's artifacts.
pub fn stage_key(config: &ExperimentConfig, stage: Stage) -> Result<String, CliError> {
    let mut value = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
    let map = value.as_object_mut().expect("config serializes to an object");
    for key in ["name", "output", "cache", "stages"] {
        map.remove(key);
    }
    for (key, owner) in [("gap", Stage::Gap), ("cnd", Stage::Cnd), ("distort", Stage::Distort)] {
        if owner != stage {
            map.remove(key);
        }
    }
    map.insert("stage".into(), Json::from(stage.name()));
    map.insert("tool_version".into(), Json::from(TOOL_VERSION));
    Ok(sha256_json(&value))
}

pub fn cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from("cache"), PathBuf::from)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load_cached(dir: &Path, stage: Stage) -> Option<(CacheMeta, Vec<(String, Vec<u8>)>)> {
    let meta: CacheMeta = serde_json::from_slice(&fs::read(dir.join("meta.json")).ok()?).ok()?;
    if meta.stage != stage || meta.tool_version != TOOL_VERSION {
        return None;
    }
    let files = meta
        .artifacts
        .iter()
        .map(|a| fs::read(dir.join("files").join(a)).ok().map(|b| (a.clone(), b)))
        .collect::<Option<Vec<_>>>()?;
    Some((meta, files))
}

fn store_cached(dir: &Path, stage: Stage, output: &StageOutput) -> Result<(), CliError> {
    let tmp = dir.with_extension(format!("tmp{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    for (rel, bytes) in &output.files {
        write_file(&tmp.join("files").join(rel), bytes)?;
    }
    let meta = CacheMeta {
        stage,
        tool_version: TOOL_VERSION.into(),
        violations: output.violations.clone(),
        artifacts: output.files.iter().map(|(p, _)| p.clone()).collect(),
    };
    let bytes = serde_json::to_vec_pretty(&meta).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&tmp.join("meta.json"), &bytes)?;
    let _ = fs::remove_dir_all(dir);
    fs::rename(&tmp, dir).map_err(|e| CliError::io(dir, e))
}

fn run_stage(stage: Stage, config: &ExperimentConfig, prepared: &mut Prepared) -> Result<StageOutput, CliError> {
    with_levels!(prepared, levels => match stage {
        Stage::Towers => stages::towers(config, levels),
        Stage::Warp => stages::warp(config, levels),
        Stage::EmbedCheck => stages::embed_check(config, levels),
        Stage::Rlocal => stages::rlocal(config, levels),
        Stage::Cnd => stages::cnd(config, levels),
        Stage::Gap => stages::gap(config, levels),
        Stage::Distort => stages::distort(config, levels),
    })
}

/// Runs `stages` in dependency order and writes the manifest last.
pub fn run(config: &ExperimentConfig, stages: &[Stage]) -> Result<RunManifest, CliError> {
    config.validate()?;
    let mut order: Vec<Stage> = stages.to_vec();
    order.sort();
    order.dedup();

    let out = &config.output;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for stage in &order {
        let dir = out.join(stage.name());
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
    }
    let manifest_path = out.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    }

    let cache = cache_root();
    let mut prepared: Option<Result<Prepared, String>> = None;
    let mut records: Vec<StageRecord> = Vec::new();
    for stage in order {
        let start = Instant::now();
        let key = stage_key(config, stage)?;
        let mut record = StageRecord {
            stage,
            status: Status::Ok,
            reason: None,
            violations: Vec::new(),
            seconds: 0.0,
            cache_key: key.clone(),
            artifacts: Vec::new(),
        };
        let warp_failed = records
            .iter()
            .any(|r| r.stage == Stage::Warp && r.status == Status::Failed);
        let entry = cache.join(&key);

        if stage.needs_warp() && warp_failed {
            record.status = Status::Skipped;
            record.reason = Some("upstream stage warp failed".into());
        } else if let Some((meta, files)) = (config.cache == CachePolicy::Auto)
            .then(|| load_cached(&entry, stage))
            .flatten()
        {
            for (rel, bytes) in &files {
                write_file(&out.join(rel), bytes)?;
            }
            record.status = Status::Cached;
            record.violations = meta.violations;
            record.artifacts = meta.artifacts;
        } else {
            let ready = prepared.get_or_insert_with(|| prepare(config).map_err(|e| e.to_string()));
            let result = match ready {
                Ok(p) => run_stage(stage, config, p),
                Err(why) => Err(CliError::Config(why.clone())),
            };
            match result {
                Ok(output) => {
                    for (rel, bytes) in &output.files {
                        write_file(&out.join(rel), bytes)?;
                    }
                    if config.cache != CachePolicy::Off {
                        store_cached(&entry, stage, &output)?;
                    }
                    record.status = if output.violations.is_empty() {
                        Status::Ok
                    } else {
                        Status::Violation
                    };
                    record.violations = output.violations;
                    record.artifacts = output.files.into_iter().map(|(p, _)| p).collect();
                }
                Err(e) => {
                    record.status = Status::Failed;
                    record.reason = Some(e.to_string());
                }
            }
        }
        record.seconds = start.elapsed().as_secs_f64();
        records.push(record);
    }

    let mut files: Vec<String> = WalkDir::new(out)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            e.path()
                .strip_prefix(out)
                .ok()
                .map(|p| p.to_string_lossy().replace('\\', "/"))
        })
        .collect();
    files.push(MANIFEST.into());
    files.sort();
    files.dedup();

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        name: config.name.clone(),
        config_hash: config_hash(config)?,
        stages: records,
        files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    bytes.push(b'\n');
    write_file(&manifest_path, &bytes)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "version = 1\nname = \"k\"\nlevels = [1]\n[instance]\nkind = \"profinite\"\ndepth = 3\n",
        )
        .unwrap()
    }

    fn record(status: Status, violations: &[&str]) -> StageRecord {
        StageRecord {
            stage: Stage::Gap,
            status,
            reason: None,
            violations: violations.iter().map(|v| v.to_string()).collect(),
            seconds: 0.0,
            cache_key: String::new(),
            artifacts: Vec::new(),
        }
    }

    fn manifest(stages: Vec<StageRecord>) -> RunManifest {
        RunManifest {
            tool_version: TOOL_VERSION.into(),
            name: "m".into(),
            config_hash: String::new(),
            stages,
            files: Vec::new(),
        }
    }

    #[test]
    fn exit_codes_separate_failures_from_violations() {
        assert_eq!(manifest(vec![]).exit_code(), 0);
        assert_eq!(manifest(vec![record(Status::Ok, &[])]).exit_code(), 0);
        assert_eq!(manifest(vec![record(Status::Violation, &["x"])]).exit_code(), 3);
        assert_eq!(manifest(vec![record(Status::Cached, &["x"])]).exit_code(), 3);
        assert_eq!(
            manifest(vec![record(Status::Violation, &["x"]), record(Status::Failed, &[])]).exit_code(),
            2
        );
    }

    #[test]
    fn stage_keys_ignore_presentation_and_other_sections() {
        let base = config();
        let mut renamed = base.clone();
        renamed.name = "other".into();
        renamed.output = "elsewhere".into();
        renamed.cnd.weightings = 7;
        for stage in [Stage::Warp, Stage::Gap] {
            assert_eq!(stage_key(&base, stage).unwrap(), stage_key(&renamed, stage).unwrap());
        }
        assert_ne!(
            stage_key(&base, Stage::Cnd).unwrap(),
            stage_key(&renamed, Stage::Cnd).unwrap()
        );
        assert_ne!(
            stage_key(&base, Stage::Warp).unwrap(),
            stage_key(&base, Stage::Gap).unwrap()
        );
        let mut reseeded = base.clone();
        reseeded.seeds = vec![5];
        assert_ne!(
            stage_key(&base, Stage::Warp).unwrap(),
            stage_key(&reseeded, Stage::Warp).unwrap()
        );
        assert_ne!(config_hash(&base).unwrap(), config_hash(&renamed).unwrap());
    }
}
