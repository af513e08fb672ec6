//! Orchestration: stages, manifest, failure marker.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA};
use crate::error::CliError;
use crate::report::emit_report;
use crate::stages::{run_stage, Artifacts, Stage};

pub const MANIFEST: &str = "manifest.json";
pub const FAILED: &str = "FAILED";
pub const REPORT: &str = "report.txt";
pub const RUN_LOG: &str = "run.log";

/// Version string in the style of `git describe`.
pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub config_hash: String,
    pub version: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub files: Vec<FileEntry>,
    /// Wall-clock seconds per stage; kept out of the manifest so reruns are
    /// byte-identical.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Artifact(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
    }

    pub fn has(&self, name: &str) -> bool {
        self.files.iter().any(|f| f.path == name)
    }
}

pub fn file_entry(dir: &Path, name: &str) -> Result<FileEntry, CliError> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(FileEntry { path: name.to_string(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

fn write_manifest(dir: &Path, record: &RunRecord) -> Result<(), CliError> {
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(record).expect("record serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_log(dir: &Path, record: &RunRecord) {
    let mut log = format!("version {}\nconfig {}\nstatus {}\n", record.version, record.config_hash, record.status);
    for (stage, secs) in &record.timings {
        log.push_str(&format!("{stage} {secs:.3}s\n"));
    }
    // The log is informational; failing to write it must not fail the run.
    let _ = std::fs::write(dir.join(RUN_LOG), log);
}

/// Runs the configured pipeline into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunRecord, CliError> {
    run_stages(cfg, out, &Stage::pipeline(&cfg.pipeline))
}

/// Runs `stages` in order. On failure the outputs written so far stay in
/// place, a `FAILED` marker names the stage, and the manifest records it.
pub fn run_stages(cfg: &ExperimentConfig, out: &Path, stages: &[Stage]) -> Result<RunRecord, CliError> {
    cfg.validate()?;
    let mut artifacts = Artifacts::new(out)?;
    let _ = std::fs::remove_file(out.join(FAILED));
    let mut record = RunRecord {
        schema: SCHEMA,
        config_hash: cfg.hash(),
        version: version(),
        status: "ok".into(),
        failed_stage: None,
        files: Vec::new(),
        timings: Vec::new(),
    };
    artifacts.write_json("config.json", cfg)?;
    for &stage in stages {
        let t0 = Instant::now();
        let res = run_stage(stage, cfg, &mut artifacts);
        record.timings.push((stage.name().to_string(), t0.elapsed().as_secs_f64()));
        if let Err(e) = res {
            let name = e.stage().unwrap_or(stage.name());
            record.status = "failed".into();
            record.failed_stage = Some(name.to_string());
            artifacts.write_with(FAILED, |f| {
                use std::io::Write;
                writeln!(f, "stage: {name}\nerror: {e}")
            })?;
            record.files = entries(out, &artifacts.files)?;
            write_manifest(out, &record)?;
            write_log(out, &record);
            return Err(e);
        }
    }
    record.files = entries(out, &artifacts.files)?;
    let report = emit_report(out, &record)?;
    artifacts.write_with(REPORT, |f| {
        use std::io::Write;
        f.write_all(report.as_bytes())
    })?;
    record.files = entries(out, &artifacts.files)?;
    write_manifest(out, &record)?;
    write_log(out, &record);
    Ok(record)
}

fn entries(dir: &Path, names: &[String]) -> Result<Vec<FileEntry>, CliError> {
    names.iter().map(|n| file_entry(dir, n)).collect()
}
