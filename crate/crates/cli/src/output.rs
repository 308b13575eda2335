use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use tslab_core::rng::GENERATOR;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::RunError;
use crate::experiments::{run_experiment, Outcome};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub details: Value,
    /// Files written next to the report, relative to `config.output_dir`.
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
    pub library_version: String,
    pub generator: String,
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| RunError::io(path, std::io::Error::other("artifact path has no file name")))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(RunError::io(path, e));
    }
    Ok(())
}

/// Runs an already parsed experiment and writes its artifacts and `report.json`.
///
/// All computation happens before the output directory is touched, so a failed
/// run leaves nothing behind.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let started = Instant::now();
    let outcome = run_experiment(config).map_err(|source| RunError::Experiment {
        kind: config.kind,
        source,
    })?;
    let elapsed = started.elapsed().as_secs_f64();
    persist(config, outcome, elapsed)
}

fn persist(config: &ExperimentConfig, outcome: Outcome, elapsed: f64) -> Result<ExperimentReport, RunError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut artifacts = Vec::with_capacity(outcome.artifacts.len());
    for (file, bytes) in &outcome.artifacts {
        write_atomic(&dir.join(file), bytes)?;
        artifacts.push(Artifact {
            file: file.clone(),
            bytes: bytes.len(),
        });
    }
    let report = ExperimentReport {
        kind: config.kind,
        config: config.clone(),
        metrics: outcome.metrics,
        details: outcome.details,
        artifacts,
        wall_clock_seconds: elapsed,
        library_version: tslab_core::VERSION.to_string(),
        generator: GENERATOR.to_string(),
    };
    let mut json = serde_json::to_vec_pretty(&report).expect("report serialises");
    json.push(b'\n');
    write_atomic(&dir.join(REPORT_FILE), &json)?;
    Ok(report)
}

/// Reads, validates and runs the config at `path`.
///
/// `seed` and `output_dir` override the values in the document.
pub fn run(path: &Path, seed: Option<u64>, output_dir: Option<PathBuf>) -> Result<ExperimentReport, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(|source| RunError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    execute(&config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("a.csv");
        write_atomic(&target, b"x,y\n").unwrap();
        write_atomic(&target, b"x,y\n1,2\n").unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"x,y\n1,2\n");
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.csv")]);
    }
}
