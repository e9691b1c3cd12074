//! Run a loaded scenario into a directory and re-check a finished run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use coopath_core::metrics::{compute_metrics, Metrics};
use coopath_core::sim::{run_with_clock, RunLog, SimError};

use crate::export::{read_manifest, write_run, write_timing, ExportError, Manifest, Timing};
use crate::scenario::{load_scenario, sha256_hex, LoadError, LoadedScenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub metrics: Metrics,
    pub manifest: Manifest,
    pub timing: Timing,
}

/// Runs the scenario with wall-clock instrumentation and writes every export
/// into `out`.
pub fn run_to_dir(loaded: &LoadedScenario, out: &Path) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let clock = || start.elapsed().as_micros() as u64;
    let log = run_with_clock(&loaded.scenario, &clock)?;
    let metrics = compute_metrics(&log);
    let timing = Timing::new(&log, clock());
    let manifest = write_run(out, loaded, &log, &metrics)?;
    write_timing(out, &timing)?;
    Ok(RunOutput {
        log,
        metrics,
        manifest,
        timing,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read run manifest: {0}")]
    Manifest(ExportError),
    #[error("cannot reload scenario: {0}")]
    Load(#[from] LoadError),
    #[error("{what} {} changed since the run (digest mismatch)", path.display())]
    Changed { what: &'static str, path: PathBuf },
    #[error("re-run failed: {0}")]
    Run(#[from] RunError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileComparison {
    pub name: String,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub files: Vec<FileComparison>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|f| f.identical)
    }
}

/// Reloads the scenario named in the run's manifest, re-runs it with the
/// recorded seed in a scratch directory and compares every reproducible
/// export byte for byte.
pub fn replay_check(run_dir: &Path) -> Result<ReplayReport, ReplayError> {
    let manifest = read_manifest(run_dir).map_err(ReplayError::Manifest)?;
    let mut loaded = load_scenario(&manifest.scenario_path)?;
    if loaded.scenario_sha256 != manifest.scenario_sha256 {
        return Err(ReplayError::Changed {
            what: "scenario",
            path: manifest.scenario_path,
        });
    }
    if loaded.dem_sha256 != manifest.dem_sha256 {
        return Err(ReplayError::Changed {
            what: "elevation file",
            path: manifest.dem_path,
        });
    }
    loaded.scenario.seed = manifest.seed;
    let scratch = tempfile::tempdir().map_err(|source| ReplayError::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let fresh = run_to_dir(&loaded, scratch.path())?;

    let mut names: Vec<&str> = manifest.files.iter().map(|f| f.name.as_str()).collect();
    for f in &fresh.manifest.files {
        if !names.contains(&f.name.as_str()) {
            names.push(&f.name);
        }
    }
    let mut files = Vec::new();
    for name in names {
        let old = std::fs::read(run_dir.join(name)).ok();
        let new = std::fs::read(scratch.path().join(name)).ok();
        let recorded = manifest.files.iter().find(|f| f.name == name);
        let identical = match (&old, &new, recorded) {
            (Some(a), Some(b), Some(r)) => a == b && sha256_hex(a) == r.sha256,
            _ => false,
        };
        files.push(FileComparison {
            name: name.to_string(),
            identical,
        });
    }
    Ok(ReplayReport { files })
}
