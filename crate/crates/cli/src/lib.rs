//! Batch front-end for `abelkern`: configuration, jobs and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod jobs;
pub mod validate;

use serde::Serialize;
use std::path::{Path, PathBuf};

pub use config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical guard: {0}")]
    Numerical(abelkern_core::Error),
    #[error("{0}")]
    Core(abelkern_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<abelkern_core::Error> for CliError {
    fn from(e: abelkern_core::Error) -> Self {
        if e.is_numerical_guard() {
            CliError::Numerical(e)
        } else {
            CliError::Core(e)
        }
    }
}

impl CliError {
    /// 0 ok, 1 validation failure, 2 configuration error, 3 numerical guard.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Core(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Files of one run, written together once the job has finished.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    artifacts: Vec<String>,
    results: R,
}

/// Result of a finished job: artifacts plus whether its checks passed.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub passed: bool,
    pub summary: String,
}

pub(crate) fn finish<R: Serialize>(
    cfg: &RunConfig,
    mut artifacts: Artifacts,
    results: R,
    passed: bool,
    summary: String,
) -> Result<Outcome, CliError> {
    let mut names = artifacts.names();
    names.push("manifest.json".into());
    let manifest = Manifest {
        tool: "abelkern",
        version: VERSION,
        config: cfg,
        artifacts: names,
        results,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    json.push(b'\n');
    artifacts.add("manifest.json", json);
    Ok(Outcome {
        artifacts,
        passed,
        summary,
    })
}

/// Runs a validated configuration without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match cfg.job {
        config::JobKind::Kernel => jobs::kernel(cfg),
        config::JobKind::Sup => jobs::sup(cfg),
        config::JobKind::Dsum => jobs::dsum(cfg),
        config::JobKind::Convergence => jobs::convergence(cfg),
        config::JobKind::Validate => validate::job(cfg),
    }
}

/// Runs `cfg` and writes its artifacts to `cfg.output`. A failed check still
/// writes the artifacts before reporting the failure.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let outcome = execute(cfg)?;
    outcome.artifacts.write_all(&cfg.output)?;
    if !outcome.passed {
        return Err(CliError::Validation(outcome.summary));
    }
    Ok(outcome)
}

/// Sets the global rayon pool size from `ABELKERN_THREADS` when present.
pub fn configure_threads() -> Result<(), CliError> {
    match std::env::var("ABELKERN_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("ABELKERN_THREADS: `{v}` is not a thread count")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("ABELKERN_THREADS: {e}")))
        }
        Err(_) => Ok(()),
    }
}
