//! Experiment runner for the flocking model: configs, reproducible run
//! directories, plot data and the acceptance suites.

use std::path::{Path, PathBuf};

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod run;

use config::{ConfigError, ExperimentConfig};
use run::{now, run_dir, RunManifest, Staging, CONFIG};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] flockmf::Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("missing input: {0}")]
    MissingInput(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, e: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), message: e.to_string() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Recompute even if a finished run directory exists.
    pub force: bool,
}

/// Runs `cfg` into `<out>/<hash>/` and returns the manifest and directory.
///
/// A finished directory is reused unless `opts.force` is set. An
/// experiment error still produces a manifest, with `failure` set.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: &RunOptions) -> Result<(RunManifest, PathBuf), CliError> {
    cfg.validate()?;
    let target = run_dir(out, cfg);
    if !opts.force && target.join(run::MANIFEST).exists() {
        if let Ok(m) = RunManifest::load(&target) {
            return Ok((m, target));
        }
    }
    let threads = cfg.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::MissingInput(format!("thread pool: {e}")))?;
    let hash = cfg.hash();
    let mut staging = Staging::new(out)?;
    staging.write_bytes(CONFIG, cfg.normalized().as_bytes())?;
    let started = now();
    let result = pool.install(|| experiments::execute(cfg));
    let (checks, failure) = match result {
        Ok(outputs) => {
            for (name, table) in outputs.tables {
                let mut t = table;
                let mut meta = vec![
                    ("config_hash".to_string(), hash.clone()),
                    ("experiment".to_string(), cfg.experiment.name().to_string()),
                    ("units".to_string(), "nondimensional model units".to_string()),
                ];
                meta.append(&mut t.meta);
                t.meta = meta;
                staging.write_table(&name, &t)?;
            }
            for (name, ens) in &outputs.snapshots {
                staging.write_snapshot(name, ens)?;
            }
            (outputs.checks, None)
        }
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let passed = failure.is_none() && checks.iter().all(|c| c.passed);
    let manifest = RunManifest {
        config_hash: hash,
        experiment: cfg.experiment.name().into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        threads,
        started,
        finished: now(),
        files: staging.files().to_vec(),
        checks,
        passed,
        failure,
    };
    let dir = staging.commit(&manifest, &target)?;
    Ok((manifest, dir))
}
