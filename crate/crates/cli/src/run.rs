//! Content-addressed run directories and their manifests.
//!
//! ```text
//! <out>/<config hash>/
//!     config.toml      normalized config; its SHA-256 is the directory name
//!     manifest.json    RunManifest
//!     *.csv            columnar series
//!     *.fmf            optional binary snapshots
//! ```
//!
//! A run is assembled in `<out>/.tmp-*` and renamed into place, so the
//! output root never holds a partial manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use flockmf::io::{write_snapshot, Table};
use flockmf::AgentEnsemble;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

/// One numeric claim with its tolerance and the envelope it was checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: String,
    pub envelope: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, tolerance: impl Into<String>, envelope: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value, tolerance: tolerance.into(), envelope: envelope.into() }
    }

    /// `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64, envelope: impl Into<String>) -> Self {
        Self::new(name, value <= bound, value, format!("<= {bound}"), envelope)
    }

    /// `lo <= value <= hi`.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64, envelope: impl Into<String>) -> Self {
        Self::new(name, value >= lo && value <= hi, value, format!("in [{lo}, {hi}]"), envelope)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: value {:e}, tolerance {}, envelope {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.envelope
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub experiment: String,
    pub code_version: String,
    pub seed: u64,
    pub threads: usize,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub files: Vec<FileEntry>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub failure: Option<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST)).map_err(|e| CliError::io(dir.join(MANIFEST), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(e.to_string()))
    }

    /// Combined digest of every produced file; equal across reruns of the
    /// same config.
    pub fn output_digest(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.path.as_bytes());
            h.update(f.sha256.as_bytes());
        }
        hex(&h.finalize())
    }
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Run directory under construction.
pub struct Staging {
    dir: tempfile::TempDir,
    files: Vec<FileEntry>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let dir = tempfile::Builder::new().prefix(".tmp-").tempdir_in(out).map_err(|e| CliError::io(out, e))?;
        Ok(Staging { dir, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.path().join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.files.push(FileEntry { path: name.into(), bytes: bytes.len() as u64, sha256: hex(&Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let text = table.render()?;
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_snapshot(&mut self, name: &str, ens: &AgentEnsemble) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, ens)?;
        self.write_bytes(name, &buf)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes the manifest last and moves the directory to `target`.
    /// An existing `target` is replaced.
    pub fn commit(self, manifest: &RunManifest, target: &Path) -> Result<PathBuf, CliError> {
        let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Manifest(e.to_string()))?;
        let mp = self.dir.path().join(MANIFEST);
        fs::write(&mp, json).map_err(|e| CliError::io(&mp, e))?;
        if target.exists() {
            let trash = tempfile::Builder::new()
                .prefix(".old-")
                .tempdir_in(target.parent().unwrap_or(Path::new(".")))
                .map_err(|e| CliError::io(target, e))?;
            fs::rename(target, trash.path().join("run")).map_err(|e| CliError::io(target, e))?;
        }
        let staged = self.dir.keep();
        fs::rename(&staged, target).map_err(|e| CliError::io(target, e))?;
        Ok(target.to_path_buf())
    }
}

/// Directory of `cfg` below `out`.
pub fn run_dir(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(&cfg.hash()[..16])
}
