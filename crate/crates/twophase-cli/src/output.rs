//! Deterministic report files. Every CSV starts with a `#` manifest line and
//! every JSON file wraps its payload as `{"manifest": ..., "report": ...}`;
//! `manifest.json` lists all files of a run with their SHA-256.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Index<'a> {
    manifest: &'a Manifest,
    config: &'a RunConfig,
    files: Vec<FileEntry>,
    pass: Option<bool>,
}

/// Collects output files for one command run.
pub struct OutputDir {
    dir: PathBuf,
    pub manifest: Manifest,
    files: Vec<FileEntry>,
}

/// One CSV column of floats; complex quantities are written as `_re`/`_im` pairs.
pub fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        let manifest = Manifest { tool: "twophase", version: VERSION, command: command.into(), seed: cfg.seed, config_sha256: sha256_hex(cfg.canonical_json().as_bytes()) };
        Ok(Self { dir: dir.to_path_buf(), manifest, files: vec![] })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push(FileEntry { name: name.into(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            manifest: &'a Manifest,
            report: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Wrapped { manifest: &self.manifest, report }).map_err(|e| CliError::Failed(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let m = &self.manifest;
        let mut s = format!("# tool={} version={} command={} seed={} config_sha256={}\n", m.tool, m.version, m.command, m.seed, m.config_sha256);
        s.push_str(&header.join(","));
        s.push('\n');
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            let line: Vec<String> = r.iter().map(|v| fmt_float(*v)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    /// Writes `manifest.json` indexing every file written so far.
    pub fn finish(mut self, cfg: &RunConfig, pass: Option<bool>) -> Result<(), CliError> {
        let files = std::mem::take(&mut self.files);
        let index = Index { manifest: &self.manifest, config: cfg, files, pass };
        let mut text = serde_json::to_string_pretty(&index).map_err(|e| CliError::Failed(format!("serializing manifest: {e}")))?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// `["{name}_re", "{name}_im"]`.
pub fn complex_columns(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}
