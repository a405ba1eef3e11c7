//! Artifact writers: RFC-4180 CSV, pretty JSON, the run manifest and the profile cache.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ksd_core::RadialProfile;

use crate::config::{hex, RunConfig};
use crate::error::CliError;

/// Bumped on any breaking change to artifact layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

/// A table held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CRLF-terminated, minimally quoted.
    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
    }
}

/// Collects the files a run writes, with their digests.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    pub written: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

impl ArtifactSink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_owned(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.retain(|r| r.file != name);
        self.written.push(ArtifactRecord { file: name.to_owned(), sha256: hex(&Sha256::digest(bytes)), bytes: bytes.len() });
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        self.write_bytes(name, &table.to_bytes()?)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub library_version: String,
    pub cli_version: String,
    pub threads: usize,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    /// `(stage, seconds)` in execution order.
    pub stages: Vec<(String, f64)>,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheFile {
    format_version: u32,
    /// Hash of the inputs the profile depends on.
    key: String,
    /// SHA-256 of `payload`.
    checksum: String,
    payload: String,
}

/// Key identifying a cached profile: params and tolerances.
pub fn cache_key(cfg: &RunConfig) -> String {
    let material = serde_json::json!({
        "mu": cfg.params.mu,
        "j0": cfg.params.j0,
        "qj0": cfg.params.qj0,
        "tol": cfg.numerics.tol,
        "series_tol": cfg.numerics.series_tol,
        "r_max": cfg.numerics.r_max,
        "library": ksd_core::VERSION,
    });
    hex(&Sha256::digest(material.to_string().as_bytes()))
}

pub fn encode_profile_cache(key: &str, profile: &RadialProfile) -> Result<Vec<u8>, CliError> {
    let payload = serde_json::to_string(profile)?;
    let file = CacheFile {
        format_version: CACHE_FORMAT_VERSION,
        key: key.to_owned(),
        checksum: hex(&Sha256::digest(payload.as_bytes())),
        payload,
    };
    Ok(serde_json::to_vec(&file)?)
}

/// `Ok(None)` when the cache is absent or was built for other inputs; an error
/// when it is present but corrupt.
pub fn read_profile_cache(path: &Path, key: &str) -> Result<Option<RadialProfile>, CliError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CliError::io(path, e)),
    };
    let bad = |message: String| CliError::Cache { path: path.to_owned(), message };
    let file: CacheFile = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    if file.format_version != CACHE_FORMAT_VERSION {
        return Ok(None);
    }
    if hex(&Sha256::digest(file.payload.as_bytes())) != file.checksum {
        return Err(bad("checksum mismatch".into()));
    }
    if file.key != key {
        return Ok(None);
    }
    serde_json::from_str(&file.payload).map(Some).map_err(|e| bad(e.to_string()))
}
