//! Artifact persistence: atomic file writes with SHA-256 checksums, CSV
//! formatting at full round-trip precision, and the run manifest.
//!
//! Every artifact lands via a temp file plus rename in the same directory,
//! so a crash never leaves a half-written file under its final name. The
//! manifest is written last and lists every artifact with its checksum; its
//! presence marks a completed run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{BcsError, Result};

/// Full round-trip decimal form of an f64: 17 significant digits in
/// scientific notation, so parsing the field back recovers the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Assemble a CSV document: header row, one row per item, LF line endings,
/// trailing newline.
pub fn csv_document<I>(header: &str, rows: I) -> String
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut doc = String::with_capacity(1024);
    doc.push_str(header);
    doc.push('\n');
    for row in rows {
        doc.push_str(row.as_ref());
        doc.push('\n');
    }
    doc
}

/// One persisted artifact as the manifest lists it.
#[derive(Clone, Debug, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything the manifest records besides the artifacts themselves.
#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    /// Subcommand that produced the run.
    pub command: String,
    /// Verbatim text of the config file.
    pub config_text: String,
    /// Parsed config after defaults, as structured data.
    pub config: serde_json::Value,
    /// Seed flag echo; only randomized harnesses consume it.
    pub seed: Option<u64>,
    /// Thread-count flag echo; parallelism never changes emitted bytes.
    pub threads: Option<usize>,
}

/// The trailing manifest tying a run directory together.
#[derive(Debug, Serialize)]
pub struct ResultManifest {
    pub command: String,
    pub library_version: String,
    pub wall_ms: u64,
    pub config_text: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Per-solve convergence flags keyed by artifact or stage name.
    pub convergence: BTreeMap<String, bool>,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Single writer for one run directory. Collects checksums and convergence
/// flags as artifacts are written; `finish` emits the manifest last.
pub struct ArtifactWriter {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
    convergence: BTreeMap<String, bool>,
    started: Instant,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            records: Vec::new(),
            convergence: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn checked_name(&self, name: &str) -> Result<PathBuf> {
        let plain = !name.is_empty()
            && !name.contains(['/', '\\'])
            && name != "."
            && name != ".."
            && name != "manifest.json";
        if !plain {
            return Err(BcsError::InvalidInput(format!(
                "artifact name {name:?} must be a plain file name"
            )));
        }
        Ok(self.dir.join(name))
    }

    /// Write one artifact atomically and record its checksum.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.checked_name(name)?;
        write_atomic(&path, bytes)?;
        self.records.push(ArtifactRecord {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Serialize `value` as pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)
            .map_err(|e| BcsError::Numeric(format!("json serialization: {e}")))?;
        body.push('\n');
        self.write_text(name, &body)
    }

    /// Record a convergence flag under a stable key.
    pub fn record_convergence(&mut self, key: &str, converged: bool) {
        self.convergence.insert(key.to_string(), converged);
    }

    /// Write `manifest.json` last and return the manifest. Fails if any
    /// recorded artifact has disappeared.
    pub fn finish(self, meta: RunMeta) -> Result<ResultManifest> {
        for record in &self.records {
            if !self.dir.join(&record.name).is_file() {
                return Err(BcsError::Numeric(format!(
                    "artifact {} vanished before the manifest was written",
                    record.name
                )));
            }
        }
        let ArtifactWriter {
            dir,
            records,
            convergence,
            started,
        } = self;
        let manifest = ResultManifest {
            command: meta.command,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_ms: started.elapsed().as_millis() as u64,
            config_text: meta.config_text,
            config: meta.config,
            seed: meta.seed,
            threads: meta.threads,
            convergence,
            artifacts: records,
        };
        let mut body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| BcsError::Numeric(format!("manifest serialization: {e}")))?;
        body.push('\n');
        write_atomic(&dir.join("manifest.json"), body.as_bytes())?;
        Ok(manifest)
    }
}

/// Temp file plus rename in the target's own directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}
