//! Artifact directory: atomic writes, content hashes and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::AppError;

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const GAP_TABLE: &str = "gap_thresholds.csv";
pub const PAIRS: &str = "pairs.csv";
pub const PAIR_SUMMARY: &str = "pair_summary.csv";
pub const FILTER_LEDGER: &str = "filter_ledger.json";
pub const STAGE_SUMMARY: &str = "stage_summary.csv";
pub const CATEGORY_STATS: &str = "category_stats.json";
/// Survivors of the filter pipeline, before manual review.
pub const FILTERED: &str = "filtered_pairs.csv";
/// Survivors after review; equal to [`FILTERED`] until a review is applied.
pub const RETAINED: &str = "retained_pairs.csv";
pub const WAVELET: &str = "wavelet.json";
pub const METRICS: &str = "metrics.csv";
pub const STAGE_METRICS: &str = "stage_metrics.csv";
pub const IMPROVEMENT: &str = "improvement.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const WEIGHT_HISTOGRAM: &str = "weight_histogram.csv";
pub const DOSSIERS: &str = "dossiers";
pub const REVIEW_LEDGER: &str = "review_ledger.json";
pub const SYNTH_TRAJECTORIES: &str = "synthetic_trajectories.csv";
pub const SYNTH_LABELS: &str = "synthetic_labels.json";
pub const REPORT: &str = "report.md";
pub const MANIFESTS: &str = "manifests";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Artifact name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// One subcommand's view of the artifact directory. Reads and writes are
/// recorded for the manifest.
pub struct Workspace {
    root: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace {
            root: root.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Reads an artifact produced by an earlier subcommand.
    pub fn read(&mut self, name: &str) -> Result<Vec<u8>, AppError> {
        let bytes = read_input(&self.path(name))?;
        self.inputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Reads a file outside the artifact directory, recorded under `label`.
    pub fn read_external(&mut self, label: &str, path: &Path) -> Result<Vec<u8>, AppError> {
        let bytes = read_input(path)?;
        self.inputs.insert(label.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), AppError> {
        let path = self.path(name);
        write_atomic(&path, bytes).map_err(|e| AppError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), AppError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| AppError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Renders a CSV through `f` into memory, then writes it atomically.
    pub fn write_csv<F>(&mut self, name: &str, f: F) -> Result<(), AppError>
    where
        F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| AppError::Runtime(format!("{name}: {e}")))?;
        self.write(name, &buf)
    }

    pub fn outputs(&self) -> &BTreeMap<String, String> {
        &self.outputs
    }

    /// Writes `manifests/<subcommand>.json` and returns its path.
    pub fn finish(
        self,
        subcommand: &str,
        config_sha256: String,
        seed: u64,
        preset: Option<String>,
    ) -> Result<PathBuf, AppError> {
        let m = Manifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            seed,
            preset,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.root.join(MANIFESTS).join(format!("{subcommand}.json"));
        let mut bytes = serde_json::to_vec_pretty(&m).map_err(|e| AppError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes).map_err(|e| AppError::io(&path, e))?;
        Ok(path)
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, AppError> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(AppError::MissingInput(path.to_path_buf())),
        Err(e) => Err(AppError::io(path, e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn missing_artifact_is_distinguished() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::new(dir.path());
        assert!(matches!(ws.read(PAIRS), Err(AppError::MissingInput(_))));
    }

    #[test]
    fn manifest_records_hashes_without_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::new(dir.path());
        ws.write("x.csv", b"a,b\n").unwrap();
        let path = ws.finish("demo", "abc".into(), 7, None).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
        assert_eq!(v["outputs"]["x.csv"], sha256_hex(b"a,b\n"));
        assert_eq!(v["seed"], 7);
        assert_eq!(
            v.as_object().unwrap().keys().cloned().collect::<Vec<_>>(),
            ["config_sha256", "inputs", "outputs", "seed", "subcommand", "version"]
        );
    }
}
