//! Run configuration: one JSON document shared by every subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AppError;
use crate::evalmod::EvalSettings;
use crate::fdgap::{FdParams, FdTable};
use crate::filters::{Preset, StageSpec, Thresholds};
use crate::pairing::PairingCriteria;
use crate::synthgen::SynthConfig;
use crate::trajmodel::{IngestConfig, VehicleClass};
use crate::wavecorr::WaveletConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Raw trajectory CSV read by `ingest`. Relative paths resolve against
    /// the directory of the config file.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Artifact directory. Relative paths resolve like `input`.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub ingest: IngestConfig,
    /// Per-class fundamental-diagram parameters replacing the built-in fit.
    #[serde(default)]
    pub fd: BTreeMap<VehicleClass, FdOverride>,
    #[serde(default)]
    pub pairing: PairingCriteria,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub wavelet: WaveletConfig,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub synth: SynthConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out_dir: default_out_dir(),
            ingest: IngestConfig::default(),
            fd: BTreeMap::new(),
            pairing: PairingCriteria::default(),
            thresholds: Thresholds::default(),
            pipeline: PipelineConfig::default(),
            wavelet: WaveletConfig::default(),
            eval: EvalSettings::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FdOverride {
    /// Backward wave speed, km/h.
    pub w: f64,
    /// Jam density, veh/km.
    pub k_j: f64,
}

/// Filter stages: a named preset, or an explicit list that takes precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub preset: Preset,
    pub stages: Option<Vec<StageSpec>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preset: Preset::Approach4,
            stages: None,
        }
    }
}

impl PipelineConfig {
    pub fn stages(&self) -> Vec<StageSpec> {
        self.stages.clone().unwrap_or_else(|| self.preset.stages())
    }
}

fn invalid(path: &str, e: impl std::fmt::Display) -> AppError {
    AppError::Config {
        path: path.to_string(),
        message: e.to_string(),
    }
}

impl RunConfig {
    /// Parses and validates a config document. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<RunConfig, AppError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "$" } else { &path }, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative `input` and `out_dir` are anchored at its directory.
    pub fn load(path: &Path) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("$", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(input) = &cfg.input {
            if input.is_relative() {
                cfg.input = Some(base.join(input));
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.ingest.dt > 0.0 && self.ingest.dt.is_finite()) {
            return Err(invalid("ingest.dt", "must be positive"));
        }
        for (class, o) in &self.fd {
            FdParams::new(*class, o.w, o.k_j).map_err(|e| invalid(&format!("fd.{class}"), e))?;
        }
        let p = &self.pairing;
        if !(p.max_gap > 0.0 && p.max_gap.is_finite()) {
            return Err(invalid("pairing.max_gap", "must be positive"));
        }
        if !(p.min_duration > 0.0 && p.min_duration.is_finite()) {
            return Err(invalid("pairing.min_duration", "must be positive"));
        }
        self.thresholds.validate().map_err(|e| invalid("thresholds", e))?;
        self.wavelet.validate().map_err(|e| invalid("wavelet", e))?;
        if let Some(stages) = &self.pipeline.stages {
            if stages.is_empty() {
                return Err(invalid("pipeline.stages", "must not be empty"));
            }
        }
        let e = &self.eval;
        if e.k < 2 {
            return Err(invalid("eval.k", "need at least 2 folds"));
        }
        let steps = e.tau / self.ingest.dt;
        if !(e.tau >= 0.0 && (steps - steps.round()).abs() < 1e-9) {
            return Err(invalid("eval.tau", "must be a non-negative multiple of ingest.dt"));
        }
        self.synth.validate().map_err(|e| invalid("synth", e))?;
        Ok(())
    }

    /// Built-in parameters with the configured classes replaced.
    pub fn fd_table(&self) -> FdTable {
        let mut t = FdTable::default();
        for (class, o) in &self.fd {
            t.0.insert(*class, FdParams::new(*class, o.w, o.k_j).expect("validated"));
        }
        t
    }

    /// SHA-256 of the config with paths cleared, so relocating a run keeps
    /// its identity.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.input = None;
        c.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_path(text: &str) -> String {
        match RunConfig::from_json(text) {
            Err(AppError::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_field_is_reported_with_path() {
        assert_eq!(err_path(r#"{"thresholds": {"defaults": {"rel_vel_max": 2}}}"#), "thresholds.defaults.rel_vel_max");
        assert_eq!(err_path(r#"{"bogus": 1}"#), "bogus");
    }

    #[test]
    fn wrong_type_is_reported_with_path() {
        assert_eq!(err_path(r#"{"pairing": {"max_gap": "far"}}"#), "pairing.max_gap");
    }

    #[test]
    fn semantic_errors_name_the_section() {
        assert_eq!(err_path(r#"{"thresholds": {"defaults": {"pct_low": 99}}}"#), "thresholds");
        assert_eq!(err_path(r#"{"eval": {"tau": 0.3}}"#), "eval.tau");
        assert_eq!(err_path(r#"{"fd": {"CAR": {"w": -1, "k_j": 100}}}"#), "fd.CAR");
    }

    #[test]
    fn explicit_stages_override_preset() {
        let cfg = RunConfig::from_json(
            r#"{"pipeline": {"preset": "approach1", "stages": [
                {"stage": "stage1", "confirm": ["REL_VEL_EXCESS"]},
                {"stage": "stage2"},
                {"stage": "wavelet", "min_matches": 2}
            ]}}"#,
        )
        .unwrap();
        let stages = cfg.pipeline.stages();
        assert_eq!(stages.len(), 3);
        assert_eq!(stages[2], StageSpec::Wavelet { min_matches: Some(2) });
    }

    #[test]
    fn fd_override_replaces_one_class() {
        let cfg = RunConfig::from_json(r#"{"fd": {"TW": {"w": 20, "k_j": 300}}}"#).unwrap();
        let t = cfg.fd_table();
        assert_eq!(t.get(VehicleClass::Tw).unwrap().w, 20.0);
        assert_eq!(t.get(VehicleClass::Car).unwrap(), &FdParams::default_for(VehicleClass::Car));
    }

    #[test]
    fn digest_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.input = Some("x.csv".into());
        assert_eq!(a.digest(), b.digest());
        b.eval.seed = 99;
        assert_ne!(a.digest(), b.digest());
    }
}
