//! Experiment configuration: a single JSON document.

use std::path::Path;

use rauzy_spectra::dioph::QuadraticReal;
use rauzy_spectra::iet::{Permutation, StepKind};
use rauzy_spectra::substitution::is_simple;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "RAUZY_SPECTRA_SEED";

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default = "d_omega_count")]
    pub omega_count: usize,
    #[serde(default = "d_r_min")]
    pub r_min: f64,
    #[serde(default = "d_r_max")]
    pub r_max: f64,
    #[serde(default = "d_r_count")]
    pub r_count: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { omega_count: d_omega_count(), r_min: d_r_min(), r_max: d_r_max(), r_count: d_r_count() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SalemConfig {
    #[serde(default = "d_lambda")]
    pub lambda: String,
    #[serde(default = "d_alpha")]
    pub alpha: String,
    #[serde(default = "d_salem_n")]
    pub n: usize,
}

impl Default for SalemConfig {
    fn default() -> Self {
        SalemConfig { lambda: d_lambda(), alpha: d_alpha(), n: d_salem_n() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_schema")]
    pub schema: u32,
    #[serde(default = "d_pipeline")]
    pub pipeline: String,
    /// One-based permutation, e.g. `[4, 3, 2, 1]`.
    pub permutation: Vec<usize>,
    pub seed: u64,
    #[serde(default = "d_n_steps")]
    pub n_steps: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Canonical levels per scan sample.
    #[serde(default = "d_levels")]
    pub levels: usize,
    #[serde(default = "d_ek_levels")]
    pub ek_levels: usize,
    /// Canonical levels sampled for step-norm statistics.
    #[serde(default = "d_w_levels")]
    pub w_levels: usize,
    #[serde(rename = "B", default = "d_b")]
    pub b: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "d_precision_bits")]
    pub precision_bits: u64,
    #[serde(default = "d_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "d_checkpoint")]
    pub checkpoint_every: usize,
    /// Level-0 coefficients of the observable; empty selects the default.
    #[serde(default)]
    pub observable: Vec<f64>,
    #[serde(default = "d_return_word")]
    pub return_word: String,
    #[serde(default = "d_ek_omega")]
    pub ek_omega: f64,
    #[serde(default)]
    pub salem: SalemConfig,
}

fn d_schema() -> u32 {
    SCHEMA
}
fn d_pipeline() -> String {
    "holder-scan".into()
}
fn d_n_steps() -> usize {
    100_000
}
fn d_samples() -> usize {
    8
}
fn d_levels() -> usize {
    6
}
fn d_ek_levels() -> usize {
    10
}
fn d_w_levels() -> usize {
    256
}
fn d_b() -> f64 {
    4.0
}
fn d_delta() -> f64 {
    0.05
}
fn d_precision_bits() -> u64 {
    4096
}
fn d_output_dir() -> String {
    "out".into()
}
fn d_checkpoint() -> usize {
    8
}
fn d_return_word() -> String {
    "aab".into()
}
fn d_ek_omega() -> f64 {
    1.0
}
fn d_omega_count() -> usize {
    64
}
fn d_r_min() -> f64 {
    1e2
}
fn d_r_max() -> f64 {
    1e5
}
fn d_r_count() -> usize {
    12
}
fn d_lambda() -> String {
    "phi".into()
}
fn d_alpha() -> String {
    "1".into()
}
fn d_salem_n() -> usize {
    40
}

/// Pipelines `run` knows how to execute.
pub const PIPELINES: [&str; 2] = ["holder-scan", "salem"];

impl ExperimentConfig {
    /// Parses and validates; `seed_override` (normally the environment
    /// variable) replaces the seed before validation.
    pub fn from_json(text: &str, seed_override: Option<&str>) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = seed_override {
            cfg.seed = s.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not a u64")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<&str>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, seed_override)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema != SCHEMA {
            return bad(format!("schema {} is not supported (expected {SCHEMA})", self.schema));
        }
        if !PIPELINES.contains(&self.pipeline.as_str()) {
            return bad(format!("unknown pipeline {:?}; known: {}", self.pipeline, PIPELINES.join(", ")));
        }
        let pi = self.permutation()?;
        if !(self.b > 1.0) {
            return bad(format!("B = {} must exceed 1", self.b));
        }
        if !(self.delta > 0.0 && self.delta < (-1.0f64).exp()) {
            return bad(format!("delta = {} must lie in (0, 1/e)", self.delta));
        }
        if self.checkpoint_every == 0 || self.n_steps < 10 * self.checkpoint_every {
            return bad(format!("n_steps = {} must be at least 10 checkpoints of {}", self.n_steps, self.checkpoint_every));
        }
        let g = &self.grids;
        if !(g.r_min > 0.0 && g.r_max >= 100.0 * g.r_min) || g.r_count < 8 {
            return bad("R grid must span two decades with at least 8 points".into());
        }
        if g.omega_count == 0 {
            return bad("omega_count must be positive".into());
        }
        if self.samples == 0 || self.levels == 0 || self.ek_levels < 3 || self.w_levels == 0 {
            return bad("samples, levels and w_levels must be positive, ek_levels at least 3".into());
        }
        if !self.observable.is_empty() && self.observable.len() != pi.len() {
            return bad(format!("observable has {} coefficients for {} letters", self.observable.len(), pi.len()));
        }
        let q = self.return_word()?;
        if !is_simple(&q) {
            return bad(format!("return word {:?} is not simple", self.return_word));
        }
        if !(self.ek_omega > 0.0 && self.ek_omega.is_finite()) {
            return bad("ek_omega must be positive".into());
        }
        self.salem_params()?;
        Ok(())
    }

    pub fn permutation(&self) -> Result<Permutation, CliError> {
        Permutation::new(self.permutation.clone()).map_err(|e| CliError::Config(format!("permutation: {e}")))
    }

    pub fn return_word(&self) -> Result<Vec<StepKind>, CliError> {
        let q = StepKind::parse_word(&self.return_word).map_err(|e| CliError::Config(format!("return_word: {e}")))?;
        if q.is_empty() {
            return Err(CliError::Config("return_word is empty".into()));
        }
        Ok(q)
    }

    pub fn salem_params(&self) -> Result<(QuadraticReal, QuadraticReal), CliError> {
        let p = |t: &str| t.parse::<QuadraticReal>().map_err(|e| CliError::Config(format!("salem: {e}")));
        Ok((p(&self.salem.lambda)?, p(&self.salem.alpha)?))
    }

    /// Level-0 observable coefficients.
    pub fn observable(&self, m: usize) -> Vec<f64> {
        if !self.observable.is_empty() {
            return self.observable.clone();
        }
        let base = [1.0, -0.5, 0.25, 0.75];
        (0..m).map(|i| base[i % base.len()]).collect()
    }

    /// Hex SHA-256 of the effective configuration's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
