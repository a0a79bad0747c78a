//! Configuration files. Every file carries `schema_version`; unknown fields
//! are rejected so a typo cannot silently change a run.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wavespec::bcinverse::ModelOptions;
use wavespec::finmetric::GraphInput;
use wavespec::greensys::ModelSpec;
use wavespec::wavespectrum::PipelineOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Response operator on `[0, 2T]`.
    Ip1,
    /// Truncated eigenvalues and boundary traces.
    Ip3,
    /// Metric inflation of the model's point set.
    Geometric,
}

/// Forward scenario, read by `simulate` and `respond`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub route: Route,
    /// Control time `T`; the response is recorded on `[0, 2T]`.
    pub horizon: f64,
    /// Time step; defaults to the model's step adjusted to put a node on `T`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub basis: BasisConfig,
    /// Number of eigenpairs kept on the spectral route; all by default.
    #[serde(default)]
    pub modes: Option<usize>,
    /// Groups of boundary channels reconstructed as separate patches.
    #[serde(default)]
    pub patches: Vec<Vec<usize>>,
    /// Horizon of nests in the generated reconstruction config.
    #[serde(default)]
    pub nest_horizon: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Bump derivatives spanning the controls of the connecting operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub spacing: f64,
    pub half_width: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { spacing: 0.05, half_width: 0.1 }
    }
}

/// Blind reconstruction, read by `reconstruct`. It names data files only.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub schema_version: u32,
    pub route: Route,
    /// Response header (`ip1`) or spectral CSV (`ip3`), relative to this file.
    pub data: String,
    /// Optional reference for the isometry report, relative to this file.
    #[serde(default)]
    pub reference: Option<String>,
    /// Grid cell used for nest steps and error units.
    pub cell: f64,
    /// Horizon of nests and inflations.
    pub horizon: f64,
    #[serde(default)]
    pub patches: Vec<Vec<usize>>,
    #[serde(default = "default_model_options")]
    pub model: ModelOptions,
    /// Full pipeline settings; derived from `cell` and `horizon` when absent.
    #[serde(default)]
    pub pipeline: Option<PipelineOptions>,
    /// Boundary functions for `ip3`, one per column; identity when absent.
    #[serde(default)]
    pub boundary: Option<Vec<Vec<f64>>>,
    /// Largest accepted RMSE in cells.
    #[serde(default = "default_rmse_limit")]
    pub rmse_limit: f64,
}

fn default_model_options() -> ModelOptions {
    ModelOptions { rank_cutoff: 1e-6, min_rank: 1 }
}

fn default_rmse_limit() -> f64 {
    2.0
}

/// Geometric spectrum of a weighted graph or of a model's point set.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub graph: Option<GraphInput>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

fn default_rounds() -> usize {
    64
}

/// Reference metric written next to the data, for scoring only.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub cell: f64,
    /// Labels of the reference points (classes of symmetric points are joined by `+`).
    pub ids: Vec<String>,
    pub distance: Vec<Vec<f64>>,
    pub boundary: Vec<bool>,
}

/// A configuration or usage problem; exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let version: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    match version.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(ConfigError(format!("{}: field `schema_version`: unsupported version {v}", path.display()))),
        None => return Err(ConfigError(format!("{}: missing field `schema_version`", path.display()))),
    }
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Resolves `rel` against the directory of `config`.
pub fn resolve(config: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn in_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ConfigError(format!("field `{name}`: tolerance must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError(format!("field `{name}`: must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("horizon", self.horizon)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        positive("basis.spacing", self.basis.spacing)?;
        positive("basis.half_width", self.basis.half_width)?;
        if let Some(h) = self.nest_horizon {
            positive("nest_horizon", h)?;
        }
        if self.modes == Some(0) {
            return Err(ConfigError("field `modes`: must be positive".into()));
        }
        self.model.validate().map_err(|e| ConfigError(format!("field `model`: {e}")))
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.route == Route::Geometric {
            return Err(ConfigError("field `route`: reconstruction needs `ip1` or `ip3`".into()));
        }
        positive("cell", self.cell)?;
        positive("horizon", self.horizon)?;
        positive("rmse_limit", self.rmse_limit)?;
        in_unit("model.rank_cutoff", self.model.rank_cutoff)?;
        if let Some(p) = &self.pipeline {
            in_unit("pipeline.nest_tol", p.nest_tol)?;
            in_unit("pipeline.spectrum.tol", p.spectrum.tol)?;
            positive("pipeline.step", p.step)?;
            positive("pipeline.horizon", p.horizon)?;
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineOptions {
        self.pipeline.clone().unwrap_or_else(|| PipelineOptions::for_cell(self.cell, self.horizon))
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.graph, &self.model) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(ConfigError("exactly one of the fields `graph` and `model` is required".into())),
        }
    }
}
