//! Report schemas. Field order is fixed by declaration order, so equal
//! inputs serialise to identical bytes.

use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RngInfo {
    pub algorithm: &'static str,
    pub candidate_stream: u64,
    pub family_stream: u64,
    /// Seed of the deletion-family generator, derived from the master seed.
    pub family_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataInfo {
    pub series: Vec<String>,
    pub periods: usize,
    pub tuning_periods: usize,
    pub first_label: String,
    pub last_tuning_label: String,
    pub observed_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorInfo {
    pub kind: &'static str,
    pub t0: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub rescale_weights: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_auto: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_full_columns: Option<bool>,
    /// Number of deletion patterns evaluated per candidate.
    pub patterns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gamma {
    pub p: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl From<&ajk_core::Hyperparameters> for Gamma {
    fn from(h: &ajk_core::Hyperparameters) -> Self {
        Gamma { p: h.p, lambda: h.lambda, alpha: h.alpha, beta: h.beta }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionInfo {
    #[serde(flatten)]
    pub gamma: Gamma,
    pub error: f64,
    pub candidate_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub index: usize,
    pub p: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub error: Option<f64>,
    pub patterns: usize,
    pub failed_patterns: usize,
    pub status: &'static str,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub rng: RngInfo,
    pub data: DataInfo,
    pub estimator: EstimatorInfo,
    pub selection: SelectionInfo,
    pub candidates: usize,
    pub failed_candidates: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesScore {
    pub series: String,
    pub weight: f64,
    pub forecasts: usize,
    pub mse: f64,
    pub random_walk_mse: f64,
    pub relative_mse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub hyperparameters: Gamma,
    pub first_forecast_period: usize,
    pub last_forecast_period: usize,
    pub first_forecast_label: String,
    pub last_forecast_label: String,
    pub weighted_mse: f64,
    pub random_walk_weighted_mse: f64,
    pub relative_weighted_mse: Option<f64>,
    pub per_series: Vec<SeriesScore>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub t: usize,
    pub spectral_radius: f64,
    pub sparsity: f64,
    pub sigma_scale: f64,
    pub burn_in: usize,
    pub missing_fraction: f64,
    pub block_len: usize,
    pub series: Vec<String>,
    /// `n x np` coefficient rows `[Psi_1 ... Psi_p]`.
    pub psi: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}
