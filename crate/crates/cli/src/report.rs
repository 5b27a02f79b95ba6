//! Machine-readable run summaries.

use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct GainsReport {
    pub kv: f64,
    pub kw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GovernorReport {
    pub k_eps: f64,
    pub k_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub method: String,
    pub mode: String,
    pub gains: GainsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub governor: Option<GovernorReport>,
    pub travel_time: f64,
    pub average_speed: f64,
    pub min_clearance: f64,
    pub turning_signed: f64,
    pub turning_absolute: f64,
    pub terminal_position_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_param_gap: Option<f64>,
    pub reached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stalled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reachable_chain_cap: Option<usize>,
    pub tool_version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub order: usize,
    pub weights: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub grid_size: usize,
    pub multistart: usize,
    pub seed: u64,
    pub fits: Vec<FitRow>,
    pub tool_version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionSummary {
    pub method: String,
    pub radius_about_goal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_space_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub mode: String,
    pub gains: GainsReport,
    pub predictions: Vec<PredictionSummary>,
    pub tool_version: String,
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}
