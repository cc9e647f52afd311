use std::path::Path;

use serde::Serialize;

use pjfit_core::domain::DatasetReport;
use pjfit_core::error::{Error, Result};
use pjfit_core::metrics::MetricReport;
use pjfit_core::model::ModelConfig;
use pjfit_core::training::TrainConfig;

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Machine-readable run report. Contains no timestamps, so reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub model: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    /// Test metrics; absent when the dataset has no test pairs.
    pub metrics: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
    pub dataset: DatasetReport,
}

#[derive(Debug, Serialize)]
pub struct TrainingSummary {
    pub batches: usize,
    pub initial_batch_loss: f64,
    pub final_batch_loss: f64,
    pub probe_loss_before: f64,
    pub probe_loss_after: f64,
    pub skipped_positives: usize,
    pub loss_trace: Vec<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
