//! Python bindings for the person-job fit ranking engine.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pjfit_core::checkpoint::{load_checkpoint, save_checkpoint};
use pjfit_core::domain::{CategoryVocab, DataDir, Dataset, Pair};
use pjfit_core::error::{Error, MetricError};
use pjfit_core::metrics::{self, RankedPrediction};
use pjfit_core::model::{Ablation, ModelConfig, PjfModel};
use pjfit_core::ranking::rank_candidates;
use pjfit_core::synth::{generate_dataset, write_synth, SynthConfig};
use pjfit_core::training::{self, RunConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Data(_) | Error::Metric(_) | Error::Checkpoint(_) | Error::Dimension { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn metric_err(e: MetricError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn check_labels(scores: &[f64], labels: &[u8]) -> PyResult<()> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(PyValueError::new_err("labels must be 0 or 1"));
    }
    Ok(())
}

/// Rank-based AUC; ties count one half.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    check_labels(&scores, &labels)?;
    metrics::auc(&scores, &labels).map_err(metric_err)
}

/// Sample-weighted mean of per-group AUCs; single-class groups are skipped.
#[pyfunction]
fn gauc(scores: Vec<f64>, labels: Vec<u8>, groups: Vec<String>) -> PyResult<f64> {
    check_labels(&scores, &labels)?;
    if groups.len() != scores.len() {
        return Err(PyValueError::new_err("groups and scores differ in length"));
    }
    let preds: Vec<RankedPrediction> = scores
        .iter()
        .zip(&labels)
        .zip(groups)
        .map(|((&score, &label), job_id)| RankedPrediction { candidate_id: String::new(), job_id, score, label })
        .collect();
    metrics::gauc(&preds).map(|g| g.value).map_err(metric_err)
}

#[pyfunction]
fn ndcg(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    check_labels(&scores, &labels)?;
    metrics::ndcg(&scores, &labels).map_err(metric_err)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    check_labels(&scores, &labels)?;
    metrics::average_precision(&scores, &labels).map_err(metric_err)
}

/// Returns `(ctr, cvr, ctcvr)`.
#[pyfunction]
fn ctcvr(pv: u64, clicks: u64, applications: u64) -> PyResult<(f64, f64, f64)> {
    let f = metrics::ctcvr(pv, clicks, applications).map_err(metric_err)?;
    Ok((f.ctr, f.cvr, f.ctcvr))
}

#[pyfunction]
#[pyo3(signature = (pos, neg, lambda_reg = 0.1))]
fn bpr_loss(pos: Vec<f64>, neg: Vec<f64>, lambda_reg: f64) -> PyResult<f64> {
    training::bpr_loss(&pos, &neg, lambda_reg).map(|l| l.loss).map_err(to_py)
}

/// Writes a synthetic dataset directory and returns its metadata.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, config_json = None))]
fn generate_synthetic<'py>(py: Python<'py>, out_dir: PathBuf, seed: u64, config_json: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg: SynthConfig = match config_json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SynthConfig::default(),
    };
    cfg.seed = seed;
    let out = py.detach(|| generate_dataset(&cfg).and_then(|o| write_synth(&o, &out_dir).map(|_| o))).map_err(to_py)?;
    json_to_py(py, &out.metadata)
}

fn load(dir: &PathBuf) -> PyResult<(Dataset, Vec<Pair>)> {
    DataDir::new(dir).load(&CategoryVocab::default(), None).map_err(to_py)
}

/// Trains on a dataset directory, saves a checkpoint and returns the test metrics
/// (or `None` without test pairs).
#[pyfunction]
#[pyo3(signature = (data_dir, checkpoint_out, config_json = None, seed = None, ablation = None))]
fn train<'py>(
    py: Python<'py>,
    data_dir: PathBuf,
    checkpoint_out: PathBuf,
    config_json: Option<&str>,
    seed: Option<u64>,
    ablation: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let (dataset, test) = load(&data_dir)?;
    let mut cfg: RunConfig = match config_json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => RunConfig { model: ModelConfig::for_embedding_dim(dataset.embedding_dim), ..RunConfig::default() },
    };
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(a) = ablation {
        cfg.model.ablation = a.parse::<Ablation>().map_err(to_py)?;
    }
    let dataset = if cfg.model.ablation == Ablation::NoJdAug {
        pjfit_core::augment::restore_original_texts(&dataset)
    } else {
        dataset
    };
    let metrics = py
        .detach(|| {
            let mut out = training::train(&dataset, &cfg.model, &cfg.train)?;
            out.model.store.round_to_f32();
            save_checkpoint(&out.model, &checkpoint_out)?;
            if test.is_empty() {
                Ok(None)
            } else {
                training::evaluate(&out.model, &dataset, &test).map(Some)
            }
        })
        .map_err(to_py)?;
    json_to_py(py, &metrics)
}

/// Evaluates a checkpoint on a dataset directory's test pairs.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, data_dir: PathBuf, checkpoint: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let model = load_checkpoint(&checkpoint).map_err(to_py)?;
    let (dataset, test) = load(&data_dir)?;
    let report = py.detach(|| training::evaluate(&model, &dataset, &test)).map_err(to_py)?;
    json_to_py(py, &report)
}

/// A trained model loaded from a checkpoint.
#[pyclass(module = "pjfit", frozen)]
struct Model {
    inner: PjfModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_checkpoint(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_checkpoint(&path).map_err(to_py)? })
    }

    /// Model configuration as a dict.
    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.config)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.store.num_scalars()
    }

    /// `(candidate_id, score)` pairs for `job_id`, best first. Ranks every
    /// candidate in the dataset when `candidate_ids` is omitted.
    #[pyo3(signature = (data_dir, job_id, candidate_ids = None))]
    fn rank(&self, py: Python<'_>, data_dir: PathBuf, job_id: &str, candidate_ids: Option<Vec<String>>) -> PyResult<Vec<(String, f64)>> {
        let (dataset, _) = load(&data_dir)?;
        let ids = candidate_ids.unwrap_or_else(|| dataset.candidates().map(|c| c.id.clone()).collect());
        let ranking = py.detach(|| rank_candidates(&self.inner, &dataset, job_id, &ids)).map_err(to_py)?;
        Ok(ranking.entries.into_iter().map(|e| (e.candidate_id, e.score)).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(embedding_dim={}, ablation={}, parameters={})",
            self.inner.config.embedding_dim,
            self.inner.config.ablation,
            self.inner.store.num_scalars()
        )
    }
}

#[pymodule]
fn pjfit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(gauc, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(ctcvr, m)?)?;
    m.add_function(wrap_pyfunction!(bpr_loss, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
