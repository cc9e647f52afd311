//! Pairwise BPR training and evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{sample_training_pairs, Dataset, Pair, PairEntry};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, MetricReport, RankedPrediction};
use crate::model::{FeatureCache, ModelConfig, ModelLayout, PjfModel};
use crate::numerics::{GradBuffer, OptimizerKind, Optimizer, ParamStore, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda_reg: f64,
    pub epochs: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub optimizer: OptimizerKind,
    /// JD length (characters) below which a description counts as short.
    pub short_jd_threshold: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            learning_rate: 1e-4,
            lambda_reg: 0.1,
            epochs: 1,
            seed: 0,
            negatives_per_positive: 1,
            optimizer: OptimizerKind::Adam,
            short_jd_threshold: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(Error::Config("lambda_reg must be non-negative".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("negatives_per_positive must be positive".into()));
        }
        Ok(())
    }
}

/// Model and training settings, as read from a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprLoss {
    pub loss: f64,
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
}

/// `-(1/|B|) Σ log σ(y⁺ − y⁻) + λ (1/|B|) Σ ((y⁺)² + (y⁻)²)` with gradients
/// with respect to every score. `log σ(z)` is evaluated as `-softplus(-z)`.
pub fn bpr_loss(pos: &[f64], neg: &[f64], lambda_reg: f64) -> Result<BprLoss> {
    if pos.is_empty() || pos.len() != neg.len() {
        return Err(Error::Config(format!(
            "bpr_loss needs equal non-empty score lists (got {} and {})",
            pos.len(),
            neg.len()
        )));
    }
    let b = pos.len() as f64;
    let mut loss = 0.0;
    let mut d_pos = Vec::with_capacity(pos.len());
    let mut d_neg = Vec::with_capacity(pos.len());
    for (&p, &n) in pos.iter().zip(neg) {
        let z = p - n;
        loss += softplus(-z) + lambda_reg * (p * p + n * n);
        let s = sigmoid(-z);
        d_pos.push((-s + 2.0 * lambda_reg * p) / b);
        d_neg.push((s + 2.0 * lambda_reg * n) / b);
    }
    Ok(BprLoss { loss: loss / b, d_pos, d_neg })
}

/// Loss of one batch with gradients accumulated into `grads`.
pub fn batch_loss(
    layout: &ModelLayout,
    store: &ParamStore,
    dataset: &Dataset,
    cache: &FeatureCache,
    entries: &[PairEntry],
    lambda_reg: f64,
    grads: Option<&mut GradBuffer>,
) -> Result<f64> {
    let mut pos = Vec::with_capacity(entries.len());
    let mut neg = Vec::with_capacity(entries.len());
    let mut traces = Vec::with_capacity(entries.len());
    for e in entries {
        let pf = cache.pair(dataset, &e.positive.candidate_id, &e.positive.job_id)?;
        let nf = cache.pair(dataset, &e.negative.candidate_id, &e.negative.job_id)?;
        let (yp, tp) = layout.forward(store, pf)?;
        let (yn, tn) = layout.forward(store, nf)?;
        pos.push(yp);
        neg.push(yn);
        if grads.is_some() {
            traces.push((pf, tp, nf, tn));
        }
    }
    let l = bpr_loss(&pos, &neg, lambda_reg)?;
    if let Some(g) = grads {
        for (i, (pf, tp, nf, tn)) in traces.iter().enumerate() {
            layout.backward(store, *pf, tp, l.d_pos[i], g)?;
            layout.backward(store, *nf, tn, l.d_neg[i], g)?;
        }
    }
    Ok(l.loss)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PjfModel,
    /// Loss of every batch, in order.
    pub loss_trace: Vec<f64>,
    /// Mean BPR loss on a fixed probe sample before and after training.
    pub probe_loss_before: f64,
    pub probe_loss_after: f64,
    pub skipped_positives: usize,
}

const PROBE_ENTRIES: usize = 512;

/// Trains a fresh model on `dataset.pairs` (positives only drive sampling).
/// Deterministic in `train.seed`; strictly sequential.
pub fn train(dataset: &Dataset, model_config: &ModelConfig, train: &TrainConfig) -> Result<TrainOutcome> {
    train.validate()?;
    if !dataset.pairs.iter().any(|p| p.label == 1) {
        return Err(Error::Config("training data has no positive pairs".into()));
    }
    let mut model = PjfModel::new(model_config.clone(), train.seed)?;
    let cache = FeatureCache::build(dataset, model_config.seq_len)?;
    let root = SeededRng::new(train.seed);

    let probe: Vec<PairEntry> = {
        let mut rng = root.derive(u64::MAX);
        let epoch = sample_training_pairs(dataset, 1, PROBE_ENTRIES, &mut rng);
        epoch.batches.into_iter().next().map(|b| b.entries).unwrap_or_default()
    };
    let probe_loss = |m: &PjfModel| -> Result<f64> {
        if probe.is_empty() {
            return Ok(0.0);
        }
        batch_loss(&m.layout, &m.store, dataset, &cache, &probe, train.lambda_reg, None)
    };
    let probe_loss_before = probe_loss(&model)?;

    let mut optimizer = Optimizer::new(train.optimizer, &model.store);
    let mut grads = model.store.grad_buffer();
    let mut loss_trace = Vec::new();
    let mut skipped = 0;
    let mut step = 0u64;
    for epoch in 0..train.epochs {
        let mut rng = root.derive(epoch as u64);
        let sampled = sample_training_pairs(dataset, train.negatives_per_positive, train.batch_size, &mut rng);
        skipped += sampled.skipped;
        for batch in &sampled.batches {
            grads.zero();
            let loss = batch_loss(&model.layout, &model.store, dataset, &cache, &batch.entries, train.lambda_reg, Some(&mut grads))?;
            if !loss.is_finite() {
                return Err(Error::DivergedBatch { batch: loss_trace.len() });
            }
            loss_trace.push(loss);
            model.store.accumulate(&grads)?;
            step += 1;
            optimizer.step(&mut model.store, train.learning_rate, step)?;
        }
        log::info!(
            "epoch {}: {} batches, mean loss {:.5}",
            epoch + 1,
            sampled.batches.len(),
            loss_trace.iter().rev().take(sampled.batches.len()).sum::<f64>() / sampled.batches.len().max(1) as f64
        );
    }
    let probe_loss_after = probe_loss(&model)?;
    Ok(TrainOutcome { model, loss_trace, probe_loss_before, probe_loss_after, skipped_positives: skipped })
}

/// Scores pairs in parallel; output order follows `pairs`.
pub fn predict(model: &PjfModel, dataset: &Dataset, pairs: &[Pair]) -> Result<Vec<RankedPrediction>> {
    let cache = FeatureCache::build(dataset, model.config.seq_len)?;
    pairs
        .par_iter()
        .map(|p| {
            let score = model.score(cache.pair(dataset, &p.candidate_id, &p.job_id)?)?;
            Ok(RankedPrediction { candidate_id: p.candidate_id.clone(), job_id: p.job_id.clone(), score, label: p.label })
        })
        .collect()
}

/// Scores `pairs` and computes AUC, GAUC (grouped by job), NDCG and AP.
pub fn evaluate(model: &PjfModel, dataset: &Dataset, pairs: &[Pair]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::Config("no evaluation pairs".into()));
    }
    let preds = predict(model, dataset, pairs)?;
    Ok(metric_report(&preds)?)
}
