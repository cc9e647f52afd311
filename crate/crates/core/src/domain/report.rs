use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Stage};

/// Composition summary of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub n_candidates: usize,
    pub n_jobs: usize,
    pub n_pairs: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub positive_rate: f64,
    /// History length → number of (entity, stage) lists with that length.
    pub history_length_histogram: BTreeMap<usize, usize>,
    pub short_jd_threshold: usize,
    pub n_short_jds: usize,
    pub short_jd_share: f64,
}

/// Counts entities, pairs, label balance, history lengths, and JDs shorter
/// than `short_jd_threshold` characters.
pub fn validate_records(dataset: &Dataset, short_jd_threshold: usize) -> DatasetReport {
    let n_positive = dataset.pairs.iter().filter(|p| p.label == 1).count();
    let n_pairs = dataset.pairs.len();
    let mut hist = BTreeMap::new();
    for e in dataset.candidates().chain(dataset.jobs()) {
        for s in Stage::ALL {
            *hist.entry(e.history(s).len()).or_insert(0) += 1;
        }
    }
    let n_short = dataset.jobs().filter(|j| j.text.chars().count() < short_jd_threshold).count();
    DatasetReport {
        n_candidates: dataset.num_candidates(),
        n_jobs: dataset.num_jobs(),
        n_pairs,
        n_positive,
        n_negative: n_pairs - n_positive,
        positive_rate: if n_pairs == 0 { 0.0 } else { n_positive as f64 / n_pairs as f64 },
        history_length_histogram: hist,
        short_jd_threshold,
        n_short_jds: n_short,
        short_jd_share: if dataset.num_jobs() == 0 { 0.0 } else { n_short as f64 / dataset.num_jobs() as f64 },
    }
}
