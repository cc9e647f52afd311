use std::collections::{HashMap, HashSet};

use super::dataset::{Dataset, Pair};
use crate::numerics::SeededRng;

/// A positive pair and a sampled negative for the same job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub positive: Pair,
    pub negative: Pair,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBatch {
    pub entries: Vec<PairEntry>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SampledEpoch {
    pub batches: Vec<PairBatch>,
    /// Positives dropped because every candidate already matches their job.
    pub skipped: usize,
}

/// Candidates that hold a positive pair with each job.
pub fn positives_by_job(dataset: &Dataset) -> HashMap<&str, HashSet<usize>> {
    let mut out: HashMap<&str, HashSet<usize>> = HashMap::new();
    for p in dataset.pairs.iter().filter(|p| p.label == 1) {
        let c = dataset.candidate_index(&p.candidate_id).expect("validated pair");
        out.entry(p.job_id.as_str()).or_default().insert(c);
    }
    out
}

/// Shuffles the positive pairs and pairs each with `negatives_per_positive`
/// candidates drawn uniformly from those without a positive pair for the job.
pub fn sample_training_pairs(
    dataset: &Dataset,
    negatives_per_positive: usize,
    batch_size: usize,
    rng: &mut SeededRng,
) -> SampledEpoch {
    assert!(batch_size > 0, "batch size must be positive");
    let matched = positives_by_job(dataset);
    let n_cand = dataset.num_candidates();
    let mut positives: Vec<&Pair> = dataset.pairs.iter().filter(|p| p.label == 1).collect();
    rng.shuffle(&mut positives);

    // Jobs matched by most of the pool sample from an explicit complement.
    let mut complements: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut entries = Vec::with_capacity(positives.len() * negatives_per_positive);
    let mut skipped = 0;
    for pos in positives {
        let taken = &matched[pos.job_id.as_str()];
        if taken.len() >= n_cand {
            skipped += 1;
            continue;
        }
        for _ in 0..negatives_per_positive {
            let c = if taken.len() * 2 > n_cand {
                let pool = complements
                    .entry(pos.job_id.as_str())
                    .or_insert_with(|| (0..n_cand).filter(|i| !taken.contains(i)).collect());
                pool[rng.below(pool.len())]
            } else {
                loop {
                    let c = rng.below(n_cand);
                    if !taken.contains(&c) {
                        break c;
                    }
                }
            };
            entries.push(PairEntry {
                positive: pos.clone(),
                negative: Pair {
                    candidate_id: dataset.candidate_at(c).id.clone(),
                    job_id: pos.job_id.clone(),
                    label: 0,
                    ts: pos.ts,
                },
            });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} positive pairs skipped: every candidate already matches their job");
    }
    let batches = entries.chunks(batch_size).map(|c| PairBatch { entries: c.to_vec() }).collect();
    SampledEpoch { batches, skipped }
}
