//! Ranking metrics: AUC, grouped AUC, NDCG, average precision, and the CTCVR funnel.
//!
//! Tie rules: AUC counts tied positive/negative pairs as one half. NDCG sorts
//! by score with ties kept in input order. AP treats each distinct score as a
//! threshold, so tied items enter together.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub candidate_id: String,
    pub job_id: String,
    pub score: f64,
    pub label: u8,
}

/// Rank-based AUC (Mann-Whitney U with mid-ranks for ties).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined { metric: "auc", reason: "needs at least one positive and one negative" });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_block = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += mid * pos_in_block as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaucResult {
    pub value: f64,
    pub groups_used: usize,
    pub groups_excluded: usize,
}

/// Per-job AUC weighted by each job's sample count. Groups holding a single
/// class are excluded and the weights renormalized over the rest.
pub fn gauc(preds: &[RankedPrediction]) -> Result<GaucResult, MetricError> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for p in preds {
        let g = groups.entry(p.job_id.as_str()).or_default();
        g.0.push(p.score);
        g.1.push(p.label);
    }
    let mut weighted = 0.0;
    let mut total = 0usize;
    let mut used = 0;
    let mut excluded = 0;
    for (scores, labels) in groups.values() {
        match auc(scores, labels) {
            Ok(a) => {
                weighted += a * scores.len() as f64;
                total += scores.len();
                used += 1;
            }
            Err(_) => excluded += 1,
        }
    }
    if used == 0 {
        return Err(MetricError::Undefined { metric: "gauc", reason: "no group holds both classes" });
    }
    Ok(GaucResult { value: weighted / total as f64, groups_used: used, groups_excluded: excluded })
}

fn dcg(labels: impl Iterator<Item = u8>) -> f64 {
    labels.enumerate().map(|(i, l)| f64::from(l) / ((i + 2) as f64).log2()).sum()
}

/// DCG of the score-sorted labels over DCG of the ideally sorted labels, on the whole list.
pub fn ndcg(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    assert_eq!(scores.len(), labels.len());
    if !labels.contains(&1) {
        return Err(MetricError::Undefined { metric: "ndcg", reason: "needs at least one positive" });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ideal = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    Ok(dcg(order.iter().map(|&i| labels[i])) / dcg(ideal.into_iter()))
}

/// Σ (recall_k − recall_{k−1}) · precision_k over distinct score thresholds, descending.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(MetricError::Undefined { metric: "ap", reason: "needs at least one positive" });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            tp += usize::from(labels[order[i]] == 1);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub ctr: f64,
    pub cvr: f64,
    pub ctcvr: f64,
    /// Set when a rate had a zero denominator and was defined as zero.
    pub ctr_undefined: bool,
    pub cvr_undefined: bool,
}

/// CTR = clicks/pv, CVR = applications/clicks, CTCVR = applications/pv.
pub fn ctcvr(pv: u64, clicks: u64, applications: u64) -> Result<Funnel, MetricError> {
    if !(pv >= clicks && clicks >= applications) {
        return Err(MetricError::InvalidFunnel { pv, clicks, applications });
    }
    let rate = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (ctr, ctr_undefined) = rate(clicks, pv);
    let (cvr, cvr_undefined) = rate(applications, clicks);
    let (ctcvr, _) = rate(applications, pv);
    Ok(Funnel { ctr, cvr, ctcvr, ctr_undefined, cvr_undefined })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub gauc: f64,
    pub ndcg: f64,
    pub ap: f64,
    pub n_predictions: usize,
    pub n_positive: usize,
    pub gauc_groups_used: usize,
    pub gauc_groups_excluded: usize,
}

pub fn metric_report(preds: &[RankedPrediction]) -> Result<MetricReport, MetricError> {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let g = gauc(preds)?;
    Ok(MetricReport {
        auc: auc(&scores, &labels)?,
        gauc: g.value,
        ndcg: ndcg(&scores, &labels)?,
        ap: average_precision(&scores, &labels)?,
        n_predictions: preds.len(),
        n_positive: labels.iter().filter(|&&l| l == 1).count(),
        gauc_groups_used: g.groups_used,
        gauc_groups_excluded: g.groups_excluded,
    })
}
