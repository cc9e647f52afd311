//! Deliberately naive reference implementations of the ranking metrics.

use std::collections::BTreeMap;

/// Counts every positive/negative pair; ties score one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0u64);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

pub fn gauc(scores: &[f64], labels: &[u8], groups: &[String]) -> Option<f64> {
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for idx in by_group.values() {
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        if let Some(a) = auc(&s, &l) {
            num += a * idx.len() as f64;
            den += idx.len() as f64;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Sweeps each distinct score as a threshold, from high to low.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    if n_pos == 0.0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let above: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = above.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let recall = tp / n_pos;
        ap += (recall - prev_recall) * (tp / above.len() as f64);
        prev_recall = recall;
    }
    Some(ap)
}

/// Selection-sort ranking; among equal scores the earlier input wins.
pub fn ndcg(scores: &[f64], labels: &[u8]) -> Option<f64> {
    if !labels.contains(&1) {
        return None;
    }
    let mut taken = vec![false; scores.len()];
    let mut dcg = 0.0;
    for pos in 1..=scores.len() {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        dcg += f64::from(labels[b]) / ((pos + 1) as f64).log2();
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let idcg: f64 = (1..=n_pos).map(|pos| 1.0 / ((pos + 1) as f64).log2()).sum();
    Some(dcg / idcg)
}
