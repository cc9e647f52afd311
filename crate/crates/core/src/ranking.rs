//! Batch ranking of candidates for one job.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::Dataset;
use crate::error::{DataError, Error, Result};
use crate::model::{EntityFeatures, PairFeatures, PjfModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub candidate_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub job_id: String,
    pub entries: Vec<RankedCandidate>,
    /// Ids that appeared more than once in the request (kept once).
    pub duplicates: Vec<String>,
}

/// Scores `candidate_ids` against `job_id`, highest score first, ties by candidate id.
/// Every unresolvable id is reported in one error.
pub fn rank_candidates(model: &PjfModel, dataset: &Dataset, job_id: &str, candidate_ids: &[String]) -> Result<Ranking> {
    let mut unknown = Vec::new();
    let job = dataset.job(job_id);
    if job.is_none() {
        unknown.push(format!("job:{job_id}"));
    }
    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    let mut duplicates = Vec::new();
    for id in candidate_ids {
        if !seen.insert(id.as_str()) {
            log::warn!("candidate `{id}` listed more than once; scoring it once");
            duplicates.push(id.clone());
            continue;
        }
        match dataset.candidate(id) {
            Some(c) => ids.push(c),
            None => unknown.push(format!("candidate:{id}")),
        }
    }
    if !unknown.is_empty() {
        return Err(DataError::UnknownIds { ids: unknown }.into());
    }
    let seq = model.config.seq_len;
    let job = EntityFeatures::from_record(job.expect("checked"), dataset, seq)?;
    let mut entries = ids
        .par_iter()
        .map(|c| {
            let cf = EntityFeatures::from_record(c, dataset, seq)?;
            let score = model.score(PairFeatures { candidate: &cf, job: &job })?;
            Ok(RankedCandidate { candidate_id: c.id.clone(), score })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.candidate_id.cmp(&b.candidate_id)));
    Ok(Ranking { job_id: job_id.to_string(), entries, duplicates })
}

impl Ranking {
    /// Tab-separated `rank, candidate_id, score` with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("rank\tcandidate_id\tscore\n");
        for (i, e) in self.entries.iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{:.9}\n", i + 1, e.candidate_id, e.score));
        }
        s
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}
