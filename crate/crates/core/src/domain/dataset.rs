use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::vocab::CategoryVocab;
use crate::error::{DataError, Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_EMBEDDING_DIM: usize = 1024;
pub const DEFAULT_SEQ_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Candidate,
    Job,
}

impl EntityKind {
    pub fn opposite(self) -> Self {
        match self {
            EntityKind::Candidate => EntityKind::Job,
            EntityKind::Job => EntityKind::Candidate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Candidate => "candidate",
            EntityKind::Job => "job",
        }
    }
}

/// Recruitment procedure an interaction reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Evaluated = 0,
    PassedEval = 1,
    PassedInterview = 2,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Evaluated, Stage::PassedEval, Stage::PassedInterview];

    pub fn key(self) -> &'static str {
        match self {
            Stage::Evaluated => "eval",
            Stage::PassedEval => "pass_eval",
            Stage::PassedInterview => "pass_interview",
        }
    }
}

/// A candidate (resume) or a job (description).
///
/// Histories hold counterpart ids, oldest first. There are deliberately no
/// fields for gender, age, school, graduation year or location.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: String,
    pub kind: EntityKind,
    pub text: String,
    pub category: usize,
    pub embedding: Vec<f64>,
    pub history: [Vec<String>; 3],
    /// Set once the text has been replaced by an accepted rewrite.
    pub augmented: bool,
    pub original_text: Option<String>,
}

impl EntityRecord {
    pub fn history(&self, stage: Stage) -> &[String] {
        &self.history[stage as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub candidate_id: String,
    pub job_id: String,
    pub label: u8,
    pub ts: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityLine {
    id: String,
    kind: EntityKind,
    text: String,
    category: String,
    embedding: Vec<f64>,
    #[serde(default)]
    hist_eval: Vec<String>,
    #[serde(default)]
    hist_pass_eval: Vec<String>,
    #[serde(default)]
    hist_pass_interview: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    augmented: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original_text: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairLine {
    candidate_id: String,
    job_id: String,
    label: i64,
    ts: i64,
}

/// Candidates, jobs and labelled pairs. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: CategoryVocab,
    pub embedding_dim: usize,
    candidates: IndexMap<String, EntityRecord>,
    jobs: IndexMap<String, EntityRecord>,
    pub pairs: Vec<Pair>,
}

impl Dataset {
    pub fn empty(vocab: CategoryVocab, embedding_dim: usize) -> Self {
        Self { vocab, embedding_dim, candidates: IndexMap::new(), jobs: IndexMap::new(), pairs: Vec::new() }
    }

    /// Builds and validates a dataset from in-memory records.
    pub fn from_parts(
        vocab: CategoryVocab,
        embedding_dim: usize,
        entities: Vec<EntityRecord>,
        pairs: Vec<Pair>,
    ) -> Result<Self> {
        let mut ds = Self::empty(vocab, embedding_dim);
        for (i, e) in entities.into_iter().enumerate() {
            ds.insert(e, "<memory>", i + 1)?;
        }
        ds.check_histories()?;
        for (i, p) in pairs.iter().enumerate() {
            ds.check_pair(p, &format!("<memory>:{}", i + 1))?;
        }
        ds.pairs = pairs;
        Ok(ds)
    }

    fn insert(&mut self, e: EntityRecord, file: &str, line: usize) -> Result<()> {
        if e.embedding.len() != self.embedding_dim {
            return Err(DataError::EmbeddingLength {
                file: file.into(),
                line,
                id: e.id.clone(),
                found: e.embedding.len(),
                expected: self.embedding_dim,
            }
            .into());
        }
        if e.category >= self.vocab.len() {
            return Err(DataError::UnknownCategory { file: file.into(), line, category: e.category.to_string() }.into());
        }
        if let Some(bad) = e.embedding.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Malformed {
                file: file.into(),
                line,
                message: format!("non-finite embedding value {bad} in `{}`", e.id),
            }
            .into());
        }
        let map = match e.kind {
            EntityKind::Candidate => &mut self.candidates,
            EntityKind::Job => &mut self.jobs,
        };
        if map.contains_key(&e.id) {
            return Err(DataError::DuplicateId { file: file.into(), line, kind: e.kind.as_str().into(), id: e.id }.into());
        }
        map.insert(e.id.clone(), e);
        Ok(())
    }

    fn check_histories(&self) -> Result<()> {
        for e in self.candidates.values().chain(self.jobs.values()) {
            let other = e.kind.opposite();
            for stage in Stage::ALL {
                for id in e.history(stage) {
                    if self.entity(other, id).is_none() {
                        return Err(DataError::Dangling {
                            context: format!("history `hist_{}` of {} `{}`", stage.key(), e.kind.as_str(), e.id),
                            kind: other.as_str().into(),
                            id: id.clone(),
                        }
                        .into());
                    }
                }
            }
        }
        Ok(())
    }

    fn check_pair(&self, p: &Pair, context: &str) -> Result<()> {
        if !self.candidates.contains_key(&p.candidate_id) {
            return Err(DataError::Dangling { context: context.into(), kind: "candidate".into(), id: p.candidate_id.clone() }.into());
        }
        if !self.jobs.contains_key(&p.job_id) {
            return Err(DataError::Dangling { context: context.into(), kind: "job".into(), id: p.job_id.clone() }.into());
        }
        Ok(())
    }

    pub fn candidate(&self, id: &str) -> Option<&EntityRecord> {
        self.candidates.get(id)
    }

    pub fn job(&self, id: &str) -> Option<&EntityRecord> {
        self.jobs.get(id)
    }

    pub fn entity(&self, kind: EntityKind, id: &str) -> Option<&EntityRecord> {
        match kind {
            EntityKind::Candidate => self.candidates.get(id),
            EntityKind::Job => self.jobs.get(id),
        }
    }

    pub fn candidates(&self) -> impl ExactSizeIterator<Item = &EntityRecord> {
        self.candidates.values()
    }

    pub fn jobs(&self) -> impl ExactSizeIterator<Item = &EntityRecord> {
        self.jobs.values()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn candidate_index(&self, id: &str) -> Option<usize> {
        self.candidates.get_index_of(id)
    }

    pub fn job_index(&self, id: &str) -> Option<usize> {
        self.jobs.get_index_of(id)
    }

    pub fn candidate_at(&self, i: usize) -> &EntityRecord {
        &self.candidates[i]
    }

    pub fn job_at(&self, i: usize) -> &EntityRecord {
        &self.jobs[i]
    }

    /// Replaces a job's text. Used by the augmentation pipeline only.
    pub(crate) fn job_mut(&mut self, id: &str) -> Option<&mut EntityRecord> {
        self.jobs.get_mut(id)
    }

    /// Same entities, different pair list.
    pub fn with_pairs(&self, pairs: Vec<Pair>) -> Result<Self> {
        for (i, p) in pairs.iter().enumerate() {
            self.check_pair(p, &format!("pair {}", i + 1))?;
        }
        Ok(Self { pairs, ..self.clone() })
    }

    /// Embeddings of `ids` (resolved as `kind`), most recent first, padded to
    /// `max_len` rows. Histories longer than `max_len` keep the most recent.
    /// Mask entries are `true` for padding.
    pub fn pad_sequence(&self, ids: &[String], kind: EntityKind, max_len: usize) -> Result<(Matrix, Vec<bool>)> {
        let mut m = Matrix::zeros(max_len, self.embedding_dim);
        let mut mask = vec![true; max_len];
        for (row, id) in ids.iter().rev().take(max_len).enumerate() {
            let e = self.entity(kind, id).ok_or_else(|| DataError::Dangling {
                context: "pad_sequence".into(),
                kind: kind.as_str().into(),
                id: id.clone(),
            })?;
            m.row_mut(row).copy_from_slice(&e.embedding);
            mask[row] = false;
        }
        Ok((m, mask))
    }

    /// Writes the entities file (candidates first, then jobs, in load order).
    pub fn write_entities(&self, path: &Path) -> Result<()> {
        write_jsonl(path, self.candidates.values().chain(self.jobs.values()).map(|e| self.entity_line(e)))
    }

    fn entity_line(&self, e: &EntityRecord) -> EntityLine {
        EntityLine {
            id: e.id.clone(),
            kind: e.kind,
            text: e.text.clone(),
            category: self.vocab.name(e.category).expect("validated category").to_string(),
            embedding: e.embedding.clone(),
            hist_eval: e.history[0].clone(),
            hist_pass_eval: e.history[1].clone(),
            hist_pass_interview: e.history[2].clone(),
            augmented: e.augmented,
            original_text: e.original_text.clone(),
        }
    }
}

pub fn write_pairs(path: &Path, pairs: &[Pair]) -> Result<()> {
    write_jsonl(
        path,
        pairs.iter().map(|p| PairLine {
            candidate_id: p.candidate_id.clone(),
            job_id: p.job_id.clone(),
            label: p.label as i64,
            ts: p.ts,
        }),
    )
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a pairs file, checking labels.
pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    let file = file_label(path);
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let p: PairLine = serde_json::from_str(&text)
                .map_err(|e| DataError::Malformed { file: file.clone(), line, message: e.to_string() })?;
            if p.label != 0 && p.label != 1 {
                return Err(DataError::BadLabel { file: file.clone(), line, label: p.label }.into());
            }
            Ok(Pair { candidate_id: p.candidate_id, job_id: p.job_id, label: p.label as u8, ts: p.ts })
        })
        .collect()
}

/// Loads and validates an entities file and a pairs file.
///
/// `embedding_dim` of `None` takes the length of the first record.
pub fn load_dataset(
    entities_path: &Path,
    pairs_path: &Path,
    vocab: &CategoryVocab,
    embedding_dim: Option<usize>,
) -> Result<Dataset> {
    let file = file_label(entities_path);
    let lines = read_lines(entities_path)?;
    let mut ds = Dataset::empty(vocab.clone(), embedding_dim.unwrap_or(0));
    for (idx, (line, text)) in lines.into_iter().enumerate() {
        let rec: EntityLine = serde_json::from_str(&text)
            .map_err(|e| DataError::Malformed { file: file.clone(), line, message: e.to_string() })?;
        if idx == 0 && embedding_dim.is_none() {
            ds.embedding_dim = rec.embedding.len();
        }
        let category = vocab
            .id(&rec.category)
            .ok_or_else(|| DataError::UnknownCategory { file: file.clone(), line, category: rec.category.clone() })?;
        let e = EntityRecord {
            id: rec.id,
            kind: rec.kind,
            text: rec.text,
            category,
            embedding: rec.embedding,
            history: [rec.hist_eval, rec.hist_pass_eval, rec.hist_pass_interview],
            augmented: rec.augmented,
            original_text: rec.original_text,
        };
        ds.insert(e, &file, line)?;
    }
    ds.check_histories()?;
    let pfile = file_label(pairs_path);
    let pairs = read_pairs(pairs_path)?;
    for (i, p) in pairs.iter().enumerate() {
        ds.check_pair(p, &format!("{pfile}:{}", i + 1))?;
    }
    ds.pairs = pairs;
    Ok(ds)
}

/// Layout of a data directory: entities plus temporally split pair files.
#[derive(Debug, Clone)]
pub struct DataDir {
    pub root: PathBuf,
}

impl DataDir {
    pub const ENTITIES: &'static str = "entities.jsonl";
    pub const TRAIN: &'static str = "train.jsonl";
    pub const TEST: &'static str = "test.jsonl";
    pub const METADATA: &'static str = "metadata.json";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn entities(&self) -> PathBuf {
        self.root.join(Self::ENTITIES)
    }

    pub fn train(&self) -> PathBuf {
        self.root.join(Self::TRAIN)
    }

    pub fn test(&self) -> PathBuf {
        self.root.join(Self::TEST)
    }

    pub fn metadata(&self) -> PathBuf {
        self.root.join(Self::METADATA)
    }

    /// Loads entities with the training pairs, plus the test pairs when present.
    /// Enforces that every train timestamp precedes every test timestamp.
    pub fn load(&self, vocab: &CategoryVocab, embedding_dim: Option<usize>) -> Result<(Dataset, Vec<Pair>)> {
        let train = load_dataset(&self.entities(), &self.train(), vocab, embedding_dim)?;
        let test = if self.test().exists() {
            let pairs = read_pairs(&self.test())?;
            train.with_pairs(pairs.clone())?;
            pairs
        } else {
            Vec::new()
        };
        check_temporal(&train.pairs, &test)?;
        Ok((train, test))
    }
}

pub fn check_temporal(train: &[Pair], test: &[Pair]) -> Result<()> {
    let train_max = train.iter().map(|p| p.ts).max();
    let test_min = test.iter().map(|p| p.ts).min();
    if let (Some(a), Some(b)) = (train_max, test_min) {
        if a >= b {
            return Err(DataError::TemporalLeak { train_max: a, test_min: b }.into());
        }
    }
    Ok(())
}

/// Splits pairs at `cutoff`: `ts < cutoff` trains, the rest tests.
pub fn temporal_split(pairs: &[Pair], cutoff: i64) -> (Vec<Pair>, Vec<Pair>) {
    pairs.iter().cloned().partition(|p| p.ts < cutoff)
}
