//! The full scoring network: two side encoders feeding a category-aware
//! mixture-of-experts head (or a single FFN under the head ablations).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, EntityKind, EntityRecord, DEFAULT_EMBEDDING_DIM, DEFAULT_SEQ_LEN};
use crate::encoder::{HistorySeq, SideEncoder, SideShape, SideTrace};
use crate::error::{DataError, Error, Result};
use crate::moe::{MoeHead, MoeShape, MoeTrace};
use crate::numerics::{GradBuffer, Matrix, Mlp, MlpTrace, ParamStore, SeededRng};

/// Model variants used for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Single FFN head instead of the mixture of experts.
    NoMoe,
    /// Mixture of experts with the gate input zeroed.
    NoCategory,
    /// Single FFN head with a 0/1 category-match feature appended to `x`.
    SimpleMatch,
    /// Train on the original (pre-augmentation) job texts.
    NoJdAug,
    /// Only the passed-resume-evaluation stage contributes interactions.
    NoFineInteraction,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::None,
        Ablation::NoMoe,
        Ablation::NoCategory,
        Ablation::SimpleMatch,
        Ablation::NoJdAug,
        Ablation::NoFineInteraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::NoMoe => "no_moe",
            Ablation::NoCategory => "no_category",
            Ablation::SimpleMatch => "simple_match",
            Ablation::NoJdAug => "no_jd_aug",
            Ablation::NoFineInteraction => "no_fine_interaction",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub heads: usize,
    pub seq_len: usize,
    pub fusion_hidden: usize,
    pub fusion_out: usize,
    pub n_categories: usize,
    pub category_dim: usize,
    pub gate_hidden: usize,
    pub n_experts: usize,
    pub expert_hidden: [usize; 2],
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            heads: 2,
            seq_len: DEFAULT_SEQ_LEN,
            fusion_hidden: 1024,
            fusion_out: 256,
            n_categories: 16,
            category_dim: 8,
            gate_hidden: 32,
            n_experts: 5,
            expert_hidden: [256, 64],
            ablation: Ablation::None,
        }
    }
}

impl ModelConfig {
    /// Defaults scaled down for small embeddings; the full-size config is used
    /// unchanged for 1024-dimensional inputs.
    pub fn for_embedding_dim(dim: usize) -> Self {
        if dim == DEFAULT_EMBEDDING_DIM {
            return Self::default();
        }
        Self {
            embedding_dim: dim,
            fusion_hidden: 2 * dim,
            fusion_out: dim,
            expert_hidden: [2 * dim, dim],
            ..Self::default()
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    /// Width of the joint representation fed to the head.
    pub fn joint_dim(&self) -> usize {
        let base = 2 * self.fusion_out + 2 * self.embedding_dim;
        if self.ablation == Ablation::SimpleMatch {
            base + 1
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.heads == 0 || self.embedding_dim % self.heads != 0 {
            return bad(format!("embedding_dim {} not divisible by heads {}", self.embedding_dim, self.heads));
        }
        if self.n_experts == 0 {
            return bad("n_experts must be positive".into());
        }
        if [self.seq_len, self.fusion_hidden, self.fusion_out, self.n_categories, self.category_dim, self.gate_hidden]
            .contains(&0)
            || self.expert_hidden.contains(&0)
        {
            return bad("all widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Moe(MoeHead),
    Single(Mlp),
}

/// Which tensors each component reads; holds no values itself.
#[derive(Debug, Clone)]
pub struct ModelLayout {
    pub config: ModelConfig,
    pub candidate_encoder: SideEncoder,
    pub job_encoder: SideEncoder,
    pub head: Head,
}

/// Parameters plus the layout that reads them.
#[derive(Debug, Clone)]
pub struct PjfModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub layout: ModelLayout,
}

/// Per-entity inputs: embedding, category, and padded histories (most recent first).
#[derive(Debug, Clone)]
pub struct EntityFeatures {
    pub embedding: Vec<f64>,
    pub category: usize,
    pub history: [HistorySeq; 3],
}

impl EntityFeatures {
    pub fn from_record(record: &EntityRecord, dataset: &Dataset, seq_len: usize) -> Result<Self> {
        let kind = record.kind.opposite();
        let mut hist = Vec::with_capacity(3);
        for h in &record.history {
            let (rows, mask) = dataset.pad_sequence(h, kind, seq_len)?;
            hist.push(HistorySeq { rows, mask });
        }
        Ok(Self {
            embedding: record.embedding.clone(),
            category: record.category,
            history: hist.try_into().expect("three stages"),
        })
    }
}

/// Features for every entity in a dataset, indexed like the dataset.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub candidates: Vec<EntityFeatures>,
    pub jobs: Vec<EntityFeatures>,
}

impl FeatureCache {
    pub fn build(dataset: &Dataset, seq_len: usize) -> Result<Self> {
        let candidates = dataset.candidates().map(|c| EntityFeatures::from_record(c, dataset, seq_len)).collect::<Result<_>>()?;
        let jobs = dataset.jobs().map(|j| EntityFeatures::from_record(j, dataset, seq_len)).collect::<Result<_>>()?;
        Ok(Self { candidates, jobs })
    }

    pub fn pair<'a>(&'a self, dataset: &Dataset, candidate_id: &str, job_id: &str) -> Result<PairFeatures<'a>> {
        let c = dataset.candidate_index(candidate_id).ok_or_else(|| DataError::Dangling {
            context: "score".into(),
            kind: EntityKind::Candidate.as_str().into(),
            id: candidate_id.into(),
        })?;
        let j = dataset.job_index(job_id).ok_or_else(|| DataError::Dangling {
            context: "score".into(),
            kind: EntityKind::Job.as_str().into(),
            id: job_id.into(),
        })?;
        Ok(PairFeatures { candidate: &self.candidates[c], job: &self.jobs[j] })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PairFeatures<'a> {
    pub candidate: &'a EntityFeatures,
    pub job: &'a EntityFeatures,
}

impl<'a> PairFeatures<'a> {
    fn candidate_sides(&self) -> ([&'a HistorySeq; 3], [&'a HistorySeq; 3]) {
        let c = &self.candidate.history;
        let j = &self.job.history;
        // Candidate side: own = jobs the candidate interacted with, cross = candidates the job interacted with.
        ([&c[0], &c[1], &c[2]], [&j[0], &j[1], &j[2]])
    }

    fn job_sides(&self) -> ([&'a HistorySeq; 3], [&'a HistorySeq; 3]) {
        let (c, j) = self.candidate_sides();
        (j, c)
    }
}

#[derive(Debug, Clone)]
pub struct ScoreTrace {
    candidate: SideTrace,
    job: SideTrace,
    head: HeadTrace,
}

impl ScoreTrace {
    pub fn gate_weights(&self) -> Option<&[f64]> {
        match &self.head {
            HeadTrace::Moe(t) => Some(t.gate_weights()),
            HeadTrace::Single(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
enum HeadTrace {
    Moe(MoeTrace),
    Single(MlpTrace),
}

impl PjfModel {
    /// Fresh Glorot-initialized model.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut store = ParamStore::new();
        let active = if config.ablation == Ablation::NoFineInteraction { [false, true, false] } else { [true; 3] };
        let side = SideShape {
            d_model: config.embedding_dim,
            heads: config.heads,
            fusion_hidden: config.fusion_hidden,
            fusion_out: config.fusion_out,
        };
        let candidate_encoder = SideEncoder::new(&mut store, "enc.candidate", side, active, &mut rng)?;
        let job_encoder = SideEncoder::new(&mut store, "enc.job", side, active, &mut rng)?;
        let head = match config.ablation {
            Ablation::NoMoe | Ablation::SimpleMatch => Head::Single(Mlp::new(
                &mut store,
                "head.ffn",
                &[config.joint_dim(), config.expert_hidden[0], config.expert_hidden[1], 1],
                &mut rng,
            )),
            _ => Head::Moe(MoeHead::new(
                &mut store,
                "moe",
                MoeShape {
                    n_categories: config.n_categories,
                    category_dim: config.category_dim,
                    gate_hidden: config.gate_hidden,
                    n_experts: config.n_experts,
                    input_dim: config.joint_dim(),
                    expert_hidden: config.expert_hidden,
                },
                config.ablation == Ablation::NoCategory,
                &mut rng,
            )),
        };
        let layout = ModelLayout { config: config.clone(), candidate_encoder, job_encoder, head };
        Ok(Self { config, store, layout })
    }

    /// Builds the layout for `config` and installs `store` (e.g. from a checkpoint).
    /// Every tensor name and shape must match.
    pub fn with_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if model.store.len() != store.len() {
            return Err(Error::Config(format!("store has {} tensors, layout expects {}", store.len(), model.store.len())));
        }
        for ((_, want), (_, got)) in model.store.iter().zip(store.iter()) {
            if want.name != got.name || want.value.shape() != got.value.shape() {
                return Err(Error::Config(format!("store tensor `{}` does not match layout `{}`", got.name, want.name)));
            }
        }
        model.store = store;
        Ok(model)
    }

    pub fn forward(&self, pair: PairFeatures<'_>) -> Result<(f64, ScoreTrace)> {
        self.layout.forward(&self.store, pair)
    }

    pub fn score(&self, pair: PairFeatures<'_>) -> Result<f64> {
        self.layout.score(&self.store, pair)
    }

    pub fn backward(&self, pair: PairFeatures<'_>, trace: &ScoreTrace, dy: f64, grads: &mut GradBuffer) -> Result<()> {
        self.layout.backward(&self.store, pair, trace, dy, grads)
    }
}

impl ModelLayout {
    pub fn forward(&self, store: &ParamStore, pair: PairFeatures<'_>) -> Result<(f64, ScoreTrace)> {
        let (c_own, c_cross) = pair.candidate_sides();
        let (j_own, j_cross) = pair.job_sides();
        let (fc, ct) = self.candidate_encoder.encode(store, &pair.candidate.embedding, c_own, c_cross)?;
        let (fj, jt) = self.job_encoder.encode(store, &pair.job.embedding, j_own, j_cross)?;
        let mut parts = vec![&fc, &fj];
        let r = Matrix::row_vector(&pair.candidate.embedding);
        let d = Matrix::row_vector(&pair.job.embedding);
        parts.push(&r);
        parts.push(&d);
        let matched = Matrix::row_vector(&[f64::from(u8::from(pair.candidate.category == pair.job.category))]);
        if self.config.ablation == Ablation::SimpleMatch {
            parts.push(&matched);
        }
        let x = Matrix::hconcat(&parts)?;
        let (y, head) = match &self.head {
            Head::Moe(m) => {
                let (y, t) = m.forward_traced(store, &x, pair.candidate.category, pair.job.category)?;
                (y, HeadTrace::Moe(t))
            }
            Head::Single(f) => {
                let (y, t) = f.forward_traced(store, &x)?;
                (y.data()[0], HeadTrace::Single(t))
            }
        };
        Ok((y, ScoreTrace { candidate: ct, job: jt, head }))
    }

    pub fn score(&self, store: &ParamStore, pair: PairFeatures<'_>) -> Result<f64> {
        self.forward(store, pair).map(|(y, _)| y)
    }

    /// Accumulates `dy * dscore/dθ` into `grads`.
    pub fn backward(&self, store: &ParamStore, pair: PairFeatures<'_>, trace: &ScoreTrace, dy: f64, grads: &mut GradBuffer) -> Result<()> {
        let dx = match (&self.head, &trace.head) {
            (Head::Moe(m), HeadTrace::Moe(t)) => m.backward(store, t, dy, grads)?,
            (Head::Single(f), HeadTrace::Single(t)) => f.backward(store, t, &Matrix::row_vector(&[dy]), grads)?,
            _ => unreachable!("trace produced by a different head"),
        };
        let fo = self.config.fusion_out;
        let dfc = Matrix::row_vector(&dx.data()[..fo]);
        let dfj = Matrix::row_vector(&dx.data()[fo..2 * fo]);
        let (c_own, c_cross) = pair.candidate_sides();
        let (j_own, j_cross) = pair.job_sides();
        self.candidate_encoder.backward(store, c_own, c_cross, &trace.candidate, &dfc, grads)?;
        self.job_encoder.backward(store, j_own, j_cross, &trace.job, &dfj, grads)?;
        Ok(())
    }
}

/// Scores one candidate-job pair from dataset records.
pub fn score_pair(model: &PjfModel, dataset: &Dataset, candidate: &EntityRecord, job: &EntityRecord) -> Result<f64> {
    let c = EntityFeatures::from_record(candidate, dataset, model.config.seq_len)?;
    let j = EntityFeatures::from_record(job, dataset, model.config.seq_len)?;
    model.score(PairFeatures { candidate: &c, job: &j })
}
