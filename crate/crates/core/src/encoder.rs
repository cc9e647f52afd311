//! Fine-grained historical interaction encoder.
//!
//! For each recruitment stage an entity's own embedding attends over two
//! padded history sequences: the counterpart entities it interacted with
//! (internal interaction) and the same-kind entities that interacted with the
//! pair's counterpart (external interaction). The six attention outputs are
//! concatenated and fused by a small feed-forward network.
//!
//! Concatenation order is stage-major, internal before external:
//! `[eval.int, eval.ext, pass_eval.int, pass_eval.ext, pass_interview.int, pass_interview.ext]`.
//! Checkpoints depend on this order.

use crate::domain::Stage;
use crate::error::{Error, Result};
use crate::numerics::matrix::{axpy, dot};
use crate::numerics::{GradBuffer, Matrix, Mlp, MlpTrace, ParamId, ParamStore, SeededRng};

/// A padded history: `rows` is `seq_len x d_model`, `mask[i]` is `true` for padding.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySeq {
    pub rows: Matrix,
    pub mask: Vec<bool>,
}

impl HistorySeq {
    pub fn empty(seq_len: usize, d_model: usize) -> Self {
        Self { rows: Matrix::zeros(seq_len, d_model), mask: vec![true; seq_len] }
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }
}

/// Per-head projections stacked column-wise: head `i` owns columns `i*d_k..(i+1)*d_k`.
#[derive(Debug, Clone, Copy)]
pub struct InteractionHead {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub heads: usize,
}

impl InteractionHead {
    pub fn new(store: &mut ParamStore, name: &str, d_model: usize, heads: usize, rng: &mut SeededRng) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Config(format!("d_model {d_model} is not divisible by {heads} heads")));
        }
        Ok(Self {
            w_q: store.add_glorot(format!("{name}.w_q"), d_model, d_model, rng),
            w_k: store.add_glorot(format!("{name}.w_k"), d_model, d_model, rng),
            w_v: store.add_glorot(format!("{name}.w_v"), d_model, d_model, rng),
            w_o: store.add_glorot(format!("{name}.w_o"), d_model, d_model, rng),
            heads,
        })
    }
}

/// Saved activations of one [`multi_head_interaction`] call.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    query: Vec<f64>,
    /// Unmasked row indices of the sequence.
    active: Vec<usize>,
    /// Per head: projected query, attention weights over `active`, attended input.
    q: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    concat: Vec<f64>,
}

/// `Concat(head_1..head_h) W_O` with `head_i = Attention(q W_Q_i, seq W_K_i, seq W_V_i)`.
///
/// Logits are computed as `seq (W_K_i (q W_Q_i)^T)` and values as
/// `(p^T seq) W_V_i`, which is the same product reassociated so that padded
/// rows are never touched. A fully padded sequence yields the zero vector.
pub fn multi_head_interaction(
    query: &[f64],
    seq: &HistorySeq,
    head: &InteractionHead,
    store: &ParamStore,
) -> Result<(Matrix, AttentionTrace)> {
    let w_q = store.value(head.w_q);
    let w_k = store.value(head.w_k);
    let w_v = store.value(head.w_v);
    let w_o = store.value(head.w_o);
    let d = w_q.rows();
    let dh = w_q.cols();
    if query.len() != d || seq.rows.cols() != d || seq.mask.len() != seq.rows.rows() {
        return Err(Error::Dimension { op: "multi_head_interaction", left: (1, query.len()), right: seq.rows.shape() });
    }
    let dk = dh / head.heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let active: Vec<usize> = (0..seq.mask.len()).filter(|&i| !seq.mask[i]).collect();

    // q_all = query W_Q (all heads at once)
    let mut q_all = vec![0.0; dh];
    for (r, &x) in query.iter().enumerate() {
        if x != 0.0 {
            axpy(&mut q_all, x, w_q.row(r));
        }
    }

    let mut trace = AttentionTrace {
        query: query.to_vec(),
        active,
        q: Vec::with_capacity(head.heads),
        p: Vec::with_capacity(head.heads),
        s: Vec::with_capacity(head.heads),
        concat: vec![0.0; dh],
    };
    for h in 0..head.heads {
        let off = h * dk;
        let q = q_all[off..off + dk].to_vec();
        let mut p = Vec::with_capacity(trace.active.len());
        let mut s = vec![0.0; d];
        if !trace.active.is_empty() {
            // a = W_K_i q  (d)
            let a: Vec<f64> = (0..d).map(|r| dot(&w_k.row(r)[off..off + dk], &q)).collect();
            let logits: Vec<f64> = trace.active.iter().map(|&l| dot(seq.rows.row(l), &a) * scale).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for l in &logits {
                let e = (l - max).exp();
                z += e;
                p.push(e);
            }
            p.iter_mut().for_each(|v| *v /= z);
            for (&l, &w) in trace.active.iter().zip(&p) {
                axpy(&mut s, w, seq.rows.row(l));
            }
            for (r, &sv) in s.iter().enumerate() {
                if sv != 0.0 {
                    axpy(&mut trace.concat[off..off + dk], sv, &w_v.row(r)[off..off + dk]);
                }
            }
        }
        trace.q.push(q);
        trace.p.push(p);
        trace.s.push(s);
    }

    let mut out = Matrix::zeros(1, d);
    for (r, &c) in trace.concat.iter().enumerate() {
        if c != 0.0 {
            axpy(out.data_mut(), c, w_o.row(r));
        }
    }
    Ok((out, trace))
}

/// Accumulates parameter gradients of [`multi_head_interaction`]. The query
/// and sequence are frozen embeddings, so no input gradient is produced.
pub fn multi_head_interaction_backward(
    seq: &HistorySeq,
    head: &InteractionHead,
    store: &ParamStore,
    trace: &AttentionTrace,
    dout: &[f64],
    grads: &mut GradBuffer,
) {
    let w_k = store.value(head.w_k);
    let w_v = store.value(head.w_v);
    let w_o = store.value(head.w_o);
    let d = w_o.cols();
    let dh = w_o.rows();
    let dk = dh / head.heads;
    let scale = 1.0 / (dk as f64).sqrt();

    let dconcat: Vec<f64> = (0..dh).map(|r| dot(w_o.row(r), dout)).collect();
    {
        let dw_o = grads.get_mut(head.w_o);
        for (r, &c) in trace.concat.iter().enumerate() {
            if c != 0.0 {
                axpy(dw_o.row_mut(r), c, dout);
            }
        }
    }
    if trace.active.is_empty() {
        return;
    }
    for h in 0..head.heads {
        let off = h * dk;
        let dhead = &dconcat[off..off + dk];
        let (q, p, s) = (&trace.q[h], &trace.p[h], &trace.s[h]);

        let mut ds = vec![0.0; d];
        {
            let dw_v = grads.get_mut(head.w_v);
            for r in 0..d {
                if s[r] != 0.0 {
                    axpy(&mut dw_v.row_mut(r)[off..off + dk], s[r], dhead);
                }
                ds[r] = dot(&w_v.row(r)[off..off + dk], dhead);
            }
        }
        let dp: Vec<f64> = trace.active.iter().map(|&l| dot(seq.rows.row(l), &ds)).collect();
        let inner = dot(p, &dp);
        let mut da = vec![0.0; d];
        for ((&l, &pl), &dpl) in trace.active.iter().zip(p).zip(&dp) {
            axpy(&mut da, pl * (dpl - inner) * scale, seq.rows.row(l));
        }

        let mut dq = vec![0.0; dk];
        {
            let dw_k = grads.get_mut(head.w_k);
            for r in 0..d {
                if da[r] != 0.0 {
                    axpy(&mut dw_k.row_mut(r)[off..off + dk], da[r], q);
                    axpy(&mut dq, da[r], &w_k.row(r)[off..off + dk]);
                }
            }
        }
        let dw_q = grads.get_mut(head.w_q);
        for (r, &x) in trace.query.iter().enumerate() {
            if x != 0.0 {
                axpy(&mut dw_q.row_mut(r)[off..off + dk], x, &dq);
            }
        }
    }
}

/// Internal or external interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Internal = 0,
    External = 1,
}

/// One side of the bilateral encoder: 3 stages x {internal, external} heads plus fusion.
#[derive(Debug, Clone)]
pub struct SideEncoder {
    pub heads: [[InteractionHead; 2]; 3],
    pub fusion: Mlp,
    pub d_model: usize,
    /// Stages that contribute; inactive stages are treated as fully padded.
    pub active_stages: [bool; 3],
}

#[derive(Debug, Clone)]
pub struct SideTrace {
    attention: Vec<Option<AttentionTrace>>,
    fusion: MlpTrace,
}

/// Widths for building a [`SideEncoder`].
#[derive(Debug, Clone, Copy)]
pub struct SideShape {
    pub d_model: usize,
    pub heads: usize,
    pub fusion_hidden: usize,
    pub fusion_out: usize,
}

impl SideEncoder {
    pub fn new(store: &mut ParamStore, name: &str, shape: SideShape, active_stages: [bool; 3], rng: &mut SeededRng) -> Result<Self> {
        let mut build = |stage: Stage, dir: &str| {
            InteractionHead::new(store, &format!("{name}.{}.{dir}", stage.key()), shape.d_model, shape.heads, rng)
        };
        let mut heads = Vec::with_capacity(3);
        for stage in Stage::ALL {
            heads.push([build(stage, "int")?, build(stage, "ext")?]);
        }
        let heads: [[InteractionHead; 2]; 3] = heads.try_into().expect("three stages");
        let fusion = Mlp::new(
            store,
            &format!("{name}.fusion"),
            &[6 * shape.d_model, shape.fusion_hidden, shape.fusion_out],
            rng,
        );
        Ok(Self { heads, fusion, d_model: shape.d_model, active_stages })
    }

    /// `self_vec` attends over `own` (internal) and `cross` (external) per stage;
    /// the six outputs are concatenated and fused.
    pub fn encode(
        &self,
        store: &ParamStore,
        self_vec: &[f64],
        own: [&HistorySeq; 3],
        cross: [&HistorySeq; 3],
    ) -> Result<(Matrix, SideTrace)> {
        let d = self.d_model;
        let mut concat = Matrix::zeros(1, 6 * d);
        let mut attention = Vec::with_capacity(6);
        for s in 0..3 {
            for (dir, seq) in [(Direction::Internal, own[s]), (Direction::External, cross[s])] {
                if !self.active_stages[s] {
                    attention.push(None);
                    continue;
                }
                let (out, tr) = multi_head_interaction(self_vec, seq, &self.heads[s][dir as usize], store)?;
                let block = 2 * s + dir as usize;
                concat.data_mut()[block * d..(block + 1) * d].copy_from_slice(out.data());
                attention.push(Some(tr));
            }
        }
        let (fused, fusion) = self.fusion.forward_traced(store, &concat)?;
        Ok((fused, SideTrace { attention, fusion }))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        own: [&HistorySeq; 3],
        cross: [&HistorySeq; 3],
        trace: &SideTrace,
        dout: &Matrix,
        grads: &mut GradBuffer,
    ) -> Result<()> {
        let d = self.d_model;
        let dconcat = self.fusion.backward(store, &trace.fusion, dout, grads)?;
        for s in 0..3 {
            for (dir, seq) in [(Direction::Internal, own[s]), (Direction::External, cross[s])] {
                let block = 2 * s + dir as usize;
                if let Some(tr) = &trace.attention[block] {
                    let g = &dconcat.data()[block * d..(block + 1) * d];
                    multi_head_interaction_backward(seq, &self.heads[s][dir as usize], store, tr, g, grads);
                }
            }
        }
        Ok(())
    }
}
