//! Category-aware mixture of experts.
//!
//! The gate sees only category information: the concatenated embeddings of the
//! candidate's and the job's categories. Its softmax weights mix the scalar
//! outputs of `n_e` feed-forward experts that all read the joint
//! representation `x`.

use crate::error::{Error, Result};
use crate::numerics::ops::{softmax_rows, softmax_rows_backward};
use crate::numerics::{GradBuffer, Matrix, Mlp, MlpTrace, ParamId, ParamStore, SeededRng};

#[derive(Debug, Clone, Copy)]
pub struct MoeShape {
    pub n_categories: usize,
    pub category_dim: usize,
    pub gate_hidden: usize,
    pub n_experts: usize,
    pub input_dim: usize,
    pub expert_hidden: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct MoeHead {
    pub category_embedding: ParamId,
    pub gate: Mlp,
    pub experts: Vec<Mlp>,
    /// When set the gate input is all zeros, removing category information.
    pub zero_category: bool,
}

#[derive(Debug, Clone)]
pub struct MoeTrace {
    categories: (usize, usize),
    gate: MlpTrace,
    weights: Matrix,
    expert_traces: Vec<MlpTrace>,
    expert_outputs: Vec<f64>,
}

impl MoeTrace {
    pub fn gate_weights(&self) -> &[f64] {
        self.weights.data()
    }

    pub fn expert_outputs(&self) -> &[f64] {
        &self.expert_outputs
    }
}

impl MoeHead {
    pub fn new(store: &mut ParamStore, name: &str, shape: MoeShape, zero_category: bool, rng: &mut SeededRng) -> Self {
        let category_embedding =
            store.add_glorot(format!("{name}.category_embedding"), shape.n_categories, shape.category_dim, rng);
        let gate = Mlp::new(store, &format!("{name}.gate"), &[2 * shape.category_dim, shape.gate_hidden, shape.n_experts], rng);
        let experts = (0..shape.n_experts)
            .map(|i| {
                Mlp::new(
                    store,
                    &format!("{name}.expert{i}"),
                    &[shape.input_dim, shape.expert_hidden[0], shape.expert_hidden[1], 1],
                    rng,
                )
            })
            .collect();
        Self { category_embedding, gate, experts, zero_category }
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    /// `e_c = [E_c[candidate], E_c[job]]`, or zeros when category input is disabled.
    pub fn gate_input(&self, store: &ParamStore, candidate_category: usize, job_category: usize) -> Result<Matrix> {
        let table = store.value(self.category_embedding);
        let de = table.cols();
        let mut e = Matrix::zeros(1, 2 * de);
        for (slot, cat) in [candidate_category, job_category].into_iter().enumerate() {
            if cat >= table.rows() {
                return Err(Error::Config(format!("unknown category id {cat} (vocabulary has {})", table.rows())));
            }
            if !self.zero_category {
                e.data_mut()[slot * de..(slot + 1) * de].copy_from_slice(table.row(cat));
            }
        }
        Ok(e)
    }

    /// `softmax(W2 ReLU(W1 e_c + b1) + b2)`
    pub fn gate_weights(&self, store: &ParamStore, e_c: &Matrix) -> Result<Matrix> {
        let want = self.gate.layers[0].fan_in(store);
        if e_c.cols() != want || e_c.rows() != 1 {
            return Err(Error::Dimension { op: "gate_weights", left: e_c.shape(), right: (1, want) });
        }
        Ok(softmax_rows(&self.gate.forward(store, e_c)?))
    }

    /// `W3 ReLU(W2 ReLU(W1 x + b1) + b2) + b3` for expert `i`.
    pub fn expert_forward(&self, store: &ParamStore, x: &Matrix, i: usize) -> Result<f64> {
        let expert = self
            .experts
            .get(i)
            .ok_or_else(|| Error::Config(format!("expert index {i} out of range (n_e = {})", self.experts.len())))?;
        Ok(expert.forward(store, x)?.data()[0])
    }

    /// `y = Σ_i G_i E_i(x)`
    pub fn predict(&self, store: &ParamStore, x: &Matrix, candidate_category: usize, job_category: usize) -> Result<f64> {
        self.forward_traced(store, x, candidate_category, job_category).map(|(y, _)| y)
    }

    pub fn forward_traced(
        &self,
        store: &ParamStore,
        x: &Matrix,
        candidate_category: usize,
        job_category: usize,
    ) -> Result<(f64, MoeTrace)> {
        let e_c = self.gate_input(store, candidate_category, job_category)?;
        let (logits, gate) = self.gate.forward_traced(store, &e_c)?;
        let weights = softmax_rows(&logits);
        let mut expert_traces = Vec::with_capacity(self.experts.len());
        let mut expert_outputs = Vec::with_capacity(self.experts.len());
        for e in &self.experts {
            let (out, tr) = e.forward_traced(store, x)?;
            expert_outputs.push(out.data()[0]);
            expert_traces.push(tr);
        }
        let y = weights.data().iter().zip(&expert_outputs).map(|(g, e)| g * e).sum();
        Ok((y, MoeTrace { categories: (candidate_category, job_category), gate, weights, expert_traces, expert_outputs }))
    }

    /// Accumulates parameter gradients for upstream `dy` and returns `dL/dx`.
    pub fn backward(&self, store: &ParamStore, trace: &MoeTrace, dy: f64, grads: &mut GradBuffer) -> Result<Matrix> {
        let mut dx: Option<Matrix> = None;
        for (i, e) in self.experts.iter().enumerate() {
            let g = trace.weights.data()[i];
            let d = e.backward(store, &trace.expert_traces[i], &Matrix::row_vector(&[dy * g]), grads)?;
            match dx.as_mut() {
                Some(acc) => acc.add_assign(&d)?,
                None => dx = Some(d),
            }
        }
        let dweights: Vec<f64> = trace.expert_outputs.iter().map(|e| dy * e).collect();
        let dlogits = softmax_rows_backward(&trace.weights, &Matrix::row_vector(&dweights));
        let de_c = self.gate.backward(store, &trace.gate, &dlogits, grads)?;
        if !self.zero_category {
            let table = grads.get_mut(self.category_embedding);
            let de = table.cols();
            let (cc, jc) = trace.categories;
            for (slot, cat) in [cc, jc].into_iter().enumerate() {
                for (t, &g) in table.row_mut(cat).iter_mut().zip(&de_c.data()[slot * de..(slot + 1) * de]) {
                    *t += g;
                }
            }
        }
        Ok(dx.expect("at least one expert"))
    }
}
