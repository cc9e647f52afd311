use super::matrix::Matrix;
use super::ops::{affine, affine_backward, relu, relu_backward, AffineGrads};
use super::params::{GradBuffer, ParamId, ParamStore};
use super::rng::SeededRng;
use crate::error::Result;

/// Affine layer `xW + b`: Glorot weight, zero bias.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let w = store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng);
        let b = store.add_zeros(format!("{name}.b"), 1, fan_out);
        Self { w, b }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        affine(x, store.value(self.w), store.value(self.b))
    }

    pub fn fan_in(&self, store: &ParamStore) -> usize {
        store.value(self.w).rows()
    }

    /// Accumulates weight gradients and returns `dL/dx`.
    pub fn backward(&self, store: &ParamStore, x: &Matrix, dy: &Matrix, grads: &mut GradBuffer) -> Result<Matrix> {
        let w = store.value(self.w);
        let mut dx = Matrix::zeros(x.rows(), x.cols());
        let mut dw = std::mem::replace(grads.get_mut(self.w), Matrix::zeros(0, 0));
        let mut db = std::mem::replace(grads.get_mut(self.b), Matrix::zeros(0, 0));
        let res = affine_backward(x, w, dy, AffineGrads { dx: Some(&mut dx), dw: &mut dw, db: &mut db });
        *grads.get_mut(self.w) = dw;
        *grads.get_mut(self.b) = db;
        res.map(|_| dx)
    }
}

/// Stack of dense layers with ReLU between them and no activation after the last.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Matrix>,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`; layers are named `{name}.l{i}`.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut SeededRng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(store, &format!("{name}.l{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        self.forward_traced(store, x).map(|(y, _)| y)
    }

    pub fn forward_traced(&self, store: &ParamStore, x: &Matrix) -> Result<(Matrix, MlpTrace)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(store, &h)?;
            inputs.push(h);
            if i + 1 < self.layers.len() {
                h = relu(&z);
                pre.push(z);
            } else {
                h = z;
            }
        }
        Ok((h, MlpTrace { inputs, pre }))
    }

    pub fn backward(&self, store: &ParamStore, trace: &MlpTrace, dy: &Matrix, grads: &mut GradBuffer) -> Result<Matrix> {
        let mut d = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                d = relu_backward(&trace.pre[i], &d);
            }
            d = self.layers[i].backward(store, &trace.inputs[i], &d, grads)?;
        }
        Ok(d)
    }
}
