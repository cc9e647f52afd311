use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction. Moments are kept per store entry.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || store.iter().map(|(_, p)| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
        Self { m: zeros(), v: zeros() }
    }

    pub fn first_moment(&self, index: usize) -> &Matrix {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &Matrix {
        &self.v[index]
    }

    /// One update at 1-based `step`. Frozen entries are skipped. Gradients are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64, step: u64) -> Result<()> {
        store.check_finite()?;
        let t = step.max(1) as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            if p.trainable {
                let m = self.m[i].data_mut();
                let v = self.v[i].data_mut();
                for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m).zip(v) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
            p.grad.fill(0.0);
        }
        Ok(())
    }
}

/// Plain gradient descent, zeroing gradients afterwards.
pub fn sgd_step(store: &mut ParamStore, lr: f64) -> Result<()> {
    store.check_finite()?;
    for p in store.params_mut() {
        if p.trainable {
            for (w, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                *w -= lr * g;
            }
        }
        p.grad.fill(0.0);
    }
    Ok(())
}

pub enum Optimizer {
    Adam(Adam),
    Sgd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, store: &ParamStore) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(store)),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, lr: f64, step: u64) -> Result<()> {
        if !(lr >= 0.0) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {lr}")));
        }
        match self {
            Optimizer::Adam(a) => a.step(store, lr, step),
            Optimizer::Sgd => sgd_step(store, lr),
        }
    }
}
