use indexmap::IndexMap;

use super::matrix::Matrix;
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Handle to an entry in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub trainable: bool,
}

/// Named tensors with gradient slots. Iteration follows insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: IndexMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor. Panics on a duplicate name, which is a layout bug.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = ParamId(self.params.len());
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, value, grad, trainable });
        id
    }

    /// Glorot-uniform weight, `limit = sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut SeededRng) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform(-limit, limit)).collect();
        self.add(name, Matrix::from_vec(rows, cols, data).expect("sized"), true)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros(rows, cols), true)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].grad
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| &self.params[id.0])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.id(name).map(move |id| &mut self.params[id.0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// A zeroed buffer shaped like every entry, for accumulating gradients.
    pub fn grad_buffer(&self) -> GradBuffer {
        GradBuffer { grads: self.params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect() }
    }

    pub fn accumulate(&mut self, buf: &GradBuffer) -> Result<()> {
        for (p, g) in self.params.iter_mut().zip(&buf.grads) {
            p.grad.add_assign(g)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Rounds every value through `f32`, the checkpoint storage precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in p.value.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for p in &self.params {
            if !p.grad.is_finite() {
                return Err(Error::DivergedParam { param: p.name.clone() });
            }
        }
        Ok(())
    }
}

/// Gradient accumulator aligned with a [`ParamStore`]'s entries.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    grads: Vec<Matrix>,
}

impl GradBuffer {
    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.grads[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn zero(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }
}
