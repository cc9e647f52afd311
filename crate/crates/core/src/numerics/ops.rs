//! Differentiable primitives. Each forward has a matching `*_backward` that
//! returns (or accumulates) exact gradients given the upstream gradient.

use super::matrix::{axpy, dot, Matrix};
use crate::error::{Error, Result};

/// `x W + b`, with `b` broadcast over rows.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::Dimension { op: "affine(bias)", left: w.shape(), right: b.shape() });
    }
    let mut out = x.matmul(w).map_err(|_| Error::Dimension {
        op: "affine",
        left: x.shape(),
        right: w.shape(),
    })?;
    for r in 0..out.rows() {
        for (o, &bb) in out.row_mut(r).iter_mut().zip(b.data()) {
            *o += bb;
        }
    }
    Ok(out)
}

/// Gradient slots for [`affine_backward`].
pub struct AffineGrads<'a> {
    pub dx: Option<&'a mut Matrix>,
    pub dw: &'a mut Matrix,
    pub db: &'a mut Matrix,
}

/// Accumulates `dL/dx`, `dL/dW`, `dL/db` for `y = xW + b` given `dy`.
pub fn affine_backward(x: &Matrix, w: &Matrix, dy: &Matrix, grads: AffineGrads<'_>) -> Result<()> {
    let dw = x.t_matmul(dy)?;
    grads.dw.add_assign(&dw)?;
    for r in 0..dy.rows() {
        axpy(grads.db.data_mut(), 1.0, dy.row(r));
    }
    if let Some(dx) = grads.dx {
        let d = dy.matmul_t(w)?;
        dx.add_assign(&d)?;
    }
    Ok(())
}

pub fn relu(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Subgradient at exactly zero is zero.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    for (g, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *g = 0.0;
        }
    }
    dx
}

fn softmax_slice(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|v| *v /= sum);
}

/// Row-wise softmax with max subtraction. A row of all `-inf` yields zeros.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        softmax_slice(x.row(r), out.row_mut(r));
    }
    out
}

/// Softmax Jacobian-vector product: `dx = y ⊙ (dy - <dy, y>)` per row.
pub fn softmax_rows_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let yr = y.row(r);
        let dyr = dy.row(r);
        let inner = dot(yr, dyr);
        for ((d, &yy), &g) in dx.row_mut(r).iter_mut().zip(yr).zip(dyr) {
            *d = yy * (g - inner);
        }
    }
    dx
}

/// Result of [`scaled_dot_attention`], keeping the weights for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub output: Matrix,
    pub weights: Matrix,
}

/// `softmax(Q K^T / sqrt(d_k)) V` with a key mask (`true` = padded).
///
/// Padded keys receive a `-inf` logit. When every key is padded the output is
/// the zero matrix and no gradient flows to `K` or `V`.
pub fn scaled_dot_attention(q: &Matrix, k: &Matrix, v: &Matrix, mask: &[bool]) -> Result<AttentionOutput> {
    if q.cols() != k.cols() {
        return Err(Error::Dimension { op: "attention(QK)", left: q.shape(), right: k.shape() });
    }
    if k.rows() != v.rows() || k.rows() != mask.len() {
        return Err(Error::Dimension { op: "attention(KV)", left: k.shape(), right: (v.rows(), mask.len()) });
    }
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut logits = q.matmul_t(k)?;
    for r in 0..logits.rows() {
        for (l, &m) in logits.row_mut(r).iter_mut().zip(mask) {
            *l = if m { f64::NEG_INFINITY } else { *l * scale };
        }
    }
    let weights = softmax_rows(&logits);
    let output = weights.matmul(v)?;
    Ok(AttentionOutput { output, weights })
}

pub struct AttentionGrads {
    pub dq: Matrix,
    pub dk: Matrix,
    pub dv: Matrix,
}

pub fn attention_backward(q: &Matrix, k: &Matrix, v: &Matrix, weights: &Matrix, dout: &Matrix) -> Result<AttentionGrads> {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let dv = weights.t_matmul(dout)?;
    let dweights = dout.matmul_t(v)?;
    let mut dlogits = softmax_rows_backward(weights, &dweights);
    dlogits.scale(scale);
    let dq = dlogits.matmul(k)?;
    let dk = dlogits.t_matmul(q)?;
    Ok(AttentionGrads { dq, dk, dv })
}
