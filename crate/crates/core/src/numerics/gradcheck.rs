use super::params::ParamStore;
use super::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates sampled per tensor; `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, max_coords_per_param: None, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub per_param: Vec<(String, f64)>,
    pub coords_checked: usize,
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the analytic gradients already stored in `store` against central
/// differences `(f(θ+h) - f(θ-h)) / 2h` of `f`. Only trainable entries are
/// checked. Values are restored bit-for-bit afterwards.
pub fn finite_diff_check<F>(store: &mut ParamStore, mut f: F, opts: &GradCheckOptions) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut rng = SeededRng::new(opts.seed);
    let h = opts.step;
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, per_param: Vec::new(), coords_checked: 0 };

    for id in ids {
        let n = store.value(id).len();
        let mut coords: Vec<usize> = (0..n).collect();
        if let Some(k) = opts.max_coords_per_param {
            if k < n {
                rng.shuffle(&mut coords);
                coords.truncate(k);
                coords.sort_unstable();
            }
        }
        let mut param_max: f64 = 0.0;
        for c in coords {
            let original = store.value(id).data()[c];
            store.value_mut(id).data_mut()[c] = original + h;
            let plus = f(store);
            store.value_mut(id).data_mut()[c] = original - h;
            let minus = f(store);
            store.value_mut(id).data_mut()[c] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = store.grad(id).data()[c];
            let err = relative_error(analytic, numeric);
            report.coords_checked += 1;
            if err > param_max {
                param_max = err;
            }
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.param(id).name.clone(), c));
            }
        }
        report.per_param.push((store.param(id).name.clone(), param_max));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::Matrix;

    fn quadratic_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("theta", Matrix::row_vector(&[0.3, -1.2, 2.5, 0.0]), true);
        s
    }

    fn sum_sq(s: &ParamStore) -> f64 {
        s.get("theta").unwrap().value.data().iter().map(|v| v * v).sum()
    }

    fn fill_grad(s: &mut ParamStore, bias: f64) {
        let g: Vec<f64> = s.get("theta").unwrap().value.data().iter().map(|v| 2.0 * v + bias).collect();
        s.get_mut("theta").unwrap().grad.data_mut().copy_from_slice(&g);
    }

    #[test]
    fn quadratic_is_exact() {
        let mut s = quadratic_store();
        fill_grad(&mut s, 0.0);
        let r = finite_diff_check(&mut s, sum_sq, &GradCheckOptions::default());
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.coords_checked, 4);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut s = quadratic_store();
        fill_grad(&mut s, 0.1);
        let r = finite_diff_check(&mut s, sum_sq, &GradCheckOptions::default());
        assert!(r.max_rel_error > 1e-2, "{r:?}");
        assert_eq!(r.worst.as_ref().unwrap().0, "theta");
    }

    #[test]
    fn values_restored_and_frozen_skipped() {
        let mut s = quadratic_store();
        s.add("frozen", Matrix::row_vector(&[1.0]), false);
        fill_grad(&mut s, 0.0);
        let before = s.clone();
        let r = finite_diff_check(&mut s, sum_sq, &GradCheckOptions::default());
        assert_eq!(s, before);
        assert_eq!(r.per_param.len(), 1);
    }
}
