//! l2-regularized logistic-regression objective and its derivative and
//! curvature queries.
//!
//! The objective is `P(w) = (1/n) sum_i log(1 + exp(-y_i x_i^T w)) +
//! (lambda/2) ||w||^2` over a preprocessed [`SparseDataset`]. All queries
//! are pure functions of `(model, inputs)` and accumulate serially in
//! ascending index order so results are bit-reproducible.

use crate::data::SparseDataset;
use crate::error::{Error, Result};

/// `1 / (1 + exp(-z))` without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow for large `|z|`.
fn log1p_exp_neg(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// First and second directional derivatives of the sub-problem
/// `xi(alpha) = ||grad f_S(w - alpha v) - grad f_S(w) + v||^2` at `alpha = 0`,
/// together with the batch they were computed on.
#[derive(Debug, Clone)]
pub struct CurvatureProbe {
    pub xi_prime0: f64,
    pub xi_double_prime0: f64,
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticModel<'a> {
    data: &'a SparseDataset,
    lambda: f64,
}

impl<'a> LogisticModel<'a> {
    pub fn new(data: &'a SparseDataset, lambda: f64) -> Self {
        debug_assert!(lambda >= 0.0);
        let canonical = lambda == 0.0 || (lambda - 1.0 / data.n() as f64).abs() < f64::EPSILON;
        if !canonical {
            log::warn!(
                "lambda = {lambda} is neither 0 nor 1/n = {}",
                1.0 / data.n() as f64
            );
        }
        LogisticModel { data, lambda }
    }

    /// Regularized model with `lambda = 1/n`.
    pub fn regularized(data: &'a SparseDataset) -> Self {
        Self::new(data, 1.0 / data.n() as f64)
    }

    pub fn data(&self) -> &'a SparseDataset {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Strong-convexity estimate, equal to `lambda`.
    pub fn mu(&self) -> f64 {
        self.lambda
    }

    /// Margin and curvature terms of sample `i` at `w`:
    /// `z = y_i x_i^T w`, `s = sigma(z) (1 - sigma(z))`, `s' = s (1 - 2 sigma(z))`.
    pub fn margin_terms(&self, w: &[f64], i: usize) -> (f64, f64, f64) {
        let z = self.data.label(i) * self.data.dot_row(i, w);
        let sig = sigmoid(z);
        let s = sig * (1.0 - sig);
        let sp = s * (1.0 - 2.0 * sig);
        (z, s, sp)
    }

    /// `P(w)`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            let z = self.data.label(i) * self.data.dot_row(i, w);
            acc += log1p_exp_neg(z);
        }
        acc / n as f64 + 0.5 * self.lambda * norm_sq(w)
    }

    fn accumulate_gradient(&self, w: &[f64], batch: impl Iterator<Item = usize>, out: &mut [f64]) {
        let mut count = 0usize;
        for i in batch {
            let z = self.data.label(i) * self.data.dot_row(i, w);
            let coeff = -self.data.label(i) * (1.0 - sigmoid(z));
            self.data.add_row_into(i, coeff, out);
            count += 1;
        }
        let inv = 1.0 / count as f64;
        for (o, &wj) in out.iter_mut().zip(w) {
            *o = *o * inv + self.lambda * wj;
        }
    }

    /// `grad P(w)`.
    pub fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d()];
        self.accumulate_gradient(w, 0..self.n(), &mut g);
        g
    }

    /// `(1/b) sum_{i in batch} grad f_i(w)`; with `batch = 0..n` this equals
    /// [`Self::full_gradient`] with identical summation order.
    pub fn minibatch_gradient(&self, w: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut g = vec![0.0; self.d()];
        self.accumulate_gradient(w, batch.iter().copied(), &mut g);
        Ok(g)
    }

    /// Closed-form `xi'(0)` and `xi''(0)` for the batch sub-problem, in a
    /// single pass over the batch rows:
    ///
    /// `xi'(0)  = -2 [ (1/b) sum s_i (x_i^T v)^2 + lambda ||v||^2 ]`
    /// `xi''(0) =  2 ||H_S v||^2 + 2 (1/b) sum s'_i y_i (x_i^T v)^3`
    ///
    /// with `H_S v = (1/b) sum s_i (x_i^T v) x_i + lambda v`.
    pub fn xi_derivatives(&self, w: &[f64], v: &[f64], batch: &[usize]) -> Result<CurvatureProbe> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let b = batch.len() as f64;
        let mut hv = vec![0.0; self.d()];
        let mut quad = 0.0; // (1/b) sum s_i (x_i^T v)^2
        let mut cubic = 0.0; // (1/b) sum s'_i y_i (x_i^T v)^3
        for &i in batch {
            let (_, s, sp) = self.margin_terms(w, i);
            let t = self.data.dot_row(i, v);
            self.data.add_row_into(i, s * t / b, &mut hv);
            quad += s * t * t;
            cubic += sp * self.data.label(i) * t * t * t;
        }
        quad /= b;
        cubic /= b;
        let v_norm_sq = norm_sq(v);
        for (h, &vj) in hv.iter_mut().zip(v) {
            *h += self.lambda * vj;
        }
        Ok(CurvatureProbe {
            xi_prime0: -2.0 * (quad + self.lambda * v_norm_sq),
            xi_double_prime0: 2.0 * norm_sq(&hv) + 2.0 * cubic,
            batch: batch.to_vec(),
        })
    }

    /// Global Lipschitz constant `L = (1/4) lambda_max((1/n) X^T X) + lambda`,
    /// by power iteration on the implicit Gram matrix (deterministic all-ones
    /// start, relative Rayleigh-quotient tolerance 1e-12, cap 10000).
    pub fn global_lipschitz(&self) -> f64 {
        0.25 * self.gram_lambda_max() + self.lambda
    }

    fn gram_lambda_max(&self) -> f64 {
        let d = self.d();
        let n = self.n() as f64;
        if self.data.nnz() == 0 {
            return 0.0;
        }
        let mut u = vec![1.0 / (d as f64).sqrt(); d];
        let mut rayleigh = 0.0f64;
        for _ in 0..10_000 {
            // Au = (1/n) X^T (X u)
            let mut au = vec![0.0; d];
            for i in 0..self.data.n() {
                let t = self.data.dot_row(i, &u);
                self.data.add_row_into(i, t / n, &mut au);
            }
            let r = dot(&u, &au);
            let norm = norm_sq(&au).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (uj, &aj) in u.iter_mut().zip(&au) {
                *uj = aj / norm;
            }
            if (r - rayleigh).abs() <= 1e-12 * r.abs() {
                return r;
            }
            rayleigh = r;
        }
        rayleigh
    }

    /// Exact local curvature bound of sample `i` at `w`:
    /// `||grad^2 f_i(w)|| = s_i(w) ||x_i||^2 + lambda`.
    pub fn pointwise_smoothness(&self, w: &[f64], i: usize) -> f64 {
        let (_, s, _) = self.margin_terms(w, i);
        s * self.data.row_norm_sq(i) + self.lambda
    }

    /// `max_i (0.25 ||x_i||^2 + lambda)`: the largest global smoothness
    /// constant over the component functions.
    pub fn max_component_smoothness(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n() {
            best = best.max(self.data.row_norm_sq(i));
        }
        0.25 * best + self.lambda
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use approx::assert_relative_eq;
    use std::io::Cursor;

    fn toy() -> SparseDataset {
        // two samples, opposite labels, identical feature
        let raw = data::parse_libsvm(Cursor::new("+1 1:1\n-1 1:1\n")).unwrap();
        data::preprocess(&raw).unwrap()
    }

    #[test]
    fn margin_terms_at_zero_and_saturation() {
        let ds = toy();
        let m = LogisticModel::new(&ds, 0.0);
        let w = vec![0.0; ds.d()];
        let (z, s, _) = m.margin_terms(&w, 0);
        assert_eq!(z, 0.0);
        assert_eq!(s, 0.25);
        // saturation: huge margin drives s and s' to zero
        let w = vec![100.0, 100.0];
        let (z, s, sp) = m.margin_terms(&w, 0);
        assert!(z > 50.0);
        assert!(s < 1e-40);
        assert!(sp.abs() < 1e-40);
    }

    #[test]
    fn margin_terms_at_z_one() {
        // frozen against an independent 50-digit evaluation of
        // sigma(1) = 1/(1+e^-1), s = sigma(1-sigma), s' = s(1-2 sigma)
        let rows = vec![vec![1.0]];
        let ds = data::from_dense_rows(&rows, &[1.0]);
        let m = LogisticModel::new(&ds, 0.0);
        let (z, s, sp) = m.margin_terms(&[1.0], 0);
        assert_eq!(z, 1.0);
        assert_relative_eq!(s, 0.19661193324148185, max_relative = 1e-15);
        assert_relative_eq!(sp, -0.09085774767294841, max_relative = 1e-14);
    }

    #[test]
    fn loss_at_origin_is_log_two() {
        let ds = toy();
        let w = vec![0.0; ds.d()];
        let m0 = LogisticModel::new(&ds, 0.0);
        let m1 = LogisticModel::regularized(&ds);
        assert_relative_eq!(m0.loss(&w), std::f64::consts::LN_2, max_relative = 1e-15);
        assert_relative_eq!(m1.loss(&w), std::f64::consts::LN_2, max_relative = 1e-15);
    }

    #[test]
    fn loss_saturates_to_regularizer() {
        // single sample with large positive margin: logistic term vanishes
        let rows = vec![vec![1.0, 1.0]];
        let ds = data::from_dense_rows(&rows, &[1.0]);
        let lambda = 0.5;
        let m = LogisticModel::new(&ds, lambda);
        let w = vec![500.0, 0.0];
        assert_relative_eq!(m.loss(&w), 0.5 * lambda * 250_000.0, max_relative = 1e-12);
    }

    #[test]
    fn gradient_is_zero_under_label_symmetry() {
        let ds = toy();
        let m = LogisticModel::new(&ds, 0.0);
        let g = m.full_gradient(&vec![0.0; ds.d()]);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bias_only_gradient_closed_form() {
        // rows with no features: gradient at w=0 is -mean(y)/2 on the bias
        let raw = data::parse_libsvm(Cursor::new("1\n1\n0\n")).unwrap();
        let ds = data::preprocess(&raw).unwrap();
        let m = LogisticModel::new(&ds, 0.0);
        let g = m.full_gradient(&vec![0.0; ds.d()]);
        let mean_y = (1.0 + 1.0 - 1.0) / 3.0;
        assert_relative_eq!(g[ds.d() - 1], -mean_y / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn minibatch_full_consistency_and_singleton() {
        let raw = data::parse_libsvm(Cursor::new("1 1:0.8 2:0.6\n-1 1:1\n1 2:1\n")).unwrap();
        let ds = data::preprocess(&raw).unwrap();
        let m = LogisticModel::regularized(&ds);
        let w: Vec<f64> = (0..ds.d()).map(|j| 0.1 * (j as f64 + 1.0)).collect();
        let full = m.full_gradient(&w);
        let mb = m.minibatch_gradient(&w, &[0, 1, 2]).unwrap();
        for (a, b) in full.iter().zip(&mb) {
            assert!((a - b).abs() <= 1e-15);
        }
        // singleton at w=0: -0.5 y_i x_i
        let w0 = vec![0.0; ds.d()];
        let g = m.minibatch_gradient(&w0, &[1]).unwrap();
        let mut expect = vec![0.0; ds.d()];
        ds.add_row_into(1, 0.5, &mut expect); // -y_1 = +1
        for (a, b) in g.iter().zip(&expect) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
        assert!(m.minibatch_gradient(&w0, &[]).is_err());
    }

    #[test]
    fn xi_derivatives_zero_direction() {
        let ds = toy();
        let m = LogisticModel::regularized(&ds);
        let w = vec![0.1, -0.2];
        let p = m.xi_derivatives(&w, &[0.0, 0.0], &[0, 1]).unwrap();
        assert_eq!(p.xi_prime0, 0.0);
        assert_eq!(p.xi_double_prime0, 0.0);
        assert!(m.xi_derivatives(&w, &[1.0, 1.0], &[]).is_err());
    }

    #[test]
    fn xi_prime_is_nonpositive() {
        let raw = data::parse_libsvm(Cursor::new("1 1:0.8 2:0.6\n-1 1:1\n1 2:1\n")).unwrap();
        let ds = data::preprocess(&raw).unwrap();
        let m = LogisticModel::regularized(&ds);
        let w = vec![0.3, -0.7, 0.2];
        for v in [[1.0, 0.0, 0.0], [0.2, -0.4, 1.5], [-3.0, 2.0, 0.1]] {
            let p = m.xi_derivatives(&w, &v, &[0, 1, 2]).unwrap();
            assert!(p.xi_prime0 < 0.0);
        }
    }

    #[test]
    fn global_lipschitz_simple_cases() {
        // single row x = (1): L = 0.25
        let ds = data::from_dense_rows(&[vec![1.0]], &[1.0]);
        let m = LogisticModel::new(&ds, 0.0);
        assert_relative_eq!(m.global_lipschitz(), 0.25, max_relative = 1e-10);

        // two orthonormal rows: lambda_max((1/2) I) = 1/2, L = 0.125
        let ds = data::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, -1.0]);
        let m = LogisticModel::new(&ds, 0.0);
        assert_relative_eq!(m.global_lipschitz(), 0.125, max_relative = 1e-10);

        // zero matrix
        let ds = data::from_dense_rows(&[vec![0.0], vec![0.0]], &[1.0, -1.0]);
        let m = LogisticModel::new(&ds, 0.5);
        assert_eq!(m.global_lipschitz(), 0.5);
    }

    #[test]
    fn pointwise_smoothness_closed_forms() {
        // unit chi + bias: ||x||^2 = 2, s(0) = 0.25 -> L_i = 0.5
        let ds = toy();
        let m = LogisticModel::new(&ds, 0.0);
        assert_relative_eq!(
            m.pointwise_smoothness(&vec![0.0; ds.d()], 0),
            0.5,
            max_relative = 1e-15
        );
        // bias-only row, lambda = 0.01 -> 0.25 * 1 + 0.01
        let raw = data::parse_libsvm(Cursor::new("1\n0\n")).unwrap();
        let ds = data::preprocess(&raw).unwrap();
        let m = LogisticModel::new(&ds, 0.01);
        assert_relative_eq!(
            m.pointwise_smoothness(&vec![0.0; ds.d()], 0),
            0.26,
            max_relative = 1e-15
        );
    }
}
