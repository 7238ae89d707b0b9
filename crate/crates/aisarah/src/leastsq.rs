//! Least-squares components `f_i(w) = 1/2 (x_i^T w - y_i)^2 + lambda/2 ||w||^2`.
//!
//! A constant-curvature stand-in for the logistic components, used by tests
//! and theory-level checks: its sub-problem `xi` is exactly quadratic, so the
//! one-step Newton solution is the exact minimizer and the line-segment
//! smoothness constant collapses to `||x_i||^2 + lambda`.

use crate::error::{Error, Result};
use crate::model::{dot, norm_sq, CurvatureProbe};

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lambda: f64,
}

impl LeastSquares {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, lambda: f64) -> Self {
        assert_eq!(rows.len(), targets.len());
        assert!(!rows.is_empty());
        LeastSquares {
            rows,
            targets,
            lambda,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.rows[0].len()
    }

    pub fn component_gradient(&self, i: usize, w: &[f64]) -> Vec<f64> {
        let r = dot(&self.rows[i], w) - self.targets[i];
        let mut g: Vec<f64> = self.rows[i].iter().map(|&x| r * x).collect();
        for (gj, &wj) in g.iter_mut().zip(w) {
            *gj += self.lambda * wj;
        }
        g
    }

    pub fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d()];
        for i in 0..self.n() {
            let r = dot(&self.rows[i], w) - self.targets[i];
            for (gj, &x) in g.iter_mut().zip(&self.rows[i]) {
                *gj += r * x;
            }
        }
        let inv = 1.0 / self.n() as f64;
        for (gj, &wj) in g.iter_mut().zip(w) {
            *gj = *gj * inv + self.lambda * wj;
        }
        g
    }

    /// `H_S v` with the constant batch Hessian `H_S = (1/b) sum x_i x_i^T + lambda I`.
    fn hessian_vec(&self, v: &[f64], batch: &[usize]) -> Vec<f64> {
        let b = batch.len() as f64;
        let mut hv = vec![0.0; self.d()];
        for &i in batch {
            let t = dot(&self.rows[i], v);
            for (h, &x) in hv.iter_mut().zip(&self.rows[i]) {
                *h += t * x / b;
            }
        }
        for (h, &vj) in hv.iter_mut().zip(v) {
            *h += self.lambda * vj;
        }
        hv
    }

    /// `xi'(0) = -2 v^T H_S v`, `xi''(0) = 2 ||H_S v||^2`: `xi` is exactly
    /// quadratic in `alpha`, so the probe determines it completely.
    pub fn xi_derivatives(&self, _w: &[f64], v: &[f64], batch: &[usize]) -> Result<CurvatureProbe> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let hv = self.hessian_vec(v, batch);
        Ok(CurvatureProbe {
            xi_prime0: -2.0 * dot(v, &hv),
            xi_double_prime0: 2.0 * norm_sq(&hv),
            batch: batch.to_vec(),
        })
    }

    /// Exact minimizer of `xi(alpha) = ||v - alpha H_S v||^2`.
    pub fn exact_xi_minimizer(&self, v: &[f64], batch: &[usize]) -> f64 {
        let hv = self.hessian_vec(v, batch);
        dot(v, &hv) / norm_sq(&hv)
    }

    /// `xi(alpha)` evaluated directly from gradients, for oracle checks.
    pub fn xi_value(&self, w: &[f64], v: &[f64], batch: &[usize], alpha: f64) -> f64 {
        let shifted: Vec<f64> = w.iter().zip(v).map(|(&wj, &vj)| wj - alpha * vj).collect();
        let b = batch.len() as f64;
        let mut g = vec![0.0; self.d()];
        for &i in batch {
            let r = dot(&self.rows[i], &shifted) - self.targets[i];
            let r0 = dot(&self.rows[i], w) - self.targets[i];
            for (gj, &x) in g.iter_mut().zip(&self.rows[i]) {
                *gj += (r - r0) * x / b;
            }
        }
        for ((gj, &ws), (&w0, &vj)) in g.iter_mut().zip(&shifted).zip(w.iter().zip(v)) {
            *gj += self.lambda * (ws - w0) + vj;
        }
        norm_sq(&g)
    }

    /// Segment smoothness is the constant `||x_i||^2 + lambda`.
    pub fn component_smoothness(&self, i: usize) -> f64 {
        norm_sq(&self.rows[i]) + self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::one_step_newton;
    use approx::assert_relative_eq;

    #[test]
    fn singleton_newton_is_inverse_row_norm() {
        let ls = LeastSquares::new(vec![vec![3.0, 4.0]], vec![1.5], 0.0);
        let v = vec![0.7, -0.3];
        let probe = ls.xi_derivatives(&[0.2, 0.4], &v, &[0]).unwrap();
        let alpha = one_step_newton(&probe).unwrap();
        assert_relative_eq!(alpha, 1.0 / 25.0, max_relative = 1e-14);
    }

    #[test]
    fn one_step_newton_hits_exact_minimum() {
        let ls = LeastSquares::new(
            vec![vec![1.0, 2.0, 0.5], vec![0.0, 1.0, -1.0], vec![2.0, 0.0, 1.0]],
            vec![0.3, -0.8, 1.1],
            0.05,
        );
        let w = vec![0.1, -0.4, 0.9];
        let v = vec![1.0, 0.5, -0.25];
        let batch = [0, 1, 2];
        let probe = ls.xi_derivatives(&w, &v, &batch).unwrap();
        let alpha = one_step_newton(&probe).unwrap();
        let exact = ls.exact_xi_minimizer(&v, &batch);
        assert_relative_eq!(alpha, exact, max_relative = 1e-12);
        // xi at the returned alpha matches the analytic minimum value
        let xi_min = ls.xi_value(&w, &v, &batch, exact);
        let xi_newton = ls.xi_value(&w, &v, &batch, alpha);
        assert!((xi_newton - xi_min).abs() <= 1e-12 * xi_min.max(1.0));
    }
}
