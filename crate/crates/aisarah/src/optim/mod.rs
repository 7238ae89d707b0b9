//! Trajectory-producing optimizers: AI-SARAH and the classical baselines
//! SARAH, SARAH+, SVRG, ADAM and SGD with momentum.
//!
//! Every run owns its mutable state and PRNG; runs sharing a model may
//! execute concurrently. Work is accounted in sample evaluations: a full
//! gradient costs `n`, an inner iteration costs `b`, and `effective_pass =
//! samples / n`.

mod first_order;
mod recursive;

pub use first_order::{run_adam, run_sgd_momentum, AdamOptions, SgdMomentumOptions};
pub use recursive::{
    run_ai_sarah, run_sarah, run_sarah_plus, run_svrg, AiSarahOptions, InnerSize, SarahOptions,
    SarahPlusOptions, SvrgOptions,
};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::model::{norm_sq, CurvatureProbe, LogisticModel};

/// Default mini-batch size. Algorithm-agnostic; CLI-overridable.
pub const DEFAULT_BATCH: usize = 64;

/// Metrics are recorded every this many effective passes (plus one row per
/// outer loop boundary).
pub const METRICS_INTERVAL: f64 = 0.1;

/// One-step Newton on the sub-problem: `alpha = -xi'(0) / |xi''(0)|`.
///
/// Signals a degenerate probe when `|xi''(0)|` underflows or the result is
/// not finite; callers fall back to the current upper bound (or `1/L`).
pub fn one_step_newton(probe: &CurvatureProbe) -> Result<f64> {
    if !probe.xi_prime0.is_finite() || !probe.xi_double_prime0.is_finite() {
        return Err(Error::DegenerateProbe);
    }
    if probe.xi_double_prime0.abs() <= 1e-300 {
        return Err(Error::DegenerateProbe);
    }
    let alpha = -probe.xi_prime0 / probe.xi_double_prime0.abs();
    if !alpha.is_finite() {
        return Err(Error::DegenerateProbe);
    }
    Ok(alpha)
}

/// Adaptive upper-bound state: exponential smoothing on the harmonic mean of
/// the one-step Newton estimates, `alpha_max = 1/delta`.
#[derive(Debug, Clone)]
pub struct StepSizeController {
    pub gamma: f64,
    pub beta: f64,
    delta: Option<f64>,
    alpha_max: f64,
}

impl Default for StepSizeController {
    fn default() -> Self {
        Self::new(1.0 / 32.0, 0.999)
    }
}

impl StepSizeController {
    pub fn new(gamma: f64, beta: f64) -> Self {
        assert!((0.0..1.0).contains(&gamma), "gamma must be in [0, 1)");
        assert!(beta > 0.0 && beta < 1.0, "beta must be in (0, 1)");
        StepSizeController {
            gamma,
            beta,
            delta: None,
            alpha_max: f64::INFINITY,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    /// Feeds one estimate `alpha_tilde` and returns the step to use,
    /// `min(alpha_tilde, alpha_max)`, with `alpha_max` refreshed from the
    /// updated `delta`. `delta` persists across outer loops.
    pub fn update(&mut self, alpha_tilde: f64) -> Result<f64> {
        if !(alpha_tilde > 0.0) || !alpha_tilde.is_finite() {
            return Err(Error::NonPositiveStep(alpha_tilde));
        }
        let delta = match self.delta {
            None => 1.0 / alpha_tilde,
            Some(d) => self.beta * d + (1.0 - self.beta) / alpha_tilde,
        };
        self.delta = Some(delta);
        self.alpha_max = 1.0 / delta;
        Ok(alpha_tilde.min(self.alpha_max))
    }
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub effective_pass: f64,
    pub wall_clock_s: f64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub step_size: Option<f64>,
    pub alpha_max: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// A finished seeded trajectory.
#[derive(Debug, Clone)]
pub struct OptimizerRun {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub outer_loops: usize,
    pub inner_steps: usize,
    pub samples: u64,
    pub rows: Vec<MetricsRow>,
    /// Inner loops terminated by the safety cap rather than the guard.
    pub cap_hits: usize,
    /// Iterate-containment runtime check failures (expected 0).
    pub containment_violations: usize,
}

impl OptimizerRun {
    pub fn final_row(&self) -> &MetricsRow {
        self.rows.last().expect("runs always record at least one row")
    }
}

/// Fraction of test rows with `sign(x_i^T w) = y_i`; `sign(0)` counts as +1.
pub fn accuracy(test: &SparseDataset, w: &[f64]) -> Result<f64> {
    if test.n() == 0 {
        return Err(Error::EmptyTestSet);
    }
    let mut hits = 0usize;
    for i in 0..test.n() {
        let pred = if test.dot_row(i, w) >= 0.0 { 1.0 } else { -1.0 };
        if pred == test.label(i) {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.n() as f64)
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `b` indices drawn uniformly without replacement, fresh every iteration.
pub(crate) fn sample_batch(rng: &mut ChaCha20Rng, n: usize, b: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, b.min(n)).into_vec()
}

/// Shared metrics recording: one row whenever the sample counter crosses a
/// [`METRICS_INTERVAL`] boundary, plus explicit rows at outer-loop ends.
pub(crate) struct Recorder<'m> {
    model: &'m LogisticModel<'m>,
    test: Option<&'m SparseDataset>,
    start: Instant,
    next_mark: f64,
    rows: Vec<MetricsRow>,
}

impl<'m> Recorder<'m> {
    pub fn new(model: &'m LogisticModel<'m>, test: Option<&'m SparseDataset>) -> Self {
        Recorder {
            model,
            test,
            start: Instant::now(),
            next_mark: 0.0,
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, pass: f64, w: &[f64], step: Option<f64>, alpha_max: Option<f64>) {
        let grad = self.model.full_gradient(w);
        let row = MetricsRow {
            effective_pass: pass,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            loss: self.model.loss(w),
            grad_norm_sq: norm_sq(&grad),
            step_size: step,
            alpha_max: alpha_max.filter(|a| a.is_finite()),
            test_accuracy: self.test.map(|t| accuracy(t, w).expect("non-empty test set")),
        };
        self.rows.push(row);
        self.next_mark = (pass / METRICS_INTERVAL).floor() * METRICS_INTERVAL + METRICS_INTERVAL;
    }

    pub fn record_if_due(
        &mut self,
        pass: f64,
        w: &[f64],
        step: Option<f64>,
        alpha_max: Option<f64>,
    ) {
        if pass + 1e-12 >= self.next_mark {
            self.record(pass, w, step, alpha_max);
        }
    }

    pub fn into_rows(self) -> Vec<MetricsRow> {
        self.rows
    }
}
