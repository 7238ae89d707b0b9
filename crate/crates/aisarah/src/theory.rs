//! Theoretical step-size schedules and convergence bounds, evaluated
//! exactly on small problems.
//!
//! These routines recompute every per-sample smoothness constant at every
//! inner iteration, which costs O(n) work per step — they exist for
//! desk-scale verification, not training. [`theoretical_run`] refuses
//! nothing by itself, but the CLI caps it at 500 samples.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::leastsq::LeastSquares;
use crate::model::{norm_sq, sigmoid, LogisticModel};
use crate::optim::{one_step_newton, seeded_rng};

/// Result of the implicit line-segment smoothness fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSmoothness {
    pub value: f64,
    /// False when the fixed point hit the iteration cap; the last iterate
    /// is still returned.
    pub converged: bool,
}

/// Everything the theoretical schedules need from an objective.
pub trait TheoryObjective {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    /// Strong-convexity modulus (the ℓ2 weight).
    fn mu(&self) -> f64;
    fn full_gradient(&self, w: &[f64]) -> Vec<f64>;
    /// Gradient of the single-sample objective `f_i` (regularizer included).
    fn component_gradient(&self, w: &[f64], i: usize) -> Vec<f64>;
    /// Worst-case smoothness constant of component `i` over the whole space.
    fn component_bound(&self, i: usize) -> f64;
    /// Smoothness of component `i` over the segment `{w - ηv : η ∈ [0, 1/L]}`
    /// with `L` the value being solved for (implicit fixed point).
    fn segment_smoothness(&self, w: &[f64], v: &[f64], i: usize) -> SegmentSmoothness;
}

/// Largest per-sample smoothness constant — the classical step-size scale.
pub fn worst_case_smoothness<O: TheoryObjective + ?Sized>(obj: &O) -> f64 {
    (0..obj.n())
        .map(|i| obj.component_bound(i))
        .fold(f64::NEG_INFINITY, f64::max)
}

impl TheoryObjective for LogisticModel<'_> {
    fn n(&self) -> usize {
        LogisticModel::n(self)
    }

    fn dim(&self) -> usize {
        self.d()
    }

    fn mu(&self) -> f64 {
        LogisticModel::mu(self)
    }

    fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        LogisticModel::full_gradient(self, w)
    }

    fn component_gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        self.minibatch_gradient(w, &[i])
            .expect("singleton batch is never empty")
    }

    fn component_bound(&self, i: usize) -> f64 {
        0.25 * self.data().row_norm_sq(i) + self.lambda()
    }

    fn segment_smoothness(&self, w: &[f64], v: &[f64], i: usize) -> SegmentSmoothness {
        logistic_segment_smoothness(self, w, v, i)
    }
}

impl TheoryObjective for LeastSquares {
    fn n(&self) -> usize {
        LeastSquares::n(self)
    }

    fn dim(&self) -> usize {
        self.d()
    }

    fn mu(&self) -> f64 {
        self.lambda
    }

    fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        LeastSquares::full_gradient(self, w)
    }

    fn component_gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        LeastSquares::component_gradient(self, i, w)
    }

    fn component_bound(&self, i: usize) -> f64 {
        self.component_smoothness(i)
    }

    fn segment_smoothness(&self, _w: &[f64], _v: &[f64], i: usize) -> SegmentSmoothness {
        // Constant Hessian: the segment is irrelevant.
        SegmentSmoothness {
            value: self.component_smoothness(i),
            converged: true,
        }
    }
}

/// `s(z) = σ(z)(1 − σ(z))` — the logistic curvature weight.
fn s_of(z: f64) -> f64 {
    let sig = sigmoid(z);
    sig * (1.0 - sig)
}

/// Solves `L = max_{η ∈ [0, 1/L]} (s(z(η))·||x_i||² + λ)` for sample `i`,
/// where `z(η) = y_i x_iᵀ(w − ηv)` is affine in `η`.
///
/// The inner maximum is exact: `s` is even and unimodal with peak 1/4 at
/// `z = 0`, so over an interval it is attained at an endpoint or at the `η`
/// where `z` crosses zero. The outer fixed point starts from the global
/// bound `L₀ = ||x_i||²/4 + λ` (the smallest candidate interval) and
/// iterates to relative tolerance 1e-10 with a 100-iteration cap.
pub fn logistic_segment_smoothness(
    model: &LogisticModel,
    w: &[f64],
    v: &[f64],
    i: usize,
) -> SegmentSmoothness {
    let data = model.data();
    let x_sq = data.row_norm_sq(i);
    let lambda = model.lambda();
    if x_sq == 0.0 {
        return SegmentSmoothness {
            value: lambda,
            converged: true,
        };
    }
    let y = data.label(i);
    let z0 = y * data.dot_row(i, w);
    let slope = -y * data.dot_row(i, v); // z(η) = z0 + slope·η

    let segment_max = |h: f64| -> f64 {
        let mut s_max = s_of(z0).max(s_of(z0 + slope * h));
        if slope != 0.0 {
            let eta_star = -z0 / slope;
            if eta_star > 0.0 && eta_star < h {
                s_max = 0.25;
            }
        }
        s_max * x_sq + lambda
    };

    let mut l = 0.25 * x_sq + lambda;
    for _ in 0..100 {
        let next = segment_max(1.0 / l);
        if (next - l).abs() <= 1e-10 * l {
            return SegmentSmoothness {
                value: next,
                converged: true,
            };
        }
        l = next;
    }
    log::warn!("line-segment smoothness fixed point did not converge for sample {i}");
    SegmentSmoothness {
        value: l,
        converged: false,
    }
}

/// How inner samples are drawn in [`theoretical_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Uniform sampling; aggregate is `max_i L_i^t`.
    Uniform,
    /// Sampling proportional to `L_i^{t-1}` with the `1/(n p_i)` estimator
    /// correction; aggregate is `mean_i L_i^t`.
    Importance,
}

/// Convergence-rate coefficient `σ = 1/(μH) + η₀L⁰/(2 − η₀L⁰)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBound {
    pub mu: f64,
    pub h: f64,
    pub eta0: f64,
    pub l0: f64,
    pub sigma: f64,
}

impl SigmaBound {
    /// The bound only certifies linear convergence when `σ < 1`. With the
    /// schedule's own `η₀ = 1/L⁰` the second term is exactly 1, so the
    /// bound is vacuous there; callers should surface this flag.
    pub fn is_vacuous(&self) -> bool {
        !(self.sigma < 1.0)
    }
}

/// Evaluates the rate coefficient; `η₀L⁰ ≥ 2` makes it `+∞` (vacuous).
pub fn sigma_bound(mu: f64, h: f64, eta0: f64, l0: f64) -> Result<SigmaBound> {
    if !(mu > 0.0) || !(h > 0.0) || !(eta0 > 0.0) || !(l0 > 0.0) {
        return Err(Error::InvalidConfig(
            "sigma bound needs mu, H, eta0, L0 all positive".into(),
        ));
    }
    let product = eta0 * l0;
    let sigma = if product >= 2.0 {
        f64::INFINITY
    } else {
        1.0 / (mu * h) + product / (2.0 - product)
    };
    Ok(SigmaBound {
        mu,
        h,
        eta0,
        l0,
        sigma,
    })
}

/// One inner iteration of a theoretical run, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryStep {
    pub t: usize,
    pub eta: f64,
    /// `max_i L_i^t` (uniform) or `mean_i L_i^t` (importance).
    pub l_aggregate: f64,
}

/// One outer loop of a theoretical run.
#[derive(Debug, Clone)]
pub struct TheoryLoop {
    pub k: usize,
    pub steps: Vec<TheoryStep>,
    /// `H = Σ_t η_t` over this loop's m+1 steps.
    pub h: f64,
    pub sigma: SigmaBound,
    /// Iterate-selection weights `q_t = η_t / H`.
    pub qs: Vec<f64>,
    /// The randomly selected return iterate `w̃_k`.
    pub w_tilde: Vec<f64>,
    pub grad_norm_sq: f64,
    /// False if any segment-smoothness fixed point hit its cap this loop.
    pub all_converged: bool,
}

#[derive(Debug, Clone)]
pub struct TheoryRun {
    pub mode: SamplingMode,
    pub loops: Vec<TheoryLoop>,
    pub w_final: Vec<f64>,
}

fn aggregate(mode: SamplingMode, ls: &[f64]) -> f64 {
    match mode {
        SamplingMode::Uniform => ls.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
        SamplingMode::Importance => ls.iter().sum::<f64>() / ls.len() as f64,
    }
}

/// Exact-step-size recursive-gradient descent with per-sample smoothness
/// tracking.
///
/// Each outer loop: compute `v₀ = ∇P(w₀)` and every `L_i⁰`; set
/// `η₀ = 1/L⁰`. Each inner step: move the iterate, draw one sample
/// (uniform, or proportional to `L_i^{t-1}` with the unbiasedness
/// correction), refresh the estimator, recompute all `L_i^t`, and set
/// `η_t = min{1/L^t, (L^{t-1}/L^t)·η_{t-1}}`. The loop's return iterate is
/// drawn with weights `q_t = η_t/H`.
///
/// Every loop asserts the schedule's defining inequalities: `η_t·L^t ≤ 1`,
/// `η_t ≥ 1/L_max` and `H ≥ (m+1)/L_max` where `L_max` is the worst-case
/// per-sample bound.
pub fn theoretical_run<O: TheoryObjective>(
    obj: &O,
    m: usize,
    outer_loops: usize,
    mode: SamplingMode,
    seed: u64,
    w0: &[f64],
) -> Result<TheoryRun> {
    let n = obj.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if outer_loops == 0 {
        return Err(Error::InvalidConfig("need at least one outer loop".into()));
    }
    if w0.len() != obj.dim() {
        return Err(Error::InvalidConfig(format!(
            "w0 has dimension {}, objective expects {}",
            w0.len(),
            obj.dim()
        )));
    }
    let l_worst = worst_case_smoothness(obj);
    let mut rng = seeded_rng(seed);
    let mut w_start = w0.to_vec();
    let mut loops = Vec::with_capacity(outer_loops);

    for k in 1..=outer_loops {
        let mut w = w_start.clone();
        let mut v = obj.full_gradient(&w);
        let mut all_converged = true;
        let mut ls: Vec<f64> = (0..n)
            .map(|i| {
                let s = obj.segment_smoothness(&w, &v, i);
                all_converged &= s.converged;
                s.value
            })
            .collect();
        let mut l_agg = aggregate(mode, &ls);
        let mut eta = 1.0 / l_agg;
        let (eta0, l0) = (eta, l_agg);

        let mut steps = vec![TheoryStep {
            t: 0,
            eta,
            l_aggregate: l_agg,
        }];
        // Iterates w_0..w_m paired with weights η_0..η_m.
        let mut iterates = vec![w.clone()];

        for t in 1..=m {
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi -= eta * vi;
            }
            let w_prev = &iterates[t - 1];
            let (i_t, correction) = match mode {
                SamplingMode::Uniform => (rng.random_range(0..n), 1.0),
                SamplingMode::Importance => {
                    let total: f64 = ls.iter().sum();
                    let dist = WeightedIndex::new(ls.iter().copied()).map_err(|e| {
                        Error::InvalidConfig(format!("bad sampling weights: {e}"))
                    })?;
                    let i = rng.sample(&dist);
                    let p = ls[i] / total;
                    (i, 1.0 / (n as f64 * p))
                }
            };
            let g_new = obj.component_gradient(&w, i_t);
            let g_old = obj.component_gradient(w_prev, i_t);
            for ((vi, gn), go) in v.iter_mut().zip(&g_new).zip(&g_old) {
                *vi += correction * (gn - go);
            }
            for (i, li) in ls.iter_mut().enumerate() {
                let s = obj.segment_smoothness(&w, &v, i);
                all_converged &= s.converged;
                *li = s.value;
            }
            let l_prev = l_agg;
            l_agg = aggregate(mode, &ls);
            eta = (1.0 / l_agg).min(l_prev / l_agg * eta);
            assert!(
                eta * l_agg <= 1.0 + 1e-12,
                "step-size rule violated: eta*L = {}",
                eta * l_agg
            );
            assert!(
                eta >= 1.0 / l_worst * (1.0 - 1e-12),
                "eta fell below the worst-case step 1/L_max"
            );
            steps.push(TheoryStep {
                t,
                eta,
                l_aggregate: l_agg,
            });
            iterates.push(w.clone());
        }

        let h: f64 = steps.iter().map(|s| s.eta).sum();
        assert!(
            h >= (m + 1) as f64 / l_worst * (1.0 - 1e-12),
            "H fell below (m+1)/L_max"
        );
        let qs: Vec<f64> = steps.iter().map(|s| s.eta / h).collect();
        debug_assert!((qs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let pick = WeightedIndex::new(qs.iter().copied())
            .map_err(|e| Error::InvalidConfig(format!("bad iterate weights: {e}")))?;
        let chosen = rng.sample(&pick);
        let w_tilde = iterates[chosen].clone();
        let grad_norm_sq = norm_sq(&obj.full_gradient(&w_tilde));
        let sigma = sigma_bound(obj.mu(), h, eta0, l0)?;
        if sigma.is_vacuous() {
            log::debug!("loop {k}: sigma = {} >= 1, rate bound vacuous", sigma.sigma);
        }
        loops.push(TheoryLoop {
            k,
            steps,
            h,
            sigma,
            qs,
            w_tilde: w_tilde.clone(),
            grad_norm_sq,
            all_converged,
        });
        w_start = w_tilde;
    }

    Ok(TheoryRun {
        mode,
        loops,
        w_final: w_start,
    })
}

/// One outer loop of the bounded-step variant, for reporting.
#[derive(Debug, Clone)]
pub struct BoundedAltLoop {
    pub k: usize,
    pub w_tilde: Vec<f64>,
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct BoundedAltRun {
    pub loops: Vec<BoundedAltLoop>,
    /// Rate coefficient `σ_m^k = 1/(μ·α_min·(m+1))
    /// + (α_max/α_min)·(α_max·L_max)/(2 − α_max·L_max)`.
    pub sigma: f64,
    pub l_max: f64,
}

/// Recursive-gradient descent with the one-step-Newton estimate clamped
/// into `[alpha_min, alpha_max]` and uniform random-iterate return.
///
/// With `alpha_min == alpha_max` this is constant-step SARAH with
/// random-iterate return. Requires `alpha_max < 2/L_max` so the rate
/// coefficient is defined.
pub fn bounded_alt_run(
    model: &LogisticModel,
    m: usize,
    outer_loops: usize,
    alpha_min: f64,
    alpha_max: f64,
    seed: u64,
    w0: &[f64],
) -> Result<BoundedAltRun> {
    let n = LogisticModel::n(model);
    let l_max = model.max_component_smoothness();
    if !(alpha_min > 0.0) || alpha_min > alpha_max {
        return Err(Error::InvalidConfig(
            "need 0 < alpha_min <= alpha_max".into(),
        ));
    }
    if !(alpha_max < 2.0 / l_max) {
        return Err(Error::InvalidConfig(format!(
            "alpha_max = {alpha_max} must be below 2/L_max = {}",
            2.0 / l_max
        )));
    }
    if outer_loops == 0 {
        return Err(Error::InvalidConfig("need at least one outer loop".into()));
    }

    let mu = LogisticModel::mu(model);
    let sigma = 1.0 / (mu * alpha_min * (m + 1) as f64)
        + (alpha_max / alpha_min) * (alpha_max * l_max) / (2.0 - alpha_max * l_max);

    let mut rng = seeded_rng(seed);
    let mut w_start = w0.to_vec();
    let mut loops = Vec::with_capacity(outer_loops);
    for k in 1..=outer_loops {
        let mut w = w_start.clone();
        let mut v = model.full_gradient(&w);
        let mut iterates = vec![w.clone()];
        for _ in 1..=m {
            let i_t = rng.random_range(0..n);
            let batch = [i_t];
            let alpha = model
                .xi_derivatives(&w, &v, &batch)
                .and_then(|p| one_step_newton(&p))
                .unwrap_or(0.0)
                .clamp(alpha_min, alpha_max);
            let w_prev = w.clone();
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi -= alpha * vi;
            }
            let g_new = model.minibatch_gradient(&w, &batch)?;
            let g_old = model.minibatch_gradient(&w_prev, &batch)?;
            for ((vi, gn), go) in v.iter_mut().zip(&g_new).zip(&g_old) {
                *vi += gn - go;
            }
            iterates.push(w.clone());
        }
        let chosen = rng.random_range(0..iterates.len());
        let w_tilde = iterates[chosen].clone();
        let grad_norm_sq = norm_sq(&model.full_gradient(&w_tilde));
        loops.push(BoundedAltLoop {
            k,
            w_tilde: w_tilde.clone(),
            grad_norm_sq,
        });
        w_start = w_tilde;
    }
    Ok(BoundedAltRun {
        loops,
        sigma,
        l_max,
    })
}
