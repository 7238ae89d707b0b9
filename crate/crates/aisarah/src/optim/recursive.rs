//! Recursive-gradient methods: AI-SARAH and the fixed-step baselines
//! SARAH, SARAH+ and SVRG.
//!
//! All four share the same inner-iteration shape — draw a batch, move the
//! iterate, refresh the gradient estimator — and draw exactly one batch per
//! inner iteration from a ChaCha20 stream seeded by the run seed, so two
//! algorithms given the same seed see the same index sequence.

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::model::{norm_sq, LogisticModel};

use super::{
    one_step_newton, sample_batch, seeded_rng, MetricsRow, OptimizerRun, Recorder,
    StepSizeController, DEFAULT_BATCH,
};

/// Inner-loop length for the fixed-length methods (SARAH, SVRG).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSize {
    /// `ceil(passes * n / b)` iterations.
    Passes(f64),
    /// An explicit iteration count.
    Iterations(usize),
}

impl InnerSize {
    fn resolve(self, n: usize, b: usize) -> usize {
        match self {
            InnerSize::Passes(p) => (p * n as f64 / b as f64).ceil() as usize,
            InnerSize::Iterations(m) => m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AiSarahOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Testing hook: bypass the sub-problem entirely and use this constant
    /// step. The per-iteration batch draw still happens, keeping the RNG
    /// stream aligned with an adaptive run.
    pub pinned_alpha: Option<f64>,
    /// Testing hook: override the `ceil(5n/b)` inner-loop safety cap.
    pub inner_cap: Option<usize>,
}

impl AiSarahOptions {
    pub fn new(seed: u64, budget_passes: f64) -> Self {
        AiSarahOptions {
            batch_size: DEFAULT_BATCH,
            seed,
            budget_passes,
            gamma: 1.0 / 32.0,
            beta: 0.999,
            pinned_alpha: None,
            inner_cap: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SarahOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub alpha: f64,
    pub inner: InnerSize,
}

#[derive(Debug, Clone)]
pub struct SarahPlusOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SvrgOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub alpha: f64,
    pub inner: InnerSize,
}

fn validate(batch_size: usize, n: usize, budget_passes: f64) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    if batch_size > n {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch_size} exceeds dataset size {n}"
        )));
    }
    if !(budget_passes > 0.0) {
        return Err(Error::InvalidConfig("pass budget must be positive".into()));
    }
    Ok(())
}

fn axpy(w: &mut [f64], scale: f64, v: &[f64]) {
    for (wi, vi) in w.iter_mut().zip(v) {
        *wi += scale * vi;
    }
}

/// `v += g(w_new) - g(w_old)` — the recursive estimator refresh.
fn recursive_update(
    model: &LogisticModel,
    v: &mut [f64],
    batch: &[usize],
    w_new: &[f64],
    w_old: &[f64],
) -> Result<()> {
    let g_new = model.minibatch_gradient(w_new, batch)?;
    let g_old = model.minibatch_gradient(w_old, batch)?;
    for ((vi, gn), go) in v.iter_mut().zip(&g_new).zip(&g_old) {
        *vi += gn - go;
    }
    Ok(())
}

/// Tuning-free recursive-gradient descent with implicit local step sizes.
///
/// Each inner iteration probes the curvature of the residual sub-problem at
/// the current iterate, takes one Newton step on it to get a local step
/// estimate, and caps it by the adaptive upper bound maintained in `ctrl`.
/// The inner loop stops when the estimator has shrunk below `gamma` times
/// its value at the start of the loop, or at the `ceil(5n/b)` safety cap.
pub fn run_ai_sarah(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &AiSarahOptions,
    ctrl: &mut StepSizeController,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate(b, n, opts.budget_passes)?;
    if !(opts.gamma >= 0.0 && opts.gamma < 1.0) {
        return Err(Error::InvalidConfig("gamma must be in [0, 1)".into()));
    }
    let cap = opts
        .inner_cap
        .unwrap_or_else(|| (5.0 * n as f64 / b as f64).ceil() as usize);
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut samples = 0u64;
    let mut outer_loops = 0usize;
    let mut inner_steps = 0usize;
    let mut cap_hits = 0usize;
    let mut containment_violations = 0usize;
    // Fallback step for degenerate probes before any upper bound exists;
    // computed at most once.
    let mut fallback_alpha: Option<f64> = None;

    rec.record(0.0, &w, None, None);

    while (samples as f64) < budget_samples {
        let mut v = model.full_gradient(&w);
        samples += n as u64;
        outer_loops += 1;
        let v0_sq = norm_sq(&v);
        rec.record_if_due(samples as f64 / n as f64, &w, None, Some(ctrl.alpha_max()));
        if v0_sq == 0.0 {
            break; // exact stationary point
        }

        let w_anchor = w.clone();
        let mut alpha_sum = 0.0;
        let mut v_norm_max = v0_sq.sqrt();
        let mut last_alpha = None;
        let mut t = 0usize;
        while norm_sq(&v) >= opts.gamma * v0_sq && t < cap {
            let batch = sample_batch(&mut rng, n, b);
            let alpha = match opts.pinned_alpha {
                Some(a) => a,
                None => {
                    let step = model
                        .xi_derivatives(&w, &v, &batch)
                        .and_then(|p| one_step_newton(&p));
                    match step {
                        Ok(a) if a > 0.0 => ctrl.update(a)?,
                        _ => {
                            // Degenerate probe: reuse the current upper bound,
                            // or 1/L on the very first estimate.
                            log::warn!("degenerate sub-problem probe; using fallback step");
                            if ctrl.alpha_max().is_finite() {
                                ctrl.alpha_max()
                            } else {
                                *fallback_alpha
                                    .get_or_insert_with(|| 1.0 / model.global_lipschitz())
                            }
                        }
                    }
                }
            };
            let w_prev = w.clone();
            axpy(&mut w, -alpha, &v);
            recursive_update(model, &mut v, &batch, &w, &w_prev)?;
            samples += b as u64;
            t += 1;
            inner_steps += 1;
            alpha_sum += alpha;
            last_alpha = Some(alpha);
            v_norm_max = v_norm_max.max(norm_sq(&v).sqrt());

            // Triangle-inequality containment: the iterate cannot have moved
            // farther than the accumulated steps times the largest estimator.
            let mut drift = 0.0;
            for (wi, ai) in w.iter().zip(&w_anchor) {
                drift += (wi - ai) * (wi - ai);
            }
            if drift.sqrt() > alpha_sum * v_norm_max * (1.0 + 1e-9) + 1e-300 {
                containment_violations += 1;
                log::error!(
                    "iterate containment violated at inner step {t}: \
                     {} > {}",
                    drift.sqrt(),
                    alpha_sum * v_norm_max
                );
            }

            rec.record_if_due(
                samples as f64 / n as f64,
                &w,
                Some(alpha),
                Some(ctrl.alpha_max()),
            );
        }
        if t == cap && norm_sq(&v) >= opts.gamma * v0_sq && opts.gamma > 0.0 {
            cap_hits += 1;
            log::warn!("inner loop stopped by safety cap ({cap} iterations)");
        }
        rec.record(samples as f64 / n as f64, &w, last_alpha, Some(ctrl.alpha_max()));
    }

    Ok(finish(
        w,
        model,
        outer_loops,
        inner_steps,
        samples,
        rec.into_rows(),
        cap_hits,
        containment_violations,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    w: Vec<f64>,
    model: &LogisticModel,
    outer_loops: usize,
    inner_steps: usize,
    samples: u64,
    rows: Vec<MetricsRow>,
    cap_hits: usize,
    containment_violations: usize,
) -> OptimizerRun {
    let v = model.full_gradient(&w);
    OptimizerRun {
        w,
        v,
        outer_loops,
        inner_steps,
        samples,
        rows,
        cap_hits,
        containment_violations,
    }
}

/// Fixed-step SARAH with a fixed inner-loop length.
///
/// An inner size of zero iterations degenerates to plain full-gradient
/// descent: each outer loop takes a single step along the full gradient.
pub fn run_sarah(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &SarahOptions,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate(b, n, opts.budget_passes)?;
    if !(opts.alpha > 0.0) {
        return Err(Error::NonPositiveStep(opts.alpha));
    }
    let m_iters = opts.inner.resolve(n, b);
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut samples = 0u64;
    let mut outer_loops = 0usize;
    let mut inner_steps = 0usize;

    rec.record(0.0, &w, None, None);
    while (samples as f64) < budget_samples {
        let mut v = model.full_gradient(&w);
        samples += n as u64;
        outer_loops += 1;
        rec.record_if_due(samples as f64 / n as f64, &w, None, None);
        if m_iters == 0 {
            axpy(&mut w, -opts.alpha, &v);
            rec.record(samples as f64 / n as f64, &w, Some(opts.alpha), None);
            continue;
        }
        for _ in 0..m_iters {
            let batch = sample_batch(&mut rng, n, b);
            let w_prev = w.clone();
            axpy(&mut w, -opts.alpha, &v);
            recursive_update(model, &mut v, &batch, &w, &w_prev)?;
            samples += b as u64;
            inner_steps += 1;
            rec.record_if_due(samples as f64 / n as f64, &w, Some(opts.alpha), None);
        }
        rec.record(samples as f64 / n as f64, &w, Some(opts.alpha), None);
    }
    Ok(finish(w, model, outer_loops, inner_steps, samples, rec.into_rows(), 0, 0))
}

/// Fixed-step SARAH+ — the SARAH inner loop terminated by the estimator
/// shrinkage test `||v_t||^2 < gamma ||v_0||^2`, with the same `ceil(5n/b)`
/// safety cap used by the adaptive method.
pub fn run_sarah_plus(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &SarahPlusOptions,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate(b, n, opts.budget_passes)?;
    if !(opts.alpha > 0.0) {
        return Err(Error::NonPositiveStep(opts.alpha));
    }
    if !(opts.gamma > 0.0 && opts.gamma < 1.0) {
        return Err(Error::InvalidConfig("gamma must be in (0, 1)".into()));
    }
    let cap = (5.0 * n as f64 / b as f64).ceil() as usize;
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut samples = 0u64;
    let mut outer_loops = 0usize;
    let mut inner_steps = 0usize;
    let mut cap_hits = 0usize;

    rec.record(0.0, &w, None, None);
    while (samples as f64) < budget_samples {
        let mut v = model.full_gradient(&w);
        samples += n as u64;
        outer_loops += 1;
        let v0_sq = norm_sq(&v);
        rec.record_if_due(samples as f64 / n as f64, &w, None, None);
        if v0_sq == 0.0 {
            break;
        }
        let mut t = 0usize;
        while norm_sq(&v) >= opts.gamma * v0_sq && t < cap {
            let batch = sample_batch(&mut rng, n, b);
            let w_prev = w.clone();
            axpy(&mut w, -opts.alpha, &v);
            recursive_update(model, &mut v, &batch, &w, &w_prev)?;
            samples += b as u64;
            t += 1;
            inner_steps += 1;
            rec.record_if_due(samples as f64 / n as f64, &w, Some(opts.alpha), None);
        }
        if t == cap && norm_sq(&v) >= opts.gamma * v0_sq {
            cap_hits += 1;
        }
        rec.record(samples as f64 / n as f64, &w, Some(opts.alpha), None);
    }
    Ok(finish(w, model, outer_loops, inner_steps, samples, rec.into_rows(), cap_hits, 0))
}

/// Fixed-step SVRG: the estimator re-centers on the outer-loop anchor each
/// iteration instead of accumulating recursively.
pub fn run_svrg(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &SvrgOptions,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate(b, n, opts.budget_passes)?;
    if !(opts.alpha > 0.0) {
        return Err(Error::NonPositiveStep(opts.alpha));
    }
    let m_iters = opts.inner.resolve(n, b);
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut samples = 0u64;
    let mut outer_loops = 0usize;
    let mut inner_steps = 0usize;

    rec.record(0.0, &w, None, None);
    while (samples as f64) < budget_samples {
        let g0 = model.full_gradient(&w);
        samples += n as u64;
        outer_loops += 1;
        rec.record_if_due(samples as f64 / n as f64, &w, None, None);
        if m_iters == 0 {
            axpy(&mut w, -opts.alpha, &g0);
            rec.record(samples as f64 / n as f64, &w, Some(opts.alpha), None);
            continue;
        }
        let anchor = w.clone();
        let mut v = g0.clone();
        for _ in 0..m_iters {
            let batch = sample_batch(&mut rng, n, b);
            axpy(&mut w, -opts.alpha, &v);
            let g_new = model.minibatch_gradient(&w, &batch)?;
            let g_anchor = model.minibatch_gradient(&anchor, &batch)?;
            for ((vi, (gn, ga)), g0i) in v
                .iter_mut()
                .zip(g_new.iter().zip(&g_anchor))
                .zip(&g0)
            {
                *vi = gn - ga + g0i;
            }
            samples += b as u64;
            inner_steps += 1;
            rec.record_if_due(samples as f64 / n as f64, &w, Some(opts.alpha), None);
        }
        rec.record(samples as f64 / n as f64, &w, Some(opts.alpha), None);
    }
    Ok(finish(w, model, outer_loops, inner_steps, samples, rec.into_rows(), 0, 0))
}
