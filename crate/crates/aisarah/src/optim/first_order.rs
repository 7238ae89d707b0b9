//! Single-loop stochastic baselines: ADAM and SGD with momentum.
//!
//! Both take one mini-batch step per iteration and optionally decay the
//! step size by a fixed percentage after every completed effective pass.

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::model::LogisticModel;

use super::{sample_batch, seeded_rng, OptimizerRun, Recorder, DEFAULT_BATCH};

#[derive(Debug, Clone)]
pub struct AdamOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub alpha0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Step-size decay in percent applied after each completed pass.
    pub decay_pct: f64,
}

impl AdamOptions {
    pub fn new(seed: u64, budget_passes: f64, alpha0: f64, decay_pct: f64) -> Self {
        AdamOptions {
            batch_size: DEFAULT_BATCH,
            seed,
            budget_passes,
            alpha0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_pct,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SgdMomentumOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub budget_passes: f64,
    pub alpha0: f64,
    pub momentum: f64,
    pub decay_pct: f64,
}

impl SgdMomentumOptions {
    pub fn new(seed: u64, budget_passes: f64, alpha0: f64, decay_pct: f64) -> Self {
        SgdMomentumOptions {
            batch_size: DEFAULT_BATCH,
            seed,
            budget_passes,
            alpha0,
            momentum: 0.9,
            decay_pct,
        }
    }
}

fn validate_single_loop(
    batch_size: usize,
    n: usize,
    budget_passes: f64,
    alpha0: f64,
    decay_pct: f64,
) -> Result<()> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch_size} must be in [1, {n}]"
        )));
    }
    if !(budget_passes > 0.0) {
        return Err(Error::InvalidConfig("pass budget must be positive".into()));
    }
    if !(alpha0 > 0.0) {
        return Err(Error::NonPositiveStep(alpha0));
    }
    if !(0.0..100.0).contains(&decay_pct) {
        return Err(Error::InvalidConfig("decay must be in [0, 100) percent".into()));
    }
    Ok(())
}

pub fn run_adam(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &AdamOptions,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate_single_loop(b, n, opts.budget_passes, opts.alpha0, opts.decay_pct)?;
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut m1 = vec![0.0; w.len()];
    let mut m2 = vec![0.0; w.len()];
    let mut samples = 0u64;
    let mut steps = 0usize;
    let mut alpha = opts.alpha0;
    let mut passes_done = 0u64;

    rec.record(0.0, &w, None, None);
    while (samples as f64) < budget_samples {
        let batch = sample_batch(&mut rng, n, b);
        let g = model.minibatch_gradient(&w, &batch)?;
        steps += 1;
        let t = steps as i32;
        let bc1 = 1.0 - opts.beta1.powi(t);
        let bc2 = 1.0 - opts.beta2.powi(t);
        for i in 0..w.len() {
            m1[i] = opts.beta1 * m1[i] + (1.0 - opts.beta1) * g[i];
            m2[i] = opts.beta2 * m2[i] + (1.0 - opts.beta2) * g[i] * g[i];
            let m_hat = m1[i] / bc1;
            let v_hat = m2[i] / bc2;
            w[i] -= alpha * m_hat / (v_hat.sqrt() + opts.epsilon);
        }
        samples += b as u64;
        while samples / n as u64 > passes_done {
            passes_done += 1;
            alpha *= 1.0 - opts.decay_pct / 100.0;
        }
        rec.record_if_due(samples as f64 / n as f64, &w, Some(alpha), None);
    }
    rec.record(samples as f64 / n as f64, &w, Some(alpha), None);

    let v = model.full_gradient(&w);
    Ok(OptimizerRun {
        w,
        v,
        outer_loops: 0,
        inner_steps: steps,
        samples,
        rows: rec.into_rows(),
        cap_hits: 0,
        containment_violations: 0,
    })
}

pub fn run_sgd_momentum(
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    opts: &SgdMomentumOptions,
    w0: &[f64],
) -> Result<OptimizerRun> {
    let n = model.data().n();
    let b = opts.batch_size;
    validate_single_loop(b, n, opts.budget_passes, opts.alpha0, opts.decay_pct)?;
    if !(0.0..1.0).contains(&opts.momentum) {
        return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
    }
    let budget_samples = opts.budget_passes * n as f64;

    let mut rng = seeded_rng(opts.seed);
    let mut rec = Recorder::new(model, test);
    let mut w = w0.to_vec();
    let mut buf = vec![0.0; w.len()];
    let mut samples = 0u64;
    let mut steps = 0usize;
    let mut alpha = opts.alpha0;
    let mut passes_done = 0u64;

    rec.record(0.0, &w, None, None);
    while (samples as f64) < budget_samples {
        let batch = sample_batch(&mut rng, n, b);
        let g = model.minibatch_gradient(&w, &batch)?;
        for i in 0..w.len() {
            buf[i] = opts.momentum * buf[i] + g[i];
            w[i] -= alpha * buf[i];
        }
        samples += b as u64;
        steps += 1;
        while samples / n as u64 > passes_done {
            passes_done += 1;
            alpha *= 1.0 - opts.decay_pct / 100.0;
        }
        rec.record_if_due(samples as f64 / n as f64, &w, Some(alpha), None);
    }
    rec.record(samples as f64 / n as f64, &w, Some(alpha), None);

    let v = model.full_gradient(&w);
    Ok(OptimizerRun {
        w,
        v,
        outer_loops: 0,
        inner_steps: steps,
        samples,
        rows: rec.into_rows(),
        cap_hits: 0,
        containment_violations: 0,
    })
}
