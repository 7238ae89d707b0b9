//! Experiment orchestration: seeded multi-algorithm runs, tuning sweeps,
//! and deterministic CSV assembly.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::model::LogisticModel;
use crate::optim::{
    self, AdamOptions, AiSarahOptions, InnerSize, MetricsRow, OptimizerRun, SarahOptions,
    SarahPlusOptions, SgdMomentumOptions, StepSizeController, SvrgOptions,
};
use crate::theory::TheoryRun;

/// CSV header shared by every run artifact.
pub const CSV_HEADER: &str =
    "dataset,algo,reg,seed,effective_pass,wall_clock_s,loss,grad_norm_sq,step_size,alpha_max,test_accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algo {
    AiSarah,
    Sarah,
    SarahPlus,
    Svrg,
    Adam,
    SgdMomentum,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::AiSarah,
        Algo::Sarah,
        Algo::SarahPlus,
        Algo::Svrg,
        Algo::Adam,
        Algo::SgdMomentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::AiSarah => "ai-sarah",
            Algo::Sarah => "sarah",
            Algo::SarahPlus => "sarah+",
            Algo::Svrg => "svrg",
            Algo::Adam => "adam",
            Algo::SgdMomentum => "sgd-m",
        }
    }

    pub fn parse(s: &str) -> Result<Algo> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown algorithm '{s}'; valid: {}",
                    Algo::ALL.map(Algo::name).join(", ")
                ))
            })
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A batch of seeded runs over one dataset.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub dataset: String,
    pub regularized: bool,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    /// Effective-pass budget; `None` uses the dataset's registered default.
    pub budget_passes: Option<f64>,
    pub batch_size: usize,
    pub params: AlgoParams,
}

/// Hyper-parameters for a single run; fields are read per-algorithm.
#[derive(Debug, Clone)]
pub struct AlgoParams {
    /// Estimator-shrinkage threshold (adaptive method and SARAH+).
    pub gamma: f64,
    /// Upper-bound smoothing factor (adaptive method).
    pub beta: f64,
    /// Fixed step for SARAH/SARAH+/SVRG; `None` means `0.5/L`.
    pub alpha: Option<f64>,
    /// Inner-loop length in passes for SARAH/SVRG.
    pub inner_passes: f64,
    /// Initial step for ADAM and SGD with momentum.
    pub alpha0: f64,
    /// Per-pass step decay in percent for ADAM and SGD with momentum.
    pub decay_pct: f64,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            gamma: 1.0 / 32.0,
            beta: 0.999,
            alpha: None,
            inner_passes: 1.0,
            alpha0: 0.01,
            decay_pct: 0.0,
        }
    }
}

/// Seeded initial iterate: i.i.d. standard normal scaled by 0.01, so every
/// margin starts near zero and curvature weights near their 1/4 peak.
pub fn initial_iterate(seed: u64, d: usize) -> Vec<f64> {
    let mut rng = optim::seeded_rng(seed);
    (0..d)
        .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Executes one algorithm for one seed. `l_global` is consulted only when a
/// fixed-step method runs with `alpha: None` (default `0.5/L`).
#[allow(clippy::too_many_arguments)]
pub fn run_one(
    algo: Algo,
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    seed: u64,
    budget_passes: f64,
    batch_size: usize,
    params: &AlgoParams,
    l_global: Option<f64>,
) -> Result<OptimizerRun> {
    let w0 = initial_iterate(seed, model.d());
    let default_alpha = || -> Result<f64> {
        match params.alpha {
            Some(a) => Ok(a),
            None => {
                let l = l_global.ok_or_else(|| {
                    Error::InvalidConfig("fixed-step method needs alpha or L".into())
                })?;
                Ok(0.5 / l)
            }
        }
    };
    match algo {
        Algo::AiSarah => {
            let mut opts = AiSarahOptions::new(seed, budget_passes);
            opts.batch_size = batch_size;
            opts.gamma = params.gamma;
            opts.beta = params.beta;
            let mut ctrl = StepSizeController::new(params.gamma, params.beta);
            optim::run_ai_sarah(model, test, &opts, &mut ctrl, &w0)
        }
        Algo::Sarah => optim::run_sarah(
            model,
            test,
            &SarahOptions {
                batch_size,
                seed,
                budget_passes,
                alpha: default_alpha()?,
                inner: InnerSize::Passes(params.inner_passes),
            },
            &w0,
        ),
        Algo::SarahPlus => optim::run_sarah_plus(
            model,
            test,
            &SarahPlusOptions {
                batch_size,
                seed,
                budget_passes,
                alpha: default_alpha()?,
                gamma: params.gamma,
            },
            &w0,
        ),
        Algo::Svrg => optim::run_svrg(
            model,
            test,
            &SvrgOptions {
                batch_size,
                seed,
                budget_passes,
                alpha: default_alpha()?,
                inner: InnerSize::Passes(params.inner_passes),
            },
            &w0,
        ),
        Algo::Adam => {
            let mut opts = AdamOptions::new(seed, budget_passes, params.alpha0, params.decay_pct);
            opts.batch_size = batch_size;
            optim::run_adam(model, test, &opts, &w0)
        }
        Algo::SgdMomentum => {
            let mut opts =
                SgdMomentumOptions::new(seed, budget_passes, params.alpha0, params.decay_pct);
            opts.batch_size = batch_size;
            optim::run_sgd_momentum(model, test, &opts, &w0)
        }
    }
}

/// One emitted CSV record.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub dataset: String,
    pub algo: Algo,
    pub regularized: bool,
    pub seed: u64,
    pub metrics: MetricsRow,
}

fn fmt_float(x: f64) -> String {
    // 17 significant digits: enough to round-trip any f64 exactly.
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Renders rows sorted by (algo, seed, effective_pass) under [`CSV_HEADER`].
pub fn render_csv(rows: &mut [CsvRow]) -> String {
    rows.sort_by(|a, b| {
        (a.algo, a.seed)
            .cmp(&(b.algo, b.seed))
            .then(a.metrics.effective_pass.total_cmp(&b.metrics.effective_pass))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows.iter() {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.algo,
            if r.regularized { 1 } else { 0 },
            r.seed,
            fmt_float(m.effective_pass),
            fmt_float(m.wall_clock_s),
            fmt_float(m.loss),
            fmt_float(m.grad_norm_sq),
            fmt_opt(m.step_size),
            fmt_opt(m.alpha_max),
            fmt_opt(m.test_accuracy),
        ));
    }
    out
}

/// Runs every (algorithm, seed) pair in the plan and returns CSV rows.
pub fn run_plan(
    plan: &ExperimentPlan,
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    default_budget: f64,
) -> Result<Vec<CsvRow>> {
    if plan.seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    let budget = plan.budget_passes.unwrap_or(default_budget);
    let needs_l = plan.params.alpha.is_none()
        && plan
            .algos
            .iter()
            .any(|a| matches!(a, Algo::Sarah | Algo::SarahPlus | Algo::Svrg));
    let l_global = needs_l.then(|| model.global_lipschitz());
    let mut rows = Vec::new();
    for &algo in &plan.algos {
        for &seed in &plan.seeds {
            let run = run_one(
                algo,
                model,
                test,
                seed,
                budget,
                plan.batch_size,
                &plan.params,
                l_global,
            )?;
            rows.extend(run.rows.into_iter().map(|metrics| CsvRow {
                dataset: plan.dataset.clone(),
                algo,
                regularized: plan.regularized,
                seed,
                metrics,
            }));
        }
    }
    Ok(rows)
}

/// One point of a tuning lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPoint {
    /// SARAH / SVRG: step = `alpha_frac / L`, inner loop `inner_passes`.
    SarahLike { alpha_frac: f64, inner_passes: f64 },
    /// SARAH+: step = `alpha_frac / L`, shrinkage threshold `gamma`.
    SarahPlus { alpha_frac: f64, gamma: f64 },
    /// ADAM / SGD with momentum: initial step and per-pass decay percent.
    FirstOrder { alpha0: f64, decay_pct: f64 },
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridPoint::SarahLike {
                alpha_frac,
                inner_passes,
            } => write!(f, "alpha_frac={alpha_frac};inner_passes={inner_passes}"),
            GridPoint::SarahPlus { alpha_frac, gamma } => {
                write!(f, "alpha_frac={alpha_frac};gamma={gamma}")
            }
            GridPoint::FirstOrder { alpha0, decay_pct } => {
                write!(f, "alpha0={alpha0:e};decay_pct={decay_pct}")
            }
        }
    }
}

/// Full hyper-parameter lattice for one algorithm: 160 points for SARAH and
/// SVRG, 50 for SARAH+, 300 for ADAM and SGD with momentum. The adaptive
/// method has nothing to tune.
pub fn tuning_grid(algo: Algo) -> Result<Vec<GridPoint>> {
    let step_fracs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    match algo {
        Algo::AiSarah => Err(Error::InvalidConfig(
            "the adaptive method is tuning-free; no grid defined".into(),
        )),
        Algo::Sarah | Algo::Svrg => {
            // 10 steps x 16 inner sizes (0.5..=2.0 passes, step 0.1) = 160
            let mut grid = Vec::with_capacity(160);
            for &f in &step_fracs {
                for j in 5..=20 {
                    grid.push(GridPoint::SarahLike {
                        alpha_frac: f,
                        inner_passes: j as f64 / 10.0,
                    });
                }
            }
            Ok(grid)
        }
        Algo::SarahPlus => {
            // 10 steps x 5 thresholds = 50
            let mut grid = Vec::with_capacity(50);
            for &f in &step_fracs {
                for k in [2.0, 4.0, 8.0, 16.0, 32.0] {
                    grid.push(GridPoint::SarahPlus {
                        alpha_frac: f,
                        gamma: 1.0 / k,
                    });
                }
            }
            Ok(grid)
        }
        Algo::Adam | Algo::SgdMomentum => {
            // 60 log-spaced steps on [1e-3, 10] x 5 decay rates = 300
            let mut grid = Vec::with_capacity(300);
            for j in 0..60 {
                let alpha0 = 10f64.powf(-3.0 + 4.0 * j as f64 / 59.0);
                for decay in [0.0, 1.0, 5.0, 10.0, 15.0] {
                    grid.push(GridPoint::FirstOrder {
                        alpha0,
                        decay_pct: decay,
                    });
                }
            }
            Ok(grid)
        }
    }
}

fn params_for(point: &GridPoint, base: &AlgoParams, l_global: f64) -> AlgoParams {
    let mut p = base.clone();
    match *point {
        GridPoint::SarahLike {
            alpha_frac,
            inner_passes,
        } => {
            p.alpha = Some(alpha_frac / l_global);
            p.inner_passes = inner_passes;
        }
        GridPoint::SarahPlus { alpha_frac, gamma } => {
            p.alpha = Some(alpha_frac / l_global);
            p.gamma = gamma;
        }
        GridPoint::FirstOrder { alpha0, decay_pct } => {
            p.alpha0 = alpha0;
            p.decay_pct = decay_pct;
        }
    }
    p
}

/// One (configuration, seed) outcome of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config_index: usize,
    pub params: String,
    pub seed: u64,
    pub initial_loss: f64,
    pub ending_loss: f64,
    /// True when the loss ever rose above its initial value.
    pub spiked: bool,
}

/// Sweep result: every row plus the selected configuration, if any survived
/// the stability filter.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub algo: Algo,
    pub rows: Vec<SweepRow>,
    /// `(config_index, params, mean ending loss)` of the winner.
    pub best: Option<(usize, String, f64)>,
}

impl TuneOutcome {
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("algo,config,params,seed,spiked,initial_loss,ending_loss\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.algo,
                r.config_index,
                r.params,
                r.seed,
                if r.spiked { 1 } else { 0 },
                fmt_float(r.initial_loss),
                fmt_float(r.ending_loss),
            ));
        }
        out
    }
}

/// Runs `grid x seeds`, disqualifies configurations whose loss ever exceeds
/// its initial value in any run, and selects the minimum mean ending loss
/// among the survivors. `best` is `None` when nothing is stable.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    algo: Algo,
    model: &LogisticModel,
    test: Option<&SparseDataset>,
    grid: &[GridPoint],
    seeds: &[u64],
    budget_passes: f64,
    batch_size: usize,
    base: &AlgoParams,
) -> Result<TuneOutcome> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty tuning grid".into()));
    }
    let needs_l = grid
        .iter()
        .any(|g| matches!(g, GridPoint::SarahLike { .. } | GridPoint::SarahPlus { .. }));
    let l_global = if needs_l { model.global_lipschitz() } else { 0.0 };

    let mut rows = Vec::with_capacity(grid.len() * seeds.len());
    for (ci, point) in grid.iter().enumerate() {
        let params = params_for(point, base, l_global);
        for &seed in seeds {
            let run = run_one(
                algo,
                model,
                test,
                seed,
                budget_passes,
                batch_size,
                &params,
                Some(l_global),
            )?;
            let initial = run.rows.first().expect("at least one row").loss;
            let spiked = run.rows.iter().any(|r| r.loss > initial);
            rows.push(SweepRow {
                config_index: ci,
                params: point.to_string(),
                seed,
                initial_loss: initial,
                ending_loss: run.final_row().loss,
                spiked,
            });
        }
    }
    let best = select_best(&rows);
    Ok(TuneOutcome { algo, rows, best })
}

/// Selection rule as a pure function of sweep rows, so it can be re-derived
/// from the emitted CSV.
pub fn select_best(rows: &[SweepRow]) -> Option<(usize, String, f64)> {
    let max_config = rows.iter().map(|r| r.config_index).max()?;
    let mut best: Option<(usize, String, f64)> = None;
    for ci in 0..=max_config {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.config_index == ci).collect();
        if group.is_empty() || group.iter().any(|r| r.spiked) {
            continue;
        }
        let mean = group.iter().map(|r| r.ending_loss).sum::<f64>() / group.len() as f64;
        if best.as_ref().is_none_or(|(_, _, m)| mean < *m) {
            best = Some((ci, group[0].params.clone(), mean));
        }
    }
    best
}

/// CSV for a theoretical run: one row per inner step, with the loop-level
/// aggregates repeated on each row.
pub fn theory_csv(run: &TheoryRun) -> String {
    let mut out = String::from("k,t,eta,L_aggregate,H,sigma\n");
    for lp in &run.loops {
        for step in &lp.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                lp.k,
                step.t,
                fmt_float(step.eta),
                fmt_float(step.l_aggregate),
                fmt_float(lp.h),
                fmt_float(lp.sigma.sigma),
            ));
        }
    }
    out
}
