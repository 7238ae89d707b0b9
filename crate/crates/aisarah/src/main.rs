use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aisarah::data::DatasetSplit;
use aisarah::harness::{self, Algo, AlgoParams, ExperimentPlan};
use aisarah::model::LogisticModel;
use aisarah::theory::{self, SamplingMode};
use aisarah::{fetch, synth};

#[derive(Parser)]
#[command(
    name = "aisarah",
    about = "Adaptive recursive-gradient optimization for regularized logistic regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset name from the built-in registry.
    #[arg(long)]
    dataset: String,
    /// Cache directory for dataset files (falls back to $DATA_DIR, then ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Seed for the 75/25 split of datasets without an official test set.
    #[arg(long, default_value_t = fetch::DEFAULT_SPLIT_SEED)]
    split_seed: u64,
}

#[derive(Args)]
struct RegArgs {
    /// Use the regularized objective, lambda = 1/n (default).
    #[arg(long, overrides_with = "no_reg")]
    reg: bool,
    /// Drop the regularizer (lambda = 0).
    #[arg(long)]
    no_reg: bool,
}

impl RegArgs {
    fn regularized(&self) -> bool {
        !self.no_reg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Download (or find cached) dataset files.
    Fetch {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run algorithms over seeds and write a metrics CSV.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        reg: RegArgs,
        /// Algorithms to run (repeatable): ai-sarah, sarah, sarah+, svrg, adam, sgd-m.
        #[arg(long = "algo", required = true)]
        algos: Vec<String>,
        /// Run seeds (repeatable).
        #[arg(long = "seed", default_values_t = [1u64, 2, 3, 4, 5, 6, 7, 8, 9, 10])]
        seeds: Vec<u64>,
        /// Budget in effective passes; defaults to the dataset's registered budget.
        #[arg(long)]
        passes: Option<f64>,
        #[arg(long, default_value_t = aisarah::optim::DEFAULT_BATCH)]
        batch: usize,
        /// Estimator-shrinkage threshold for the adaptive method and SARAH+.
        #[arg(long, default_value_t = 1.0 / 32.0)]
        gamma: f64,
        /// Upper-bound smoothing factor for the adaptive method.
        #[arg(long, default_value_t = 0.999)]
        beta: f64,
        /// Fixed step for SARAH/SARAH+/SVRG (default 0.5/L).
        #[arg(long)]
        alpha: Option<f64>,
        /// Inner-loop length in passes for SARAH/SVRG.
        #[arg(long, default_value_t = 1.0)]
        inner_passes: f64,
        /// Initial step for ADAM / SGD with momentum.
        #[arg(long, default_value_t = 0.01)]
        alpha0: f64,
        /// Per-pass step decay (percent) for ADAM / SGD with momentum.
        #[arg(long, default_value_t = 0.0)]
        decay: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep an algorithm's hyper-parameter grid and report the best point.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        reg: RegArgs,
        #[arg(long)]
        algo: String,
        #[arg(long = "seed", default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long)]
        passes: Option<f64>,
        #[arg(long, default_value_t = aisarah::optim::DEFAULT_BATCH)]
        batch: usize,
        /// Sweep CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the global smoothness constant of the preprocessed objective.
    Lipschitz {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        reg: RegArgs,
    },
    /// Run the exact-step-size schedule on a synthetic problem.
    Theory {
        /// Sampling mode: uniform or importance.
        #[arg(long, default_value = "uniform")]
        mode: String,
        /// Inner-loop length.
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// Outer loops.
        #[arg(long, default_value_t = 3)]
        loops: usize,
        /// Synthetic problem size (capped at 500: every inner step recomputes
        /// all n per-sample constants).
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(data: &DataArgs) -> aisarah::Result<DatasetSplit> {
    let dir = fetch::resolve_data_dir(data.data_dir.as_deref());
    fetch::load_dataset(&data.dataset, &dir, data.split_seed)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> aisarah::Result<()> {
    match cli.command {
        Command::Fetch { data } => {
            let dir = fetch::resolve_data_dir(data.data_dir.as_deref());
            let path = fetch::fetch(&data.dataset, &dir)?;
            println!("{}", path.display());
        }
        Command::Run {
            data,
            reg,
            algos,
            seeds,
            passes,
            batch,
            gamma,
            beta,
            alpha,
            inner_passes,
            alpha0,
            decay,
            out,
        } => {
            let algos = algos
                .iter()
                .map(|s| Algo::parse(s))
                .collect::<aisarah::Result<Vec<_>>>()?;
            let split = load(&data)?;
            let model = if reg.regularized() {
                LogisticModel::regularized(&split.train)
            } else {
                LogisticModel::new(&split.train, 0.0)
            };
            let spec = fetch::dataset_spec(&data.dataset)?;
            let default_budget = if reg.regularized() {
                spec.budget.0
            } else {
                spec.budget.1
            };
            let plan = ExperimentPlan {
                dataset: data.dataset.clone(),
                regularized: reg.regularized(),
                algos,
                seeds,
                budget_passes: passes,
                batch_size: batch,
                params: AlgoParams {
                    gamma,
                    beta,
                    alpha,
                    inner_passes,
                    alpha0,
                    decay_pct: decay,
                },
            };
            let mut rows = harness::run_plan(&plan, &model, Some(&split.test), default_budget)?;
            fs::write(&out, harness::render_csv(&mut rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Tune {
            data,
            reg,
            algo,
            seeds,
            passes,
            batch,
            out,
        } => {
            let algo = Algo::parse(&algo)?;
            let split = load(&data)?;
            let model = if reg.regularized() {
                LogisticModel::regularized(&split.train)
            } else {
                LogisticModel::new(&split.train, 0.0)
            };
            let spec = fetch::dataset_spec(&data.dataset)?;
            let budget = passes.unwrap_or(if reg.regularized() {
                spec.budget.0
            } else {
                spec.budget.1
            });
            let grid = harness::tuning_grid(algo)?;
            let outcome = harness::run_sweep(
                algo,
                &model,
                Some(&split.test),
                &grid,
                &seeds,
                budget,
                batch,
                &AlgoParams::default(),
            )?;
            fs::write(&out, outcome.sweep_csv())?;
            match &outcome.best {
                Some((ci, params, mean)) => {
                    println!("best config #{ci}: {params} (mean ending loss {mean:.6e})")
                }
                None => println!("no stable configuration"),
            }
            println!("sweep written to {}", out.display());
        }
        Command::Lipschitz { data, reg } => {
            let split = load(&data)?;
            let model = if reg.regularized() {
                LogisticModel::regularized(&split.train)
            } else {
                LogisticModel::new(&split.train, 0.0)
            };
            println!("{:.6}", model.global_lipschitz());
        }
        Command::Theory {
            mode,
            m,
            loops,
            n,
            d,
            seed,
            out,
        } => {
            let mode = match mode.as_str() {
                "uniform" => SamplingMode::Uniform,
                "importance" => SamplingMode::Importance,
                other => {
                    return Err(aisarah::Error::InvalidConfig(format!(
                        "unknown sampling mode '{other}' (uniform|importance)"
                    )))
                }
            };
            if n > 500 {
                return Err(aisarah::Error::InvalidConfig(format!(
                    "n = {n} is too large: the schedule recomputes all n \
                     per-sample constants at every inner step; cap is 500"
                )));
            }
            let ds = synth::gaussian_logistic(n, d, seed)?;
            let model = LogisticModel::regularized(&ds);
            let w0 = harness::initial_iterate(seed, ds.d());
            let run = theory::theoretical_run(&model, m, loops, mode, seed, &w0)?;
            let csv = harness::theory_csv(&run);
            match out {
                Some(path) => {
                    fs::write(&path, csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
