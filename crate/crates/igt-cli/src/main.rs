//! `igt` — reproducible experiment runner.
//!
//! Each subcommand names an experiment; a JSON config supplies parameters and
//! command-line flags override config keys. Outputs are CSV files (one per
//! method and seed, plus an aggregate) and a `*_summary.json` with fitted
//! slopes and pass/fail property checks. Identical `(config, seed)` inputs
//! give byte-identical outputs; the `IGT_OUT` environment variable supplies
//! the output root when neither flag nor config names one.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use igt::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "igt", version, about = "Gradient-transport experiment runner")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Per-noise impact coefficients N_{i,t}^2 and totals per method.
    NoisePropagation(RunArgs),
    /// Multi-seed optimizer runs on the standard noisy quadratic.
    Quadratic(RunArgs),
    /// Policy-gradient training on the linear-quadratic regulator.
    Lqr(RunArgs),
    /// Noiseless Heavyball-IGT contraction at the optimal tuning.
    HbRate(RunArgs),
    /// Momentum stability sweep plus a bias/variance run at the found tuning.
    SpectralSweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Seed list; repeat the flag for several seeds.
    #[arg(long = "seed")]
    seeds: Vec<u64>,

    /// Methods to run (comma separated).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,

    #[arg(long)]
    steps: Option<u64>,

    #[arg(long)]
    alpha: Option<f64>,

    #[arg(long)]
    mu: Option<f64>,

    /// Tail fraction for ita / hb-ita / adam-ita.
    #[arg(long)]
    c: Option<f64>,

    #[arg(long)]
    d: Option<usize>,

    #[arg(long)]
    kappa: Option<f64>,

    /// Largest Hessian eigenvalue L.
    #[arg(long = "bigl")]
    l: Option<f64>,

    #[arg(long)]
    noise_std: Option<f64>,

    /// Output directory (falls back to config, then $IGT_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Trajectories per REINFORCE gradient (lqr).
    #[arg(long)]
    n_traj: Option<usize>,

    /// Training iterations (lqr).
    #[arg(long)]
    iterations: Option<usize>,

    /// Seed for the generated problem instance.
    #[arg(long)]
    system_seed: Option<u64>,

    /// Trajectory-filter threshold as a multiple of the batch median
    /// gradient norm; 0 disables filtering (lqr).
    #[arg(long)]
    filter_multiple: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            methods: if self.methods.is_empty() {
                None
            } else {
                Some(self.methods.clone())
            },
            d: self.d,
            kappa: self.kappa,
            l: self.l,
            noise_std: self.noise_std,
            alpha: self.alpha,
            mu: self.mu,
            c: self.c,
            steps: self.steps,
            seeds: if self.seeds.is_empty() {
                None
            } else {
                Some(self.seeds.clone())
            },
            output_dir: self.out.clone(),
            n_traj: self.n_traj,
            iterations: self.iterations,
            system_seed: self.system_seed,
            filter_multiple: self.filter_multiple,
        }
    }
}

fn resolve_config(kind: ExperimentKind, args: &RunArgs) -> igt::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path, Some(kind))?,
        None => ExperimentConfig::default_for(kind),
    };
    cfg.apply_overrides(&args.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.experiment {
        Experiment::NoisePropagation(a) => (ExperimentKind::NoisePropagation, a),
        Experiment::Quadratic(a) => (ExperimentKind::Quadratic, a),
        Experiment::Lqr(a) => (ExperimentKind::Lqr, a),
        Experiment::HbRate(a) => (ExperimentKind::HbRate, a),
        Experiment::SpectralSweep(a) => (ExperimentKind::SpectralSweep, a),
    };
    let cfg = match resolve_config(kind, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(outcome) => {
            println!(
                "{}: wrote {} files to {}",
                cfg.experiment.name(),
                outcome.files.len(),
                outcome.output_dir.display()
            );
            for check in &outcome.summary.properties {
                println!(
                    "  [{}] {} = {:.6} ({})",
                    if check.pass { "pass" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.detail
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
