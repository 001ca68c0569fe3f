//! Experiment execution: fan seeds out across worker threads, write one CSV
//! per `(method, seed)`, aggregate sequentially, and emit a summary with the
//! fitted slopes and pass/fail of each checked property.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    linear_fit, loglog_slope, seed_aggregate, RunRecord, RunRow,
};
use crate::analysis::cosine_similarity;
use crate::error::{IgtError, Result};
use crate::lqr::{
    exact_expected_cost, make_lqr, riccati_optimal, ExactCostOracle, LinearPolicy, LqrSystem,
    ReinforceOracle, TrajectoryFilter,
};
use crate::optimizers::Optimizer;
use crate::quadratic::{
    geometric_spectrum, make_quadratic, stability_sweep, total_noise_squared, impulse_response,
    NoiselessOracle, QuadraticOracle, QuadraticProblem,
};
use crate::rng::stream_rng;
use crate::vector::ParamVector;

use super::config::{ExperimentConfig, ExperimentKind};
use super::csvio::{write_csv, Cell};
use super::methods::MethodSpec;

/// One checked property in a summary file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub value: f64,
    pub pass: bool,
    pub detail: String,
}

/// The `<experiment>_summary.json` payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub experiment: String,
    pub values: BTreeMap<String, f64>,
    pub properties: Vec<PropertyCheck>,
}

impl SummaryFile {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind.name().to_string(),
            values: BTreeMap::new(),
            properties: Vec::new(),
        }
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: SummaryFile,
}

/// Runs one experiment to completion. Identical `(config, seeds)` produce
/// byte-identical output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = cfg.resolved_output_dir();
    std::fs::create_dir_all(&out_dir)?;

    // Echo the fully resolved config so the run can be reproduced from its
    // output directory alone.
    let echo_path = out_dir.join(format!("{}_config.json", cfg.experiment.name()));
    let mut echo = cfg.clone();
    echo.output_dir = Some(out_dir.clone());
    std::fs::write(&echo_path, format!("{}\n", serde_json::to_string_pretty(&echo)?))?;

    let mut outcome = match cfg.experiment {
        ExperimentKind::NoisePropagation => run_noise_propagation(cfg, &out_dir)?,
        ExperimentKind::Quadratic => run_quadratic(cfg, &out_dir)?,
        ExperimentKind::Lqr => run_lqr(cfg, &out_dir)?,
        ExperimentKind::HbRate => run_hb_rate(cfg, &out_dir)?,
        ExperimentKind::SpectralSweep => run_spectral_sweep(cfg, &out_dir)?,
    };
    outcome.files.push(echo_path);

    let summary_path = out_dir.join(format!("{}_summary.json", cfg.experiment.name()));
    std::fs::write(
        &summary_path,
        format!("{}\n", serde_json::to_string_pretty(&outcome.summary)?),
    )?;
    outcome.files.push(summary_path);
    Ok(outcome)
}

/// Distributes `n_tasks` closures over worker threads; results come back in
/// task order, so downstream aggregation is schedule-independent.
fn fan_out<T: Send>(
    n_tasks: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if n_tasks == 0 {
        return Ok(Vec::new());
    }
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..n_tasks).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(n_tasks);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_tasks {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("no poisoned slots") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("task executed"))
        .collect()
}

// ---------------------------------------------------------------------------
// quadratic
// ---------------------------------------------------------------------------

/// One optimizer run on a quadratic problem from `theta0`, recording the
/// standard diagnostics at every step.
pub fn run_quadratic_method(
    problem: &QuadraticProblem,
    spec: &MethodSpec,
    alpha: f64,
    steps: u64,
    theta0: &ParamVector,
    rng: rand_chacha::ChaCha8Rng,
) -> Result<RunRecord> {
    let mut opt = spec.build_optimizer(alpha)?;
    let mut oracle = QuadraticOracle::new(problem, rng);
    let mut theta = theta0.clone();
    let mut record = RunRecord::new();
    for t in 0..steps {
        let err = theta.dist_sq(problem.theta_star())?;
        let (next, v) = opt.step(&theta, &mut oracle)?;
        let g_true = problem.true_gradient(&theta)?;
        record.push(RunRow {
            t,
            iterate_err_sq: err,
            estimator_noise_sq: v.dist_sq(&g_true)?,
            v_norm: v.norm(),
            cosine: cosine_similarity(&v, &g_true),
            eval_cost: None,
        })?;
        theta = next;
    }
    Ok(record)
}

const QUADRATIC_HEADER: [&str; 5] = [
    "t",
    "iterate_err_sq",
    "estimator_noise_sq",
    "v_norm",
    "cosine",
];

fn record_rows(record: &RunRecord) -> Vec<Vec<Cell>> {
    record
        .rows()
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.t),
                Cell::Float(r.iterate_err_sq),
                Cell::Float(r.estimator_noise_sq),
                Cell::Float(r.v_norm),
                Cell::Float(r.cosine),
            ]
        })
        .collect()
}

/// Starting point for quadratic runs: well outside the stochastic noise
/// floor, so the baselines descend onto their plateaus the way convergence
/// curves are usually read.
fn quadratic_initial_point(d: usize, system_seed: u64) -> Result<ParamVector> {
    let draw = crate::rng::standard_normal_vec(&mut stream_rng(system_seed, &[0x1417]), d);
    ParamVector::new(draw.into_iter().map(|z| 30.0 * z).collect())
}

fn run_quadratic(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let problem = make_quadratic(cfg.d, cfg.kappa, cfg.l, cfg.noise_std, cfg.system_seed)?;
    let theta0 = quadratic_initial_point(cfg.d, cfg.system_seed)?;
    let specs: Vec<(String, MethodSpec)> = cfg
        .methods
        .iter()
        .map(|m| MethodSpec::parse(m, cfg).map(|s| (m.clone(), s)))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|mi| (0..cfg.seeds.len()).map(move |si| (mi, si)))
        .collect();
    let exp = cfg.experiment.name();
    let results = fan_out(tasks.len(), |idx| {
        let (mi, si) = tasks[idx];
        let (name, spec) = &specs[mi];
        let seed = cfg.seeds[si];
        let record = run_quadratic_method(
            &problem,
            spec,
            cfg.alpha,
            cfg.steps,
            &theta0,
            stream_rng(seed, &[0x5155_4144, mi as u64]),
        )?;
        let path = out_dir.join(format!("{exp}_{name}_seed{seed}.csv"));
        write_csv(&path, &QUADRATIC_HEADER, &record_rows(&record))?;
        Ok((path, record))
    })?;

    let mut files = Vec::new();
    let mut agg_rows: Vec<Vec<Cell>> = Vec::new();
    let mut summary = SummaryFile::new(cfg.experiment);
    for (mi, (name, _)) in specs.iter().enumerate() {
        let records: Vec<RunRecord> = tasks
            .iter()
            .zip(&results)
            .filter(|((m, _), _)| *m == mi)
            .map(|(_, (_, rec))| rec.clone())
            .collect();
        if cfg.steps > 0 {
            let agg = seed_aggregate(&records)?;
            for row in &agg {
                agg_rows.push(vec![
                    Cell::Int(mi as u64),
                    Cell::Int(row.t),
                    Cell::Float(row.iterate_err_sq_mean),
                    Cell::Float(row.iterate_err_sq_std),
                    Cell::Float(row.estimator_noise_sq_mean),
                    Cell::Float(row.estimator_noise_sq_std),
                    Cell::Float(row.v_norm_mean),
                    Cell::Float(row.v_norm_std),
                    Cell::Float(row.cosine_mean),
                    Cell::Float(row.cosine_std),
                ]);
            }
            summary.values.insert(
                format!("{name}_final_iterate_err_sq"),
                agg.last().map(|r| r.iterate_err_sq_mean).unwrap_or(f64::NAN),
            );
            // Estimator-noise slope over the asymptotic window, when the run
            // is long enough to fit one.
            let series: Vec<(f64, f64)> = agg
                .iter()
                .map(|r| (r.t as f64, r.estimator_noise_sq_mean))
                .collect();
            if cfg.steps >= 200 {
                if let Ok(slope) = loglog_slope(&series, 100.0, cfg.steps as f64) {
                    summary
                        .values
                        .insert(format!("{name}_estimator_noise_slope"), slope);
                }
            }
        }
    }
    for (path, _) in results {
        files.push(path);
    }

    let agg_path = out_dir.join(format!("{exp}_aggregate.csv"));
    write_csv(
        &agg_path,
        &[
            "method_index",
            "t",
            "iterate_err_sq_mean",
            "iterate_err_sq_std",
            "estimator_noise_sq_mean",
            "estimator_noise_sq_std",
            "v_norm_mean",
            "v_norm_std",
            "cosine_mean",
            "cosine_std",
        ],
        &agg_rows,
    )?;
    files.push(agg_path);

    if cfg.methods.iter().any(|m| m == "igt") && cfg.steps >= 2000 {
        let bins = cosine_comparison_on_igt_runs(
            &problem,
            cfg.alpha,
            cfg.steps,
            &cfg.seeds,
            &theta0,
            100,
            20,
        )?;
        let populated: Vec<&CosineBin> = bins
            .iter()
            .filter(|b| b.sgd_count >= 30 && b.igt_count >= 30)
            .collect();
        let all_above = !populated.is_empty()
            && populated.iter().all(|b| b.igt_mean > b.sgd_mean);
        summary
            .values
            .insert("cosine_populated_bins".into(), populated.len() as f64);
        summary.properties.push(PropertyCheck {
            name: "igt_cosine_above_sgd_in_every_populated_bin".into(),
            value: populated.len() as f64,
            pass: all_above,
            detail: "matched-point comparison along IGT runs, t > 100".into(),
        });
    }

    if let (Some(sgd), Some(igt)) = (
        summary.value("sgd_estimator_noise_slope"),
        summary.value("igt_estimator_noise_slope"),
    ) {
        summary.properties.push(PropertyCheck {
            name: "sgd_estimator_noise_flat".into(),
            value: sgd,
            pass: sgd.abs() <= 0.05,
            detail: "|slope| <= 0.05".into(),
        });
        summary.properties.push(PropertyCheck {
            name: "igt_estimator_noise_decays".into(),
            value: igt,
            pass: (igt + 1.0).abs() <= 0.15,
            detail: "slope within -1 +/- 0.15".into(),
        });
    }

    Ok(RunOutcome {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}


/// One bin of the matched-point estimator-quality comparison.
#[derive(Debug, Clone, Copy)]
pub struct CosineBin {
    pub lo: f64,
    pub hi: f64,
    pub sgd_count: usize,
    pub sgd_mean: f64,
    pub igt_count: usize,
    pub igt_mean: f64,
}

/// Cosine-vs-distance comparison between the raw stochastic gradient and the
/// IGT velocity, both evaluated along the same IGT trajectories: at every
/// iterate the velocity is folded as usual and an independent stochastic
/// sample is drawn at that same point, so the two estimates face identical
/// geometry. Samples with `t <= t_min` are discarded; bins are logarithmic
/// over the observed distances.
pub fn cosine_comparison_on_igt_runs(
    problem: &QuadraticProblem,
    alpha: f64,
    steps: u64,
    seeds: &[u64],
    theta0: &ParamVector,
    t_min: u64,
    n_bins: usize,
) -> Result<Vec<CosineBin>> {
    let mut sgd_samples: Vec<(f64, f64)> = Vec::new();
    let mut igt_samples: Vec<(f64, f64)> = Vec::new();
    for (si, &seed) in seeds.iter().enumerate() {
        let mut opt = MethodSpec::Igt.build_optimizer(alpha)?;
        let mut oracle = QuadraticOracle::new(problem, stream_rng(seed, &[0xf13c, si as u64]));
        let mut probe_rng = stream_rng(seed, &[0xf13c, si as u64, 1]);
        let mut theta = theta0.clone();
        for t in 0..steps {
            let g_true = problem.true_gradient(&theta)?;
            let dist = theta.dist_sq(problem.theta_star())?.sqrt();
            let (probe, _) = problem.stochastic_gradient(&theta, &mut probe_rng)?;
            let (next, v) = opt.step(&theta, &mut oracle)?;
            if t > t_min {
                sgd_samples.push((dist, cosine_similarity(&probe, &g_true)));
                igt_samples.push((dist, cosine_similarity(&v, &g_true)));
            }
            theta = next;
        }
    }
    let (mut dmin, mut dmax) = (f64::MAX, f64::MIN);
    for d in sgd_samples.iter().chain(&igt_samples).map(|p| p.0) {
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let edges = crate::analysis::log_bin_edges(dmin, dmax * (1.0 + 1e-9), n_bins)?;
    let sgd_bins = crate::analysis::binned_mean(&sgd_samples, &edges);
    let igt_bins = crate::analysis::binned_mean(&igt_samples, &edges);
    Ok(sgd_bins
        .iter()
        .zip(&igt_bins)
        .map(|(s, i)| CosineBin {
            lo: s.lo,
            hi: s.hi,
            sgd_count: s.count,
            sgd_mean: s.mean,
            igt_count: i.count,
            igt_mean: i.mean,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// noise-propagation
// ---------------------------------------------------------------------------

fn run_noise_propagation(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let t_max = cfg.steps as usize;
    let h = cfg.l;
    let exp = cfg.experiment.name();
    let specs: Vec<(String, MethodSpec)> = cfg
        .methods
        .iter()
        .map(|m| MethodSpec::parse(m, cfg).map(|s| (m.clone(), s)))
        .collect::<Result<_>>()?;

    let per_method = fan_out(specs.len(), |mi| {
        let (name, spec) = &specs[mi];
        let method = spec.impulse_method()?;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for i in [1usize, 25, 50] {
            let resp = if t_max > i {
                impulse_response(method, cfg.alpha, h, i, t_max)?
            } else {
                vec![0.0; t_max + 1]
            };
            columns.push(resp.iter().map(|n| n * n).collect());
        }
        let total = if t_max > 0 {
            total_noise_squared(method, cfg.alpha, h, t_max)?
        } else {
            vec![0.0]
        };
        let rows: Vec<Vec<Cell>> = if t_max == 0 {
            Vec::new()
        } else {
            (0..=t_max)
                .map(|t| {
                    vec![
                        Cell::Int(t as u64),
                        Cell::Float(columns[0][t]),
                        Cell::Float(columns[1][t]),
                        Cell::Float(columns[2][t]),
                        Cell::Float(total[t]),
                    ]
                })
                .collect()
        };
        let path = out_dir.join(format!("{exp}_{name}.csv"));
        write_csv(&path, &["t", "n2_i1", "n2_i25", "n2_i50", "total"], &rows)?;
        Ok((path, total))
    })?;

    let mut summary = SummaryFile::new(cfg.experiment);
    let mut files = Vec::new();
    let mut agg_rows = Vec::new();
    for (mi, ((name, _), (path, total))) in specs.iter().zip(&per_method).enumerate() {
        files.push(path.clone());
        for (t, v) in total.iter().enumerate() {
            agg_rows.push(vec![
                Cell::Int(mi as u64),
                Cell::Int(t as u64),
                Cell::Float(*v),
            ]);
        }
        if t_max >= 1000 {
            // Fixed-momentum totals must not decay; IGT totals decay ~ 1/t.
            if name.starts_with("momentum-") && *name != "momentum-inc" {
                let w0 = 500.min(t_max / 2);
                let floor = total[w0..=t_max.min(1000)]
                    .iter()
                    .cloned()
                    .fold(f64::MAX, f64::min);
                let reference = total[w0];
                summary.values.insert(format!("{name}_total_floor"), floor);
                summary.properties.push(PropertyCheck {
                    name: format!("{name}_total_nonvanishing"),
                    value: floor / reference,
                    pass: floor > 0.0 && floor >= 0.5 * reference,
                    detail: "min over [500,1000] >= half the window start".into(),
                });
            }
            if name == "igt" {
                let series: Vec<(f64, f64)> =
                    total.iter().enumerate().map(|(t, v)| (t as f64, *v)).collect();
                let slope = loglog_slope(&series, 100.0, t_max as f64)?;
                summary.values.insert("igt_total_slope".into(), slope);
                summary.properties.push(PropertyCheck {
                    name: "igt_total_decays_like_1_over_t".into(),
                    value: slope,
                    pass: (slope + 1.0).abs() <= 0.15,
                    detail: "log-log slope within -1 +/- 0.15".into(),
                });
            }
        }
    }
    let agg_path = out_dir.join(format!("{exp}_aggregate.csv"));
    write_csv(&agg_path, &["method_index", "t", "total"], &agg_rows)?;
    files.push(agg_path);

    Ok(RunOutcome {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}

// ---------------------------------------------------------------------------
// lqr
// ---------------------------------------------------------------------------

/// One row of an LQR training run.
#[derive(Debug, Clone)]
pub struct LqrRow {
    pub t: u64,
    /// Exact expected cost of the current gain (closed form).
    pub eval_cost: f64,
    /// Mean sampled cost of the training batch (equals `eval_cost` for the
    /// exact-gradient method).
    pub train_cost: f64,
    pub v_norm: f64,
    pub kept: u64,
}

#[derive(Debug, Clone, Default)]
pub struct LqrSeries {
    pub rows: Vec<LqrRow>,
}

impl LqrSeries {
    pub fn eval_series(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t as f64, r.eval_cost)).collect()
    }

    pub fn final_eval(&self) -> f64 {
        self.rows.last().map(|r| r.eval_cost).unwrap_or(f64::NAN)
    }

    /// Sample variance of the step-to-step first differences of the
    /// evaluation cost over the last half of training; the smoothness
    /// statistic.
    pub fn eval_diff_variance_last_half(&self) -> f64 {
        let n = self.rows.len();
        if n < 4 {
            return f64::NAN;
        }
        let tail = &self.rows[n / 2..];
        let diffs: Vec<f64> = tail.windows(2).map(|w| w[1].eval_cost - w[0].eval_cost).collect();
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        diffs.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (diffs.len() as f64 - 1.0)
    }
}

/// Trains one method on the LQR system from `K_0 = 0`, evaluating the exact
/// expected cost at every iteration.
pub fn run_lqr_method(
    sys: &LqrSystem,
    spec: &MethodSpec,
    alpha: f64,
    n_traj: usize,
    iterations: usize,
    filter: TrajectoryFilter,
    rng: rand_chacha::ChaCha8Rng,
) -> Result<LqrSeries> {
    let m = sys.action_dim();
    let n = sys.state_dim();
    let mut theta = ParamVector::zeros(m * n);
    let mut series = LqrSeries::default();

    enum OracleKind<'a> {
        Exact(ExactCostOracle<'a>),
        Reinforce(ReinforceOracle<'a>),
    }
    let mut oracle = match spec {
        MethodSpec::ExactGd => OracleKind::Exact(ExactCostOracle::new(sys)),
        MethodSpec::Sgd | MethodSpec::Ita { .. } => {
            OracleKind::Reinforce(ReinforceOracle::new(sys, n_traj, rng, filter))
        }
        other => {
            return Err(IgtError::Config(format!(
                "{other:?} is not an lqr training method"
            )));
        }
    };
    let mut opt = match spec {
        MethodSpec::ExactGd => Optimizer::sgd(alpha)?,
        other => other.build_optimizer(alpha)?,
    };

    for t in 0..iterations {
        let policy = LinearPolicy::from_flat(m, n, theta.as_slice())?;
        let eval = exact_expected_cost(sys, &policy)?;
        let (next, v) = match &mut oracle {
            OracleKind::Exact(o) => opt.step(&theta, o)?,
            OracleKind::Reinforce(o) => opt.step(&theta, o)?,
        };
        let (train_cost, kept) = match &oracle {
            OracleKind::Exact(_) => (eval, 0u64),
            OracleKind::Reinforce(o) => (o.last_mean_cost(), o.last_kept() as u64),
        };
        series.rows.push(LqrRow {
            t: t as u64,
            eval_cost: eval,
            train_cost,
            v_norm: v.norm(),
            kept,
        });
        theta = next;
    }
    Ok(series)
}

fn run_lqr(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let sys = make_lqr(cfg.system_seed, 20, 12, 10)?;
    let riccati = riccati_optimal(&sys)?;
    let filter = if cfg.filter_multiple > 0.0 {
        TrajectoryFilter::MedianMultiple(cfg.filter_multiple)
    } else {
        TrajectoryFilter::Disabled
    };
    let specs: Vec<(String, MethodSpec)> = cfg
        .methods
        .iter()
        .map(|m| MethodSpec::parse(m, cfg).map(|s| (m.clone(), s)))
        .collect::<Result<_>>()?;
    let exp = cfg.experiment.name();

    let tasks: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|mi| (0..cfg.seeds.len()).map(move |si| (mi, si)))
        .collect();
    let results = fan_out(tasks.len(), |idx| {
        let (mi, si) = tasks[idx];
        let (name, spec) = &specs[mi];
        let seed = cfg.seeds[si];
        let series = run_lqr_method(
            &sys,
            spec,
            cfg.alpha,
            cfg.n_traj,
            cfg.iterations,
            filter,
            stream_rng(seed, &[0x4c51_5254, mi as u64]),
        )?;
        let path = out_dir.join(format!("{exp}_{name}_seed{seed}.csv"));
        let rows: Vec<Vec<Cell>> = series
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.t),
                    Cell::Float(r.eval_cost),
                    Cell::Float(r.train_cost),
                    Cell::Float(r.v_norm),
                    Cell::Int(r.kept),
                ]
            })
            .collect();
        write_csv(&path, &["t", "eval_cost", "train_cost", "v_norm", "kept"], &rows)?;
        Ok((path, series))
    })?;

    let mut summary = SummaryFile::new(cfg.experiment);
    summary
        .values
        .insert("riccati_cost_deterministic".into(), riccati.cost_deterministic);
    summary.values.insert(
        "riccati_cost_stochastic_policy".into(),
        riccati.cost_stochastic_policy,
    );

    let mut files = Vec::new();
    let mut agg_rows = Vec::new();
    let mut finals: BTreeMap<String, f64> = BTreeMap::new();
    let mut smooth: BTreeMap<String, f64> = BTreeMap::new();
    for (mi, (name, _)) in specs.iter().enumerate() {
        let method_series: Vec<&LqrSeries> = tasks
            .iter()
            .zip(&results)
            .filter(|((m, _), _)| *m == mi)
            .map(|(_, (_, s))| s)
            .collect();
        let n_seeds = method_series.len() as f64;
        if cfg.iterations > 0 {
            for t in 0..cfg.iterations {
                let evals: Vec<f64> = method_series.iter().map(|s| s.rows[t].eval_cost).collect();
                let mean = evals.iter().sum::<f64>() / n_seeds;
                let std = if evals.len() < 2 {
                    0.0
                } else {
                    (evals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (n_seeds - 1.0))
                        .sqrt()
                };
                agg_rows.push(vec![
                    Cell::Int(mi as u64),
                    Cell::Int(t as u64),
                    Cell::Float(mean),
                    Cell::Float(std),
                ]);
            }
            let final_mean =
                method_series.iter().map(|s| s.final_eval()).sum::<f64>() / n_seeds;
            let smooth_mean = method_series
                .iter()
                .map(|s| s.eval_diff_variance_last_half())
                .sum::<f64>()
                / n_seeds;
            finals.insert(name.clone(), final_mean);
            smooth.insert(name.clone(), smooth_mean);
            summary
                .values
                .insert(format!("{name}_final_eval_cost"), final_mean);
            summary
                .values
                .insert(format!("{name}_eval_diff_variance"), smooth_mean);
        }
    }
    for (path, _) in results {
        files.push(path);
    }
    let agg_path = out_dir.join(format!("{exp}_aggregate.csv"));
    write_csv(
        &agg_path,
        &["method_index", "t", "eval_cost_mean", "eval_cost_std"],
        &agg_rows,
    )?;
    files.push(agg_path);

    if let (Some(&gd), Some(&ita), Some(&sgd)) =
        (finals.get("gd"), finals.get("ita"), finals.get("sgd"))
    {
        summary.properties.push(PropertyCheck {
            name: "ordering_gd_le_ita_lt_sgd".into(),
            value: ita,
            pass: gd <= ita && ita < sgd,
            detail: format!("gd {gd:.3} <= ita {ita:.3} < sgd {sgd:.3}"),
        });
        summary.properties.push(PropertyCheck {
            name: "ita_beats_sgd_by_5_percent".into(),
            value: ita / sgd,
            pass: ita <= 0.95 * sgd,
            detail: "ita final cost <= 0.95 x sgd final cost".into(),
        });
    }
    if let (Some(&ita_s), Some(&sgd_s)) = (smooth.get("ita"), smooth.get("sgd")) {
        summary.properties.push(PropertyCheck {
            name: "ita_eval_curve_smoother_than_sgd".into(),
            value: ita_s / sgd_s,
            pass: ita_s < sgd_s,
            detail: "first-difference variance over last half, ita < sgd".into(),
        });
    }

    Ok(RunOutcome {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}

// ---------------------------------------------------------------------------
// hb-rate
// ---------------------------------------------------------------------------

fn run_hb_rate(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let eigs = geometric_spectrum(cfg.d, cfg.kappa, cfg.l)?;
    // θ* = 0 keeps the iterate error free of cancellation as it shrinks
    // through hundreds of contraction factors.
    let problem = QuadraticProblem::new(eigs.clone(), ParamVector::zeros(cfg.d), 0.0)?;
    let (alpha, mu) = crate::optimizers::optimal_hb_tuning(cfg.l, cfg.kappa)?;
    let exp = cfg.experiment.name();
    let specs: Vec<(String, MethodSpec)> = cfg
        .methods
        .iter()
        .map(|m| MethodSpec::parse(m, cfg).map(|s| (m.clone(), s)))
        .collect::<Result<_>>()?;

    let mut summary = SummaryFile::new(cfg.experiment);
    summary.values.insert("alpha".into(), alpha);
    summary.values.insert("mu".into(), mu);
    let theory = (cfg.kappa.sqrt() - 1.0) / (cfg.kappa.sqrt() + 1.0);
    summary.values.insert("theory_rate".into(), theory);

    let mut files = Vec::new();
    for (name, spec) in &specs {
        for &seed in &cfg.seeds {
            // The optimal pair overrides any configured momentum here; the
            // experiment is about the tuned rate.
            let mut opt = match spec {
                MethodSpec::HeavyBallIgt { .. } => Optimizer::heavyball_igt(alpha, mu)?,
                MethodSpec::HeavyBall { .. } => Optimizer::heavy_ball(alpha, mu)?,
                other => other.build_optimizer(alpha)?,
            };
            let mut oracle = NoiselessOracle::new(&problem);
            let mut theta =
                ParamVector::new(crate::rng::standard_normal_vec(
                    &mut stream_rng(seed, &[0x4842_5254]),
                    cfg.d,
                ))?;
            let mut errs = Vec::with_capacity(cfg.steps as usize);
            for _ in 0..cfg.steps {
                errs.push(theta.norm_sq());
                theta = opt.step(&theta, &mut oracle)?.0;
            }
            let rows: Vec<Vec<Cell>> = errs
                .iter()
                .enumerate()
                .map(|(t, e)| vec![Cell::Int(t as u64), Cell::Float(*e)])
                .collect();
            let path = out_dir.join(format!("{exp}_{name}_seed{seed}.csv"));
            write_csv(&path, &["t", "err_sq"], &rows)?;
            files.push(path);

            if *name == "hb-igt" && seed == cfg.seeds[0] && cfg.steps >= 500 {
                // Geometric-mean contraction factor over the last window in
                // which the iterate still carries signal (the error collapses
                // to the f64 rounding floor once it falls ~1e-12 below its
                // start, and ratios there measure debris, not the rate).
                let floor = errs[0] * 1e-24;
                let t_end = errs
                    .iter()
                    .rposition(|&e| e >= floor)
                    .unwrap_or(errs.len() - 1)
                    .min(errs.len() - 1);
                let w0 = t_end * 5 / 8;
                let w1 = t_end;
                let contraction =
                    (errs[w1] / errs[w0]).powf(1.0 / (2.0 * (w1 - w0) as f64));
                summary.values.insert("contraction".into(), contraction);
                summary.properties.push(PropertyCheck {
                    name: "accelerated_rate_within_2_percent".into(),
                    value: contraction,
                    pass: (contraction - theory).abs() <= 0.02 * theory,
                    detail: format!("target {theory:.6}"),
                });
            }
        }
    }

    // ρ(A) across the spectrum at the optimal tuning.
    let max_rho_dev = eigs
        .iter()
        .map(|&h| {
            (crate::quadratic::spectral_radius2(&crate::quadratic::bias_matrix(alpha, mu, h))
                - mu.sqrt())
            .abs()
        })
        .fold(0.0, f64::max);
    summary.values.insert("max_rho_deviation".into(), max_rho_dev);
    summary.properties.push(PropertyCheck {
        name: "spectral_radius_equals_sqrt_mu".into(),
        value: max_rho_dev,
        pass: max_rho_dev <= 1e-6,
        detail: "max_h |rho(A) - sqrt(mu)| <= 1e-6".into(),
    });

    Ok(RunOutcome {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}

// ---------------------------------------------------------------------------
// spectral-sweep
// ---------------------------------------------------------------------------

fn run_spectral_sweep(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let eigs = geometric_spectrum(cfg.d, cfg.kappa, cfg.l)?;
    let exp = cfg.experiment.name();
    let alpha = cfg.alpha;

    let grid: Vec<f64> = (0..=1900).map(|k| k as f64 * 5e-4).collect();
    let sweep = stability_sweep(alpha, &eigs, &grid);
    let sweep_rows: Vec<Vec<Cell>> = sweep
        .iter()
        .map(|row| {
            vec![
                Cell::Float(row.mu),
                Cell::Float(row.rho_a_max),
                Cell::Float(row.rho_d_max),
                Cell::Int(u64::from(row.stable)),
            ]
        })
        .collect();
    let sweep_path = out_dir.join(format!("{exp}_sweep.csv"));
    write_csv(
        &sweep_path,
        &["mu", "rho_a_max", "rho_d_max", "stable"],
        &sweep_rows,
    )?;

    let best = sweep
        .iter()
        .filter(|r| r.stable && r.mu > 0.0)
        .max_by(|a, b| a.mu.total_cmp(&b.mu))
        .ok_or_else(|| {
            IgtError::Config("no stable positive momentum in the sweep grid".into())
        })?;

    let mut summary = SummaryFile::new(cfg.experiment);
    summary.values.insert("mu_star".into(), best.mu);
    summary.values.insert("rho_a_max".into(), best.rho_a_max);
    summary.values.insert("rho_d_max".into(), best.rho_d_max);
    summary.properties.push(PropertyCheck {
        name: "stable_positive_momentum_exists".into(),
        value: best.mu,
        pass: best.mu > 0.0 && best.rho_a_max < 1.0 && best.rho_d_max < 1.0,
        detail: "rho(A) < 1 and rho(D) < 1 across the spectrum".into(),
    });

    // Mean-trajectory run: the expectation of the iterates follows the
    // noiseless recursion, so the bias decay comes from a single noiseless
    // run. θ* = 0 and a fixed θ_0 shared by every noisy replicate.
    let problem = QuadraticProblem::new(eigs.clone(), ParamVector::zeros(cfg.d), cfg.noise_std)?;
    let noiseless = QuadraticProblem::new(eigs, ParamVector::zeros(cfg.d), 0.0)?;
    let theta0 = ParamVector::new(crate::rng::standard_normal_vec(
        &mut stream_rng(cfg.system_seed, &[0x5357_4545]),
        cfg.d,
    ))?;
    let steps = cfg.steps as usize;

    let mut mean_traj: Vec<ParamVector> = Vec::with_capacity(steps);
    {
        let mut opt = Optimizer::heavyball_igt(alpha, best.mu)?;
        let mut oracle = NoiselessOracle::new(&noiseless);
        let mut theta = theta0.clone();
        for _ in 0..steps {
            mean_traj.push(theta.clone());
            theta = opt.step(&theta, &mut oracle)?.0;
        }
    }
    let bias_rows: Vec<Vec<Cell>> = mean_traj
        .iter()
        .enumerate()
        .map(|(t, th)| vec![Cell::Int(t as u64), Cell::Float(th.norm_sq())])
        .collect();
    let bias_path = out_dir.join(format!("{exp}_bias.csv"));
    write_csv(&bias_path, &["t", "mean_err_sq"], &bias_rows)?;

    // Linear-convergence fit of log(bias) over the mid window.
    let fit_points: Vec<(f64, f64)> = mean_traj
        .iter()
        .enumerate()
        .filter(|(t, _)| *t >= steps / 5 && *t <= steps * 4 / 5)
        .map(|(t, th)| (t as f64, th.norm_sq().ln()))
        .collect();
    let fit = linear_fit(&fit_points)?;
    summary.values.insert("bias_log_fit_slope".into(), fit.slope);
    summary.values.insert("bias_log_fit_r2".into(), fit.r_squared);
    summary.properties.push(PropertyCheck {
        name: "mean_error_decays_linearly".into(),
        value: fit.r_squared,
        pass: fit.r_squared > 0.99 && fit.slope < 0.0,
        detail: "log-linear fit R^2 > 0.99".into(),
    });

    // Per-seed deviation from the mean trajectory.
    let deviations = fan_out(cfg.seeds.len(), |si| {
        let seed = cfg.seeds[si];
        let mut opt = Optimizer::heavyball_igt(alpha, best.mu)?;
        let mut oracle =
            QuadraticOracle::new(&problem, stream_rng(seed, &[0x5357_4550]));
        let mut theta = theta0.clone();
        let mut dev = Vec::with_capacity(steps);
        for t in 0..steps {
            dev.push(theta.dist_sq(&mean_traj[t])?);
            theta = opt.step(&theta, &mut oracle)?.0;
        }
        let rows: Vec<Vec<Cell>> = dev
            .iter()
            .enumerate()
            .map(|(t, v)| vec![Cell::Int(t as u64), Cell::Float(*v)])
            .collect();
        let path = out_dir.join(format!("{exp}_hb-igt_seed{seed}.csv"));
        write_csv(&path, &["t", "dev_sq"], &rows)?;
        Ok((path, dev))
    })?;

    let n_seeds = cfg.seeds.len() as f64;
    let mut agg_rows = Vec::with_capacity(steps);
    let mut variance_series = Vec::with_capacity(steps);
    for t in 0..steps {
        let vals: Vec<f64> = deviations.iter().map(|(_, d)| d[t]).collect();
        let mean = vals.iter().sum::<f64>() / n_seeds;
        let std = if vals.len() < 2 {
            0.0
        } else {
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_seeds - 1.0)).sqrt()
        };
        variance_series.push((t as f64, mean));
        agg_rows.push(vec![
            Cell::Int(t as u64),
            Cell::Float(mean),
            Cell::Float(std),
        ]);
    }
    let agg_path = out_dir.join(format!("{exp}_aggregate.csv"));
    write_csv(&agg_path, &["t", "variance_mean", "variance_std"], &agg_rows)?;

    if steps >= 1000 {
        let slope = loglog_slope(&variance_series, 100.0, steps as f64)?;
        summary.values.insert("variance_slope".into(), slope);
        summary.properties.push(PropertyCheck {
            name: "variance_decays_like_1_over_t".into(),
            value: slope,
            pass: (slope + 1.0).abs() <= 0.2,
            detail: "log-log slope within -1 +/- 0.2".into(),
        });
    }

    let mut files = vec![sweep_path, bias_path];
    files.extend(deviations.into_iter().map(|(p, _)| p));
    files.push(agg_path);

    Ok(RunOutcome {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}
