//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values. Run with `cargo test -p igt --test acceptance --
//! --nocapture` to see them.

use igt::analysis::{linear_fit, loglog_slope, seed_aggregate, RunRecord};
use igt::estimators::{EstimatorKind, EstimatorState};
use igt::experiments::{
    run_experiment, run_lqr_method, run_quadratic_method, ExperimentConfig, ExperimentKind,
    MethodSpec,
};
use igt::linalg::Mat;
use igt::lqr::{
    exact_cost_gradient, exact_expected_cost, make_lqr, riccati_optimal, rollout, LinearPolicy,
    LqrSystem, TrajectoryFilter,
};
use igt::optimizers::{igt_direct_step, optimal_hb_tuning, Optimizer};
use igt::quadratic::{
    bias_matrix, geometric_spectrum, igt_noise_coeffs, impulse_response, make_quadratic,
    igt_error_bound, spectral_radius2, stability_sweep, total_noise_squared, ImpulseMethod,
    NoiselessOracle, QuadraticOracle, QuadraticProblem, ReplayOracle,
};
use igt::rng::{standard_normal_vec, stream_rng};
use igt::ParamVector;

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("igt-acceptance-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// C1: after T IGT updates on a quadratic with recorded noise, the velocity
/// satisfies v_T = g(θ_T) + mean(ε_0..ε_T) to 1e−10 in the sup norm.
#[test]
fn c01_velocity_identity() {
    let problem = make_quadratic(10, 10.0, 1.0, 0.3, 11).unwrap();
    let alpha = 1.0 / problem.lipschitz();
    let mut worst = 0.0f64;
    for &t_end in &[10usize, 100, 1000] {
        let mut oracle = QuadraticOracle::recording(&problem, stream_rng(1, &[t_end as u64]));
        let mut opt = Optimizer::igt(alpha).unwrap();
        let mut theta = ParamVector::zeros(10);
        for _ in 0..t_end {
            theta = opt.step(&theta, &mut oracle).unwrap().0;
        }
        let v = opt.estimator().velocity().unwrap().clone();
        // The estimator has folded t_end samples; θ_prev is the iterate the
        // last velocity was computed at.
        let theta_last = opt.estimator().theta_prev().unwrap().clone();
        let g = problem.true_gradient(&theta_last).unwrap();
        let noises = oracle.recorded_noise();
        assert_eq!(noises.len(), t_end);
        let mean = ParamVector::from_fn(10, |i| {
            noises.iter().map(|n| n[i]).sum::<f64>() / t_end as f64
        })
        .unwrap();
        let gap = v.sub(&g).unwrap().sub(&mean).unwrap().linf_norm();
        assert!(gap <= 1e-10, "T = {t_end}: residual {gap}");
        worst = worst.max(gap);
    }
    println!("[PASS] C1 velocity identity: max residual {worst:.2e} <= 1e-10");
}

/// C2: the two-term recursion and the velocity form produce identical
/// iterates on identical noise replays.
#[test]
fn c02_form_equivalence() {
    let problem = make_quadratic(10, 10.0, 1.0, 0.5, 23).unwrap();
    let alpha = 1.0 / problem.lipschitz();
    let steps = 1000usize;

    // Record a noise sequence with the velocity form.
    let mut recorder = QuadraticOracle::recording(&problem, stream_rng(7, &[2]));
    let mut opt = Optimizer::igt(alpha).unwrap();
    let mut theta_v = ParamVector::zeros(10);
    let mut velocity_iterates = Vec::with_capacity(steps + 1);
    velocity_iterates.push(theta_v.clone());
    for _ in 0..steps {
        theta_v = opt.step(&theta_v, &mut recorder).unwrap().0;
        velocity_iterates.push(theta_v.clone());
    }
    let noises = recorder.into_recorded_noise();

    // Replay through the direct two-term recursion.
    let mut replay = ReplayOracle::new(&problem, &noises);
    let mut prev = ParamVector::zeros(10);
    let mut curr = {
        // t = 0 seeding: θ_1 = θ_0 − α g(θ_0, x_0).
        let state = EstimatorState::new(EstimatorKind::Igt).unwrap();
        let q = state.query(&prev).unwrap();
        use igt::optimizers::GradientOracle;
        let g = replay.gradient(&q).unwrap();
        prev.axpy(-alpha, g.values()).unwrap()
    };
    let mut max_rel_gap = 0.0f64;
    for t in 1..steps as u64 {
        let next = igt_direct_step(&curr, &prev, t, alpha, &mut replay).unwrap();
        prev = curr;
        curr = next;
        let reference = &velocity_iterates[(t + 1) as usize];
        let gap = curr.sub(reference).unwrap().linf_norm()
            / reference.linf_norm().max(1.0);
        max_rel_gap = max_rel_gap.max(gap);
    }
    assert!(max_rel_gap <= 1e-10, "max relative gap {max_rel_gap}");
    println!("[PASS] C2 form equivalence: max relative gap {max_rel_gap:.2e} <= 1e-10");
}

/// C3: recursion vs impulse simulation for IGT, and the SGD closed form.
#[test]
fn c03_noise_coefficient_cross_check() {
    let t_max = 500usize;
    let mut worst_igt = 0.0f64;
    let mut worst_sgd = 0.0f64;
    for &h in &[0.01, 1.0] {
        for &alpha in &[0.01, 0.1, 1.0 / h] {
            let coeffs = igt_noise_coeffs(alpha, h, t_max);
            for i in [0usize, 1, 5, 25, 125] {
                let resp = impulse_response(ImpulseMethod::Igt, alpha, h, i, t_max).unwrap();
                for t in 0..=t_max {
                    worst_igt = worst_igt.max((resp[t] - coeffs.get(i, t)).abs());
                }
            }
            let r = 1.0 - alpha * h;
            for i in [0usize, 3, 50] {
                let resp = impulse_response(ImpulseMethod::Sgd, alpha, h, i, t_max).unwrap();
                for t in 0..=t_max {
                    let expect = if t > i { r.powi((t - 1 - i) as i32) } else { 0.0 };
                    worst_sgd = worst_sgd.max((resp[t] - expect).abs());
                }
            }
        }
    }
    assert!(worst_igt <= 1e-12, "IGT recursion vs impulse: {worst_igt}");
    assert!(worst_sgd <= 1e-12, "SGD impulse vs closed form: {worst_sgd}");
    println!(
        "[PASS] C3 noise coefficients: igt gap {worst_igt:.2e}, sgd gap {worst_sgd:.2e} <= 1e-12"
    );
}

/// C4: fixed-momentum total variance does not decay; IGT total decays like
/// 1/t.
#[test]
fn c04_total_variance_shapes() {
    let (alpha, h) = (0.1, 1.0);
    let momentum = total_noise_squared(ImpulseMethod::MomentumFixed(0.9), alpha, h, 1000).unwrap();
    let floor = momentum[500..=1000].iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        floor > 0.0 && floor >= 0.5 * momentum[500],
        "momentum total decayed: floor {floor} vs start {}",
        momentum[500]
    );

    // SGD totals are eventually constant to within 5%.
    let sgd = total_noise_squared(ImpulseMethod::Sgd, alpha, h, 1000).unwrap();
    let sgd_final = *sgd.last().unwrap();
    for t in 500..=1000 {
        assert!(
            (sgd[t] - sgd_final).abs() <= 0.05 * sgd_final,
            "SGD total not settled at t={t}: {} vs {sgd_final}",
            sgd[t]
        );
    }

    let igt = total_noise_squared(ImpulseMethod::Igt, alpha, h, 10_000).unwrap();
    let series: Vec<(f64, f64)> = igt.iter().enumerate().map(|(t, v)| (t as f64, *v)).collect();
    let slope = loglog_slope(&series, 100.0, 10_000.0).unwrap();
    assert!((slope + 1.0).abs() <= 0.15, "IGT total slope {slope}");
    println!(
        "[PASS] C4 totals: momentum floor {floor:.3} (start {:.3}), igt slope {slope:.3} in -1 +/- 0.15",
        momentum[500]
    );
}

struct QuadraticStudy {
    records: std::collections::BTreeMap<&'static str, Vec<RunRecord>>,
}

fn quadratic_study_runs() -> QuadraticStudy {
    let problem = make_quadratic(100, 1000.0, 1.0, 0.3f64.sqrt(), 7).unwrap();
    let alpha = 1.0 / problem.lipschitz();
    // Start far outside the stochastic noise floor so the baselines descend
    // onto their plateaus.
    let theta0 = ParamVector::new(
        standard_normal_vec(&mut stream_rng(7, &[0x1417]), 100)
            .into_iter()
            .map(|z| 30.0 * z)
            .collect(),
    )
    .unwrap();
    let methods: [(&'static str, MethodSpec); 4] = [
        ("sgd", MethodSpec::Sgd),
        ("hb", MethodSpec::HeavyBall { mu: 0.9 }),
        ("igt", MethodSpec::Igt),
        ("hb-igt", MethodSpec::HeavyBallIgt { mu: 0.9 }),
    ];
    let mut records = std::collections::BTreeMap::new();
    for (mi, (name, spec)) in methods.iter().enumerate() {
        let runs: Vec<RunRecord> = (0..20u64)
            .map(|seed| {
                run_quadratic_method(
                    &problem,
                    spec,
                    alpha,
                    10_000,
                    &theta0,
                    stream_rng(seed, &[0xf1c3, mi as u64]),
                )
                .unwrap()
            })
            .collect();
        records.insert(*name, runs);
    }
    QuadraticStudy { records }
}

/// C5: the three panels of the full-scale quadratic study.
#[test]
fn c05_quadratic_reproduction() {
    let fig = quadratic_study_runs();

    let agg: std::collections::BTreeMap<&str, Vec<igt::analysis::AggRow>> = fig
        .records
        .iter()
        .map(|(k, v)| (*k, seed_aggregate(v).unwrap()))
        .collect();

    // (a) IGT iterate error decreases monotonically across geometric
    // checkpoints after the transient; SGD and HB plateau at a floor at
    // least 10x the IGT value at t = 10^4.
    let igt_err: Vec<f64> = agg["igt"].iter().map(|r| r.iterate_err_sq_mean).collect();
    // The transient ends once the slowest eigendirections' noise peak has
    // passed (around t ~ 2/(alpha h_min), and the exact expected curve peaks
    // near t = 464 on this configuration); check monotone decrease across
    // geometric checkpoints from t = 1000 on.
    let checkpoints = [1000usize, 1500, 2250, 3500, 5000, 7000, 9999];
    for w in checkpoints.windows(2) {
        assert!(
            igt_err[w[1]] < igt_err[w[0]],
            "IGT seed-mean error rose between t={} ({:.4}) and t={} ({:.4})",
            w[0],
            igt_err[w[0]],
            w[1],
            igt_err[w[1]]
        );
    }
    let igt_final = *igt_err.last().unwrap();
    let floor = |name: &str| {
        let errs: Vec<f64> = agg[name].iter().map(|r| r.iterate_err_sq_mean).collect();
        errs[5000..].iter().sum::<f64>() / errs[5000..].len() as f64
    };
    let sgd_floor = floor("sgd");
    let hb_floor = floor("hb");
    let sgd_ratio = sgd_floor / igt_final;
    let hb_ratio = hb_floor / igt_final;
    println!(
        "[C5a] igt final {igt_final:.2}, sgd floor {sgd_floor:.2} ({sgd_ratio:.2}x), hb floor {hb_floor:.2} ({hb_ratio:.2}x)"
    );

    // (b) estimator-noise slopes.
    let sgd_noise: Vec<(f64, f64)> = agg["sgd"]
        .iter()
        .map(|r| (r.t as f64, r.estimator_noise_sq_mean))
        .collect();
    let igt_noise: Vec<(f64, f64)> = agg["igt"]
        .iter()
        .map(|r| (r.t as f64, r.estimator_noise_sq_mean))
        .collect();
    let sgd_slope = loglog_slope(&sgd_noise, 100.0, 10_000.0).unwrap();
    let igt_slope = loglog_slope(&igt_noise, 100.0, 10_000.0).unwrap();
    assert!(sgd_slope.abs() <= 0.05, "SGD estimator-noise slope {sgd_slope}");
    assert!(
        (igt_slope + 1.0).abs() <= 0.15,
        "IGT estimator-noise slope {igt_slope}"
    );

    // (c) matched-point cosine comparison: along the IGT trajectories, both
    // the velocity and an independent stochastic sample are evaluated at the
    // same iterates; binning by distance to the optimum, the mean IGT cosine
    // exceeds the mean SGD cosine in every populated bin past the transient.
    let problem = make_quadratic(100, 1000.0, 1.0, 0.3f64.sqrt(), 7).unwrap();
    let theta0 = ParamVector::new(
        standard_normal_vec(&mut stream_rng(7, &[0x1417]), 100)
            .into_iter()
            .map(|z| 30.0 * z)
            .collect(),
    )
    .unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let bins =
        igt::experiments::cosine_comparison_on_igt_runs(&problem, 1.0, 10_000, &seeds, &theta0, 100, 20)
            .unwrap();
    let mut populated = 0;
    for b in &bins {
        if b.sgd_count >= 30 && b.igt_count >= 30 {
            populated += 1;
            assert!(
                b.igt_mean > b.sgd_mean,
                "bin [{:.3}, {:.3}]: igt cosine {:.4} <= sgd cosine {:.4}",
                b.lo,
                b.hi,
                b.igt_mean,
                b.sgd_mean
            );
        }
    }
    assert!(populated >= 3, "only {populated} populated bins");

    // The 10x separation assertion last, so the slope/cosine findings print
    // even when this margin is the binding constraint.
    assert!(
        sgd_ratio >= 10.0 && hb_ratio >= 10.0,
        "baseline floors must be >= 10x the IGT value at t = 10^4: sgd {sgd_ratio:.2}x, hb {hb_ratio:.2}x"
    );
    println!(
        "[PASS] C5 quadratic study: slopes sgd {sgd_slope:.3}, igt {igt_slope:.3}; {populated} populated cosine bins; floors {sgd_ratio:.1}x / {hb_ratio:.1}x"
    );
}

/// C6: the convergence bound dominates the measured seed-mean error on a
/// reduced instance for every checked t > 2κ.
#[test]
fn c06_igt_error_bound_dominates() {
    let (d, kappa, l) = (20usize, 50.0, 1.0);
    let noise_sq: f64 = 0.3;
    let problem = make_quadratic(d, kappa, l, noise_sq.sqrt(), 31).unwrap();
    let alpha = 1.0 / l;
    let steps = 2000u64;
    let records: Vec<RunRecord> = (0..100u64)
        .map(|seed| {
            run_quadratic_method(
                &problem,
                &MethodSpec::Igt,
                alpha,
                steps,
                &ParamVector::zeros(d),
                stream_rng(seed, &[0xb0bd]),
            )
            .unwrap()
        })
        .collect();
    let agg = seed_aggregate(&records).unwrap();
    let delta0_sq = problem.theta_star().norm_sq();
    let checked = [101u64, 150, 200, 300, 500, 700, 1000, 1500, 1999];
    let mut tightest = f64::MAX;
    for &t in &checked {
        let bound = igt_error_bound(alpha, kappa, d, noise_sq, delta0_sq, t).unwrap();
        let measured = agg[t as usize].iterate_err_sq_mean;
        assert!(
            measured <= bound,
            "t = {t}: measured {measured} exceeds bound {bound}"
        );
        tightest = tightest.min(bound / measured);
    }
    println!("[PASS] C6 bound dominates at all checked t (tightest margin {tightest:.1}x)");
}

/// C7: noiseless Heavyball-IGT contracts at the accelerated rate under the
/// optimal tuning, and ρ(A) = √μ across the spectrum.
#[test]
fn c07_accelerated_rate() {
    let (d, kappa, l) = (50usize, 100.0, 1.0);
    let eigs = geometric_spectrum(d, kappa, l).unwrap();
    let problem = QuadraticProblem::new(eigs.clone(), ParamVector::zeros(d), 0.0).unwrap();
    let (alpha, mu) = optimal_hb_tuning(l, kappa).unwrap();
    let mut opt = Optimizer::heavyball_igt(alpha, mu).unwrap();
    let mut oracle = NoiselessOracle::new(&problem);
    let mut theta =
        ParamVector::new(standard_normal_vec(&mut stream_rng(3, &[0xc7]), d)).unwrap();
    let mut norms = Vec::with_capacity(401);
    for _ in 0..=400 {
        norms.push(theta.norm());
        theta = opt.step(&theta, &mut oracle).unwrap().0;
    }
    // The trajectory contracts by ~e^{-0.2} per step, so it reaches the f64
    // relative rounding floor shortly after t = 200; the asymptotic factor is
    // measured on the last fully signal-bearing window [100, 180].
    assert!(
        norms[200] / norms[0] < 1e-13,
        "expected the iterate to be at the rounding floor by t = 200"
    );
    let contraction = (norms[180] / norms[100]).powf(1.0 / 80.0);
    let target = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    assert!(
        (contraction - target).abs() <= 0.02 * target,
        "contraction {contraction} vs target {target}"
    );
    let max_dev = eigs
        .iter()
        .map(|&h| (spectral_radius2(&bias_matrix(alpha, mu, h)) - mu.sqrt()).abs())
        .fold(0.0f64, f64::max);
    assert!(max_dev <= 1e-6, "rho(A) deviates from sqrt(mu) by {max_dev}");
    println!(
        "[PASS] C7 accelerated rate: contraction {contraction:.5} vs {target:.5} (within 2%), rho dev {max_dev:.1e}"
    );
}

/// C8: at α = 1/(2L) the sweep finds μ > 0 stable in both dynamics; at that
/// tuning the mean error decays linearly and the variance like 1/t.
#[test]
fn c08_stable_momentum_regime() {
    let (d, kappa, l) = (20usize, 100.0, 1.0);
    let alpha = 1.0 / (2.0 * l);
    let eigs = geometric_spectrum(d, kappa, l).unwrap();
    let grid: Vec<f64> = (0..=1900).map(|k| k as f64 * 5e-4).collect();
    let best = stability_sweep(alpha, &eigs, &grid)
        .into_iter()
        .filter(|r| r.stable && r.mu > 0.0)
        .max_by(|a, b| a.mu.total_cmp(&b.mu))
        .expect("a stable positive momentum exists");
    assert!(best.mu > 0.0 && best.rho_a_max < 1.0 && best.rho_d_max < 1.0);

    // Mean error: expectation follows the noiseless recursion.
    let steps = 4000usize;
    let theta0 =
        ParamVector::new(standard_normal_vec(&mut stream_rng(5, &[0xc8]), d)).unwrap();
    let noiseless = QuadraticProblem::new(eigs.clone(), ParamVector::zeros(d), 0.0).unwrap();
    let mut mean_traj = Vec::with_capacity(steps);
    {
        let mut opt = Optimizer::heavyball_igt(alpha, best.mu).unwrap();
        let mut oracle = NoiselessOracle::new(&noiseless);
        let mut theta = theta0.clone();
        for _ in 0..steps {
            mean_traj.push(theta.clone());
            theta = opt.step(&theta, &mut oracle).unwrap().0;
        }
    }
    let fit_pts: Vec<(f64, f64)> = (steps / 5..=steps * 4 / 5)
        .map(|t| (t as f64, mean_traj[t].norm_sq().ln()))
        .collect();
    let fit = linear_fit(&fit_pts).unwrap();
    assert!(
        fit.r_squared > 0.99 && fit.slope < 0.0,
        "log-linear fit R^2 = {}, slope = {}",
        fit.r_squared,
        fit.slope
    );

    // Variance across seeds, against the mean trajectory.
    let noisy = QuadraticProblem::new(eigs, ParamVector::zeros(d), 0.3f64.sqrt()).unwrap();
    let n_seeds = 50u64;
    let mut variance = vec![0.0f64; steps];
    for seed in 0..n_seeds {
        let mut opt = Optimizer::heavyball_igt(alpha, best.mu).unwrap();
        let mut oracle = QuadraticOracle::new(&noisy, stream_rng(seed, &[0xc8, 2]));
        let mut theta = theta0.clone();
        for (t, var_t) in variance.iter_mut().enumerate() {
            *var_t += theta.dist_sq(&mean_traj[t]).unwrap() / n_seeds as f64;
            theta = opt.step(&theta, &mut oracle).unwrap().0;
        }
    }
    let series: Vec<(f64, f64)> = variance
        .iter()
        .enumerate()
        .map(|(t, v)| (t as f64, *v))
        .collect();
    let slope = loglog_slope(&series, 100.0, steps as f64).unwrap();
    assert!(
        (slope + 1.0).abs() <= 0.2,
        "variance slope {slope} outside -1 +/- 0.2"
    );
    println!(
        "[PASS] C8 regime sweep: mu* {:.4} (rhoA {:.6}, rhoD {:.6}), bias R^2 {:.4}, variance slope {slope:.3}",
        best.mu, best.rho_a_max, best.rho_d_max, fit.r_squared
    );
}

/// C9: the three LQR oracles agree: moment propagation vs Monte Carlo,
/// REINFORCE vs finite differences, and the 1-d Riccati hand example.
#[test]
fn c09_lqr_oracles() {
    // Moment propagation vs 10^5 Monte Carlo rollouts.
    let sys = make_lqr(53, 20, 12, 10).unwrap();
    let mut policy = LinearPolicy::zeros(12, 20);
    for i in 0..12 {
        for j in 0..20 {
            policy
                .gain
                .set(i, j, 0.05 * (((i * 20 + j) as f64 / 239.0) - 0.5));
        }
    }
    let exact = exact_expected_cost(&sys, &policy).unwrap();
    let mut rng = stream_rng(59, &[0xc9]);
    let n = 100_000usize;
    let costs: Vec<f64> = (0..n)
        .map(|_| rollout(&sys, &policy, &mut rng).total_cost)
        .collect();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * se,
        "MC mean {mean} vs exact {exact}, 3se {}",
        3.0 * se
    );

    // REINFORCE (filtering off) vs central finite differences, entrywise
    // within 3 combined standard errors, on 3 random (system, gain) pairs.
    let mut over_3se: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (pair, &sys_seed) in [61u64, 67, 71].iter().enumerate() {
        let sys = make_lqr(sys_seed, 8, 5, 10).unwrap();
        let mut policy = LinearPolicy::zeros(5, 8);
        let mut krng = stream_rng(sys_seed, &[0xc9, 3]);
        for i in 0..5 {
            for j in 0..8 {
                policy
                    .gain
                    .set(i, j, 0.1 * standard_normal_vec(&mut krng, 1)[0]);
            }
        }
        let fd = exact_cost_gradient(&sys, &policy).unwrap();
        // Accumulate per-entry mean and variance of the per-trajectory terms.
        let n_traj = 100_000usize;
        let mut rng = stream_rng(73 + pair as u64, &[0xc9, 4]);
        let mut sum = Mat::zeros(5, 8);
        let mut sum_sq = Mat::zeros(5, 8);
        for _ in 0..n_traj {
            let traj = rollout(&sys, &policy, &mut rng);
            let term = traj.score.scale(traj.total_cost);
            for i in 0..5 {
                for j in 0..8 {
                    sum.set(i, j, sum.at(i, j) + term.at(i, j));
                    sum_sq.set(i, j, sum_sq.at(i, j) + term.at(i, j) * term.at(i, j));
                }
            }
        }
        for i in 0..5 {
            for j in 0..8 {
                let m = sum.at(i, j) / n_traj as f64;
                let v = (sum_sq.at(i, j) / n_traj as f64 - m * m).max(0.0);
                let se = (v / n_traj as f64).sqrt();
                // The FD oracle carries its own (tiny) truncation error.
                let z = (m - fd.at(i, j)).abs() / (se + 1e-4 / 3.0);
                if z > 3.0 {
                    over_3se.push((pair, i, j, z));
                }
                assert!(
                    z <= 4.5,
                    "pair {pair} entry ({i},{j}): reinforce {m} vs fd {} is {z:.2} se away",
                    fd.at(i, j)
                );
            }
        }
    }
    // 120 simultaneous entry tests: a small number of ~3 sigma excursions is
    // expected from an unbiased estimator (about 0.3 on average).
    assert!(
        over_3se.len() <= 2,
        "{} entries beyond 3 se: {over_3se:?}",
        over_3se.len()
    );

    // 1-d Riccati hand example.
    let one_d = LqrSystem::from_parts(
        Mat::from_rows(vec![vec![0.0]]).unwrap(),
        Mat::from_rows(vec![vec![1.0]]).unwrap(),
        Mat::from_rows(vec![vec![1.0]]).unwrap(),
        Mat::from_rows(vec![vec![1.0]]).unwrap(),
        1,
        3.0,
    )
    .unwrap();
    let sol = riccati_optimal(&one_d).unwrap();
    assert_eq!(sol.gains[0].at(0, 0), 0.0);
    assert_eq!(sol.value_matrices[0].at(0, 0), 1.0);
    println!(
        "[PASS] C9 LQR oracles agree (MC cost, REINFORCE vs FD on 3 pairs with {} mild >3se excursions, 1-d Riccati)",
        over_3se.len()
    );
}

/// C10: desk-scale LQR ordering with the tuned common stepsize.
#[test]
fn c10_lqr_desk_scale_ordering() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Lqr);
    let sys = make_lqr(cfg.system_seed, 20, 12, 10).unwrap();
    let riccati = riccati_optimal(&sys).unwrap();
    let filter = TrajectoryFilter::MedianMultiple(cfg.filter_multiple);
    let run = |spec: &MethodSpec, tag: u64| {
        run_lqr_method(
            &sys,
            spec,
            cfg.alpha,
            cfg.n_traj,
            cfg.iterations,
            filter,
            stream_rng(cfg.seeds[0], &[0x4c51_5254, tag]),
        )
        .unwrap()
    };
    let gd = run(&MethodSpec::ExactGd, 0);
    let sgd = run(&MethodSpec::Sgd, 1);
    let ita = run(&MethodSpec::Ita { c: cfg.c }, 2);

    let (g, s, i) = (gd.final_eval(), sgd.final_eval(), ita.final_eval());
    assert!(
        g >= riccati.cost_stochastic_policy - 1e-9,
        "gd final {g} beat the stochastic-policy optimum {}",
        riccati.cost_stochastic_policy
    );
    assert!(g <= i && i < s, "ordering violated: gd {g}, ita {i}, sgd {s}");
    assert!(
        i <= 0.95 * s,
        "ita final {i} not at least 5% below sgd final {s}"
    );
    let (sm_i, sm_s) = (
        ita.eval_diff_variance_last_half(),
        sgd.eval_diff_variance_last_half(),
    );
    assert!(
        sm_i < sm_s,
        "ita eval curve not smoother: {sm_i} vs {sm_s}"
    );
    println!(
        "[PASS] C10 LQR ordering: optimal {:.1}, gd {g:.1} <= ita {i:.1} < sgd {s:.1} (ratio {:.3}), smoothness {sm_i:.2e} < {sm_s:.2e}",
        riccati.cost_stochastic_policy,
        i / s
    );
}

/// C11: every default experiment config produces byte-identical files when
/// run twice.
#[test]
fn c11_determinism() {
    for kind in [
        ExperimentKind::NoisePropagation,
        ExperimentKind::Quadratic,
        ExperimentKind::Lqr,
        ExperimentKind::HbRate,
        ExperimentKind::SpectralSweep,
    ] {
        let cfg = ExperimentConfig::default_for(kind);
        let mut hashes = Vec::new();
        for round in 0..2 {
            let dir = temp_dir(&format!("{}-{round}", kind.name()));
            let mut run_cfg = cfg.clone();
            run_cfg.output_dir = Some(dir.clone());
            let outcome = run_experiment(&run_cfg).unwrap();
            let mut names: Vec<_> = outcome
                .files
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect();
            names.sort();
            let mut digest: Vec<(String, Vec<u8>)> = Vec::new();
            for name in &names {
                // The config echo embeds the output path; compare the rest.
                if name.ends_with("_config.json") {
                    continue;
                }
                digest.push((name.clone(), std::fs::read(dir.join(name)).unwrap()));
            }
            hashes.push(digest);
            std::fs::remove_dir_all(&dir).ok();
        }
        assert_eq!(
            hashes[0].len(),
            hashes[1].len(),
            "{}: file sets differ",
            kind.name()
        );
        for (a, b) in hashes[0].iter().zip(&hashes[1]) {
            assert_eq!(a.0, b.0, "{}: file names differ", kind.name());
            assert_eq!(
                a.1, b.1,
                "{}: bytes differ in {}",
                kind.name(),
                a.0
            );
        }
    }
    println!("[PASS] C11 determinism: byte-identical outputs for all five default experiments");
}
