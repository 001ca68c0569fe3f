//! Linear-quadratic regulator policy-gradient testbed.
//!
//! The world: state dynamics `s_{h+1} = A s_h + B a_h`, quadratic stage cost
//! `C(s, a) = sᵀQs + aᵀRa` over a 10-step horizon with a terminal `sᵀQs`
//! charge, initial state `s_0 ~ N(0, 3I)`, and a stochastic linear policy
//! `a_h = K s_h + ε_h`, `ε_h ~ N(0, I)`. The gain `K` is the parameter being
//! learned.
//!
//! Three gradient routes coexist and cross-check one another:
//! score-function (REINFORCE) estimates from rollouts, central finite
//! differences of the exact moment-propagated cost, and the backward Riccati
//! recursion giving the optimal time-varying gains.

use rand_chacha::ChaCha8Rng;

use crate::error::{IgtError, Result};
use crate::estimators::{GradientSample, QueryPoint};
use crate::linalg::Mat;
use crate::optimizers::GradientOracle;
use crate::rng::standard_normal_vec;
use crate::vector::ParamVector;

/// System matrices and problem constants.
#[derive(Debug, Clone)]
pub struct LqrSystem {
    pub a_dyn: Mat,
    pub b_dyn: Mat,
    pub q: Mat,
    pub r: Mat,
    pub horizon: usize,
    /// Initial-state covariance is `s0_cov_scale · I`.
    pub s0_cov_scale: f64,
}

impl LqrSystem {
    /// Assembles a system from explicit parts, checking only shapes; the
    /// invariants of [`make_lqr`] (SPD costs, unit-norm dynamics) are not
    /// enforced here so tests can build degenerate worlds.
    pub fn from_parts(
        a_dyn: Mat,
        b_dyn: Mat,
        q: Mat,
        r: Mat,
        horizon: usize,
        s0_cov_scale: f64,
    ) -> Result<Self> {
        let n = a_dyn.rows();
        let m = b_dyn.cols();
        if a_dyn.cols() != n || b_dyn.rows() != n || q.rows() != n || q.cols() != n
            || r.rows() != m || r.cols() != m
        {
            return Err(IgtError::InvalidParameter(
                "inconsistent system matrix shapes".into(),
            ));
        }
        if horizon == 0 {
            return Err(IgtError::InvalidParameter("horizon must be >= 1".into()));
        }
        if !(s0_cov_scale >= 0.0) {
            return Err(IgtError::InvalidParameter(
                "initial-state covariance scale must be >= 0".into(),
            ));
        }
        Ok(Self {
            a_dyn,
            b_dyn,
            q,
            r,
            horizon,
            s0_cov_scale,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a_dyn.rows()
    }

    pub fn action_dim(&self) -> usize {
        self.b_dyn.cols()
    }
}

/// Random SPD matrix `U diag(λ) Uᵀ` with eigenvalues geometrically spaced
/// from 1 to `cond`.
fn spd_with_condition(dim: usize, cond: f64, rng: &mut ChaCha8Rng) -> Mat {
    let u = Mat::random_orthogonal(dim, rng);
    let lam: Vec<f64> = (0..dim)
        .map(|i| {
            let e = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
            cond.powf(e)
        })
        .collect();
    let scaled = Mat::from_fn(dim, dim, |i, j| u.at(i, j) * lam[j]);
    scaled.matmul(&u.transpose()).expect("square")
}

/// Generates the standard random system: `Q` (n×n) and `R` (m×m) SPD with
/// condition number 3, dynamics matrices with standard-normal entries scaled
/// to unit Frobenius norm, horizon 10, `s_0 ~ N(0, 3I)`. Deterministic per
/// seed.
pub fn make_lqr(seed: u64, n: usize, m: usize, horizon: usize) -> Result<LqrSystem> {
    if n < 1 || m < 1 {
        return Err(IgtError::InvalidParameter(
            "state and action dimensions must be >= 1".into(),
        ));
    }
    let mut rng = crate::rng::stream_rng(seed, &[0x4c51]);
    let q = spd_with_condition(n, 3.0, &mut rng);
    let r = spd_with_condition(m, 3.0, &mut rng);
    let mut a_dyn = Mat::gaussian(n, n, &mut rng);
    a_dyn = a_dyn.scale(1.0 / a_dyn.frobenius_norm());
    let mut b_dyn = Mat::gaussian(n, m, &mut rng);
    b_dyn = b_dyn.scale(1.0 / b_dyn.frobenius_norm());
    LqrSystem::from_parts(a_dyn, b_dyn, q, r, horizon, 3.0)
}

/// Time-invariant linear-Gaussian policy `a = K s + ε`, `ε ~ N(0, I)`.
#[derive(Debug, Clone)]
pub struct LinearPolicy {
    pub gain: Mat,
}

impl LinearPolicy {
    pub fn new(gain: Mat) -> Self {
        Self { gain }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            gain: Mat::zeros(m, n),
        }
    }

    pub fn from_flat(m: usize, n: usize, values: &[f64]) -> Result<Self> {
        Ok(Self {
            gain: Mat::from_flat(m, n, values.to_vec())?,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gain.as_slice().to_vec()
    }
}

/// One sampled episode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `s_0 .. s_H`.
    pub states: Vec<Vec<f64>>,
    /// `a_0 .. a_{H−1}`.
    pub actions: Vec<Vec<f64>>,
    /// Stage costs `s_hᵀQs_h + a_hᵀRa_h` for `h < H`, then the terminal
    /// `s_HᵀQs_H`.
    pub costs: Vec<f64>,
    pub total_cost: f64,
    /// `Σ_h ∇_K log π_K(a_h|s_h) = Σ_h ε_h s_hᵀ`.
    pub score: Mat,
}

fn quad_form(m: &Mat, v: &[f64]) -> f64 {
    let mv = m.matvec(v).expect("shape checked by construction");
    v.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

/// Samples one episode under the stochastic policy.
pub fn rollout(sys: &LqrSystem, policy: &LinearPolicy, rng: &mut ChaCha8Rng) -> Trajectory {
    let n = sys.state_dim();
    let m = sys.action_dim();
    let mut s: Vec<f64> = standard_normal_vec(rng, n)
        .into_iter()
        .map(|z| sys.s0_cov_scale.sqrt() * z)
        .collect();
    let mut states = Vec::with_capacity(sys.horizon + 1);
    let mut actions = Vec::with_capacity(sys.horizon);
    let mut costs = Vec::with_capacity(sys.horizon + 1);
    let mut score = Mat::zeros(m, n);
    let mut total = 0.0;
    for _ in 0..sys.horizon {
        let eps = standard_normal_vec(rng, m);
        let ks = policy.gain.matvec(&s).expect("gain is m x n");
        let a: Vec<f64> = ks.iter().zip(&eps).map(|(k, e)| k + e).collect();
        let c = quad_form(&sys.q, &s) + quad_form(&sys.r, &a);
        // ∇_K log N(a; Ks, I) = (a − Ks) sᵀ = ε sᵀ
        for i in 0..m {
            for j in 0..n {
                score.set(i, j, score.at(i, j) + eps[i] * s[j]);
            }
        }
        states.push(s.clone());
        actions.push(a.clone());
        costs.push(c);
        total += c;
        let asb = sys.a_dyn.matvec(&s).expect("A is n x n");
        let ba = sys.b_dyn.matvec(&a).expect("B is n x m");
        s = asb.iter().zip(&ba).map(|(x, y)| x + y).collect();
    }
    let terminal = quad_form(&sys.q, &s);
    states.push(s);
    costs.push(terminal);
    total += terminal;
    Trajectory {
        states,
        actions,
        costs,
        total_cost: total,
        score,
    }
}

/// Trajectory filtering policy for the score-function estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryFilter {
    Disabled,
    /// Discard a trajectory whose per-trajectory gradient term has Frobenius
    /// norm above `multiple` times the batch median.
    MedianMultiple(f64),
}

impl Default for TrajectoryFilter {
    fn default() -> Self {
        TrajectoryFilter::MedianMultiple(10.0)
    }
}

/// Score-function gradient estimate plus batch diagnostics.
#[derive(Debug, Clone)]
pub struct ReinforceEstimate {
    pub gradient: Mat,
    pub kept: usize,
    /// Mean total cost over all sampled trajectories (kept or not).
    pub mean_cost: f64,
}

/// Score-function (REINFORCE) gradient of the expected total cost, averaged
/// over `n_traj` rollouts. Returns the mean over kept trajectories and the
/// kept count.
pub fn reinforce_gradient(
    sys: &LqrSystem,
    policy: &LinearPolicy,
    n_traj: usize,
    rng: &mut ChaCha8Rng,
    filter: TrajectoryFilter,
) -> Result<(Mat, usize)> {
    let est = reinforce_estimate(sys, policy, n_traj, rng, filter)?;
    Ok((est.gradient, est.kept))
}

pub fn reinforce_estimate(
    sys: &LqrSystem,
    policy: &LinearPolicy,
    n_traj: usize,
    rng: &mut ChaCha8Rng,
    filter: TrajectoryFilter,
) -> Result<ReinforceEstimate> {
    if n_traj < 1 {
        return Err(IgtError::InvalidParameter(
            "need at least one trajectory".into(),
        ));
    }
    let m = sys.action_dim();
    let n = sys.state_dim();
    let mut terms: Vec<Mat> = Vec::with_capacity(n_traj);
    let mut norms: Vec<f64> = Vec::with_capacity(n_traj);
    let mut cost_sum = 0.0;
    for _ in 0..n_traj {
        let traj = rollout(sys, policy, rng);
        cost_sum += traj.total_cost;
        let term = traj.score.scale(traj.total_cost);
        norms.push(term.frobenius_norm());
        terms.push(term);
    }
    let keep: Vec<bool> = match filter {
        TrajectoryFilter::Disabled => vec![true; n_traj],
        TrajectoryFilter::MedianMultiple(mult) => {
            let mut sorted = norms.clone();
            sorted.sort_by(f64::total_cmp);
            let median = if n_traj % 2 == 1 {
                sorted[n_traj / 2]
            } else {
                0.5 * (sorted[n_traj / 2 - 1] + sorted[n_traj / 2])
            };
            norms.iter().map(|&x| x <= mult * median).collect()
        }
    };
    let kept = keep.iter().filter(|&&k| k).count();
    if kept == 0 {
        return Err(IgtError::AllTrajectoriesDiscarded(n_traj));
    }
    let mut mean = Mat::zeros(m, n);
    for (term, &k) in terms.iter().zip(&keep) {
        if k {
            mean = mean.add(term)?;
        }
    }
    Ok(ReinforceEstimate {
        gradient: mean.scale(1.0 / kept as f64),
        kept,
        mean_cost: cost_sum / n_traj as f64,
    })
}

/// Exact expected total cost of the stochastic policy, by propagating the
/// state second moment through the closed loop:
/// `Σ_{h+1} = (A+BK) Σ_h (A+BK)ᵀ + BBᵀ`, stage cost
/// `tr((Q + KᵀRK) Σ_h) + tr(R)`, terminal `tr(Q Σ_H)`.
pub fn exact_expected_cost(sys: &LqrSystem, policy: &LinearPolicy) -> Result<f64> {
    let n = sys.state_dim();
    let k = &policy.gain;
    if k.rows() != sys.action_dim() || k.cols() != n {
        return Err(IgtError::DimensionMismatch {
            expected: sys.action_dim() * n,
            got: k.rows() * k.cols(),
        });
    }
    let closed = sys.a_dyn.add(&sys.b_dyn.matmul(k)?)?;
    let closed_t = closed.transpose();
    let ktr = k.transpose().matmul(&sys.r)?;
    let stage = sys.q.add(&ktr.matmul(k)?)?;
    let bbt = sys.b_dyn.matmul(&sys.b_dyn.transpose())?;
    let tr_r = sys.r.trace();
    // tr(S Σ) with symmetric Σ is the elementwise dot; this cost sits in the
    // inner loop of the finite-difference gradient.
    let trace_dot = |a: &Mat, b: &Mat| -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    };
    let mut sigma = Mat::identity(n).scale(sys.s0_cov_scale);
    let mut total = 0.0;
    for _ in 0..sys.horizon {
        total += trace_dot(&stage, &sigma) + tr_r;
        sigma = closed.matmul(&sigma)?.matmul(&closed_t)?.add(&bbt)?;
    }
    total += trace_dot(&sys.q, &sigma);
    Ok(total)
}

/// Deterministic gradient of [`exact_expected_cost`] by central finite
/// differences with step `1e−5` per gain entry.
pub fn exact_cost_gradient(sys: &LqrSystem, policy: &LinearPolicy) -> Result<Mat> {
    let step = 1e-5;
    let m = sys.action_dim();
    let n = sys.state_dim();
    let mut grad = Mat::zeros(m, n);
    let mut probe = policy.clone();
    for i in 0..m {
        for j in 0..n {
            let orig = probe.gain.at(i, j);
            probe.gain.set(i, j, orig + step);
            let plus = exact_expected_cost(sys, &probe)?;
            probe.gain.set(i, j, orig - step);
            let minus = exact_expected_cost(sys, &probe)?;
            probe.gain.set(i, j, orig);
            grad.set(i, j, (plus - minus) / (2.0 * step));
        }
    }
    Ok(grad)
}

/// Finite-horizon Riccati solution: optimal time-varying gains and the
/// optimal expected cost under both accountings.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// `K_h` for `h = 0..H−1`.
    pub gains: Vec<Mat>,
    /// `P_h` for `h = 0..H` with `P_H = Q`.
    pub value_matrices: Vec<Mat>,
    /// `tr(P_0 Σ_0)`: the cost of the noiseless optimal controller.
    pub cost_deterministic: f64,
    /// Adds the exploration-noise charges `Σ_h [tr(R) + tr(Bᵀ P_{h+1} B)]`:
    /// the best any policy of the form `a = π(s) + ε` can achieve, and the
    /// comparator every learned stochastic policy is measured against.
    pub cost_stochastic_policy: f64,
}

/// Backward Riccati recursion:
/// `P_H = Q`, `K_h = −(R + BᵀP_{h+1}B)⁻¹ BᵀP_{h+1}A`,
/// `P_h = Q + K_hᵀRK_h + (A+BK_h)ᵀP_{h+1}(A+BK_h)`.
pub fn riccati_optimal(sys: &LqrSystem) -> Result<RiccatiSolution> {
    let h = sys.horizon;
    let bt = sys.b_dyn.transpose();
    let mut value_matrices = vec![Mat::zeros(0, 0); h + 1];
    value_matrices[h] = sys.q.clone();
    let mut gains = vec![Mat::zeros(0, 0); h];
    let mut noise_charge = 0.0;
    for step in (0..h).rev() {
        let p_next = &value_matrices[step + 1];
        let btp = bt.matmul(p_next)?;
        let gram = sys.r.add(&btp.matmul(&sys.b_dyn)?)?;
        let chol = gram.cholesky()?;
        let k = chol.solve_mat(&btp.matmul(&sys.a_dyn)?)?.scale(-1.0);
        let closed = sys.a_dyn.add(&sys.b_dyn.matmul(&k)?)?;
        let ktr = k.transpose().matmul(&sys.r)?;
        let p = sys
            .q
            .add(&ktr.matmul(&k)?)?
            .add(&closed.transpose().matmul(&p_next.matmul(&closed)?)?)?;
        noise_charge += sys.r.trace() + btp.matmul(&sys.b_dyn)?.trace();
        gains[step] = k;
        value_matrices[step] = p;
    }
    let cost_deterministic = value_matrices[0].trace() * sys.s0_cov_scale;
    Ok(RiccatiSolution {
        gains,
        value_matrices,
        cost_deterministic,
        cost_stochastic_policy: cost_deterministic + noise_charge,
    })
}

impl RiccatiSolution {
    /// Entrywise time average of the optimal gains; a natural time-invariant
    /// reference point.
    pub fn time_averaged_gain(&self) -> Mat {
        let mut acc = Mat::zeros(self.gains[0].rows(), self.gains[0].cols());
        for k in &self.gains {
            acc = acc.add(k).expect("uniform shapes");
        }
        acc.scale(1.0 / self.gains.len() as f64)
    }
}

/// REINFORCE-based stochastic oracle over the flattened gain, for use with
/// the estimator/optimizer machinery.
pub struct ReinforceOracle<'a> {
    sys: &'a LqrSystem,
    n_traj: usize,
    rng: ChaCha8Rng,
    filter: TrajectoryFilter,
    last_kept: usize,
    last_mean_cost: f64,
}

impl<'a> ReinforceOracle<'a> {
    pub fn new(sys: &'a LqrSystem, n_traj: usize, rng: ChaCha8Rng, filter: TrajectoryFilter) -> Self {
        Self {
            sys,
            n_traj,
            rng,
            filter,
            last_kept: 0,
            last_mean_cost: f64::NAN,
        }
    }

    /// Trajectories kept by the filter in the most recent gradient call.
    pub fn last_kept(&self) -> usize {
        self.last_kept
    }

    /// Mean sampled cost over the most recent batch.
    pub fn last_mean_cost(&self) -> f64 {
        self.last_mean_cost
    }
}

impl GradientOracle for ReinforceOracle<'_> {
    fn dim(&self) -> usize {
        self.sys.action_dim() * self.sys.state_dim()
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let policy = LinearPolicy::from_flat(
            self.sys.action_dim(),
            self.sys.state_dim(),
            query.point().as_slice(),
        )?;
        let est =
            reinforce_estimate(self.sys, &policy, self.n_traj, &mut self.rng, self.filter)?;
        self.last_kept = est.kept;
        self.last_mean_cost = est.mean_cost;
        GradientSample::measured_at(query, ParamVector::new(est.gradient.into_vec())?)
    }
}

/// Deterministic oracle returning the finite-difference gradient of the
/// exact expected cost.
pub struct ExactCostOracle<'a> {
    sys: &'a LqrSystem,
}

impl<'a> ExactCostOracle<'a> {
    pub fn new(sys: &'a LqrSystem) -> Self {
        Self { sys }
    }
}

impl GradientOracle for ExactCostOracle<'_> {
    fn dim(&self) -> usize {
        self.sys.action_dim() * self.sys.state_dim()
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let policy = LinearPolicy::from_flat(
            self.sys.action_dim(),
            self.sys.state_dim(),
            query.point().as_slice(),
        )?;
        let grad = exact_cost_gradient(self.sys, &policy)?;
        GradientSample::measured_at(query, ParamVector::new(grad.into_vec())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, stream_rng};

    /// Jacobi eigenvalue iteration for symmetric matrices; the independent
    /// oracle for SPD construction invariants.
    fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
        let n = m.rows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m.at(i, j)).collect())
            .collect();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-30 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn make_lqr_invariants() {
        let sys = make_lqr(3, 20, 12, 10).unwrap();
        assert!((sys.a_dyn.frobenius_norm() - 1.0).abs() < 1e-12);
        assert!((sys.b_dyn.frobenius_norm() - 1.0).abs() < 1e-12);
        for (mat, dim) in [(&sys.q, 20), (&sys.r, 12)] {
            // Symmetric.
            let asym = mat.sub(&mat.transpose()).unwrap().frobenius_norm();
            assert!(asym < 1e-12);
            let mut eigs = symmetric_eigenvalues(mat);
            eigs.sort_by(f64::total_cmp);
            assert!(eigs[0] > 0.0);
            let cond = eigs[dim - 1] / eigs[0];
            assert!((cond - 3.0).abs() < 1e-8, "cond = {cond}");
        }
        // Deterministic per seed.
        let sys2 = make_lqr(3, 20, 12, 10).unwrap();
        assert_eq!(sys.a_dyn.as_slice(), sys2.a_dyn.as_slice());

        // 1-d degenerate: SPD collapses to a positive scalar.
        let tiny = make_lqr(5, 1, 1, 10).unwrap();
        assert!(tiny.q.at(0, 0) > 0.0);
        assert!(tiny.r.at(0, 0) > 0.0);
    }

    #[test]
    fn rollout_decoupled_control() {
        // B = 0, K = 0: states follow s_{h+1} = A s_h exactly and the cost
        // decomposes into state and pure-noise action terms.
        let sys = make_lqr(11, 4, 3, 6).unwrap();
        let zero_b = LqrSystem::from_parts(
            sys.a_dyn.clone(),
            Mat::zeros(4, 3),
            sys.q.clone(),
            sys.r.clone(),
            6,
            3.0,
        )
        .unwrap();
        let policy = LinearPolicy::zeros(3, 4);
        let mut rng = seeded_rng(5);
        let traj = rollout(&zero_b, &policy, &mut rng);
        for h in 0..6 {
            let expect = zero_b.a_dyn.matvec(&traj.states[h]).unwrap();
            for i in 0..4 {
                assert!((traj.states[h + 1][i] - expect[i]).abs() < 1e-14);
            }
            // With K = 0 the action is the raw noise.
            let c = quad_form(&zero_b.q, &traj.states[h]) + quad_form(&zero_b.r, &traj.actions[h]);
            assert!((traj.costs[h] - c).abs() < 1e-12);
        }
        assert!(
            (traj.total_cost - traj.costs.iter().sum::<f64>()).abs() < 1e-10
        );
    }

    #[test]
    fn rollout_zero_initial_state_stays_at_noise_path() {
        // With zero initial covariance and K = 0 the state is driven purely
        // by B ε injections.
        let sys = make_lqr(13, 4, 3, 6).unwrap();
        let pinned = LqrSystem::from_parts(
            sys.a_dyn.clone(),
            sys.b_dyn.clone(),
            sys.q.clone(),
            sys.r.clone(),
            6,
            0.0,
        )
        .unwrap();
        let policy = LinearPolicy::zeros(3, 4);
        let mut rng = seeded_rng(5);
        let traj = rollout(&pinned, &policy, &mut rng);
        assert_eq!(traj.states[0], vec![0.0; 4]);
        let b_eps = pinned.b_dyn.matvec(&traj.actions[0]).unwrap();
        for i in 0..4 {
            assert!((traj.states[1][i] - b_eps[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rollout_is_deterministic_per_stream() {
        let sys = make_lqr(1, 20, 12, 10).unwrap();
        let policy = LinearPolicy::zeros(12, 20);
        let a = rollout(&sys, &policy, &mut stream_rng(9, &[1, 2]));
        let b = rollout(&sys, &policy, &mut stream_rng(9, &[1, 2]));
        assert_eq!(a.states, b.states);
        assert_eq!(a.total_cost, b.total_cost);
    }

    #[test]
    fn zero_cost_system_has_zero_gradient() {
        let sys = make_lqr(17, 4, 3, 5).unwrap();
        let free = LqrSystem::from_parts(
            sys.a_dyn.clone(),
            sys.b_dyn.clone(),
            Mat::zeros(4, 4),
            Mat::zeros(3, 3),
            5,
            3.0,
        )
        .unwrap();
        let policy = LinearPolicy::zeros(3, 4);
        let (g, kept) = reinforce_gradient(
            &free,
            &policy,
            64,
            &mut seeded_rng(2),
            TrajectoryFilter::Disabled,
        )
        .unwrap();
        assert_eq!(kept, 64);
        assert_eq!(g.frobenius_norm(), 0.0);
        let exact = exact_cost_gradient(&free, &policy).unwrap();
        assert_eq!(exact.frobenius_norm(), 0.0);
        assert_eq!(exact_expected_cost(&free, &policy).unwrap(), 0.0);
    }

    #[test]
    fn filter_discards_outliers() {
        let sys = make_lqr(19, 6, 4, 8).unwrap();
        let mut policy = LinearPolicy::zeros(4, 6);
        // A gain large enough to destabilize some rollouts.
        for i in 0..4 {
            for j in 0..6 {
                policy.gain.set(i, j, if (i + j) % 2 == 0 { 2.0 } else { -2.0 });
            }
        }
        let (_, kept_strict) = reinforce_gradient(
            &sys,
            &policy,
            200,
            &mut seeded_rng(3),
            TrajectoryFilter::MedianMultiple(2.0),
        )
        .unwrap();
        let (_, kept_all) = reinforce_gradient(
            &sys,
            &policy,
            200,
            &mut seeded_rng(3),
            TrajectoryFilter::Disabled,
        )
        .unwrap();
        assert_eq!(kept_all, 200);
        assert!(kept_strict < 200, "strict filter should drop something");
        assert!(kept_strict > 100, "median-based cut keeps the majority");
    }

    #[test]
    fn exact_cost_horizon_one_hand_example() {
        // Horizon 1, K = 0: cost = tr(QΣ₀) + tr(R) + tr(Q E[s₁s₁ᵀ]) with
        // E[s₁s₁ᵀ] = AΣ₀Aᵀ + BBᵀ.
        let sys = make_lqr(23, 5, 3, 1).unwrap();
        let policy = LinearPolicy::zeros(3, 5);
        let got = exact_expected_cost(&sys, &policy).unwrap();
        let sigma0 = Mat::identity(5).scale(3.0);
        let s1 = sys
            .a_dyn
            .matmul(&sigma0)
            .unwrap()
            .matmul(&sys.a_dyn.transpose())
            .unwrap()
            .add(&sys.b_dyn.matmul(&sys.b_dyn.transpose()).unwrap())
            .unwrap();
        let expect = sys.q.matmul(&sigma0).unwrap().trace()
            + sys.r.trace()
            + sys.q.matmul(&s1).unwrap().trace();
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn exact_cost_matches_monte_carlo() {
        let sys = make_lqr(29, 6, 4, 10).unwrap();
        let mut policy = LinearPolicy::zeros(4, 6);
        for i in 0..4 {
            for j in 0..6 {
                policy.gain.set(i, j, 0.1 * ((i * 6 + j) as f64 / 24.0 - 0.5));
            }
        }
        let exact = exact_expected_cost(&sys, &policy).unwrap();
        let mut rng = seeded_rng(31);
        let n = 20_000usize;
        let costs: Vec<f64> = (0..n).map(|_| rollout(&sys, &policy, &mut rng).total_cost).collect();
        let mean = costs.iter().sum::<f64>() / n as f64;
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "MC {mean} vs exact {exact} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn riccati_one_dimensional_hand_example() {
        // A = 0, B = 1, Q = 1, R = 1, horizon 1: P₁ = 1, K₀ = 0, P₀ = 1.
        let sys = LqrSystem::from_parts(
            Mat::from_rows(vec![vec![0.0]]).unwrap(),
            Mat::from_rows(vec![vec![1.0]]).unwrap(),
            Mat::from_rows(vec![vec![1.0]]).unwrap(),
            Mat::from_rows(vec![vec![1.0]]).unwrap(),
            1,
            3.0,
        )
        .unwrap();
        let sol = riccati_optimal(&sys).unwrap();
        assert_eq!(sol.value_matrices[1].at(0, 0), 1.0);
        assert_eq!(sol.gains[0].at(0, 0), 0.0);
        assert_eq!(sol.value_matrices[0].at(0, 0), 1.0);
        assert_eq!(sol.cost_deterministic, 3.0);
        // Exploration charge: tr(R) + tr(BᵀP₁B) = 1 + 1 = 2.
        assert_eq!(sol.cost_stochastic_policy, 5.0);
    }

    #[test]
    fn riccati_with_zero_control_matches_power_series() {
        // B = 0: K_h = 0 and tr(P₀Σ₀) = Σ_j tr(Q A^j Σ₀ (A^j)ᵀ); the
        // stochastic-policy accounting adds tr(R)·H.
        let base = make_lqr(37, 5, 3, 4).unwrap();
        let sys = LqrSystem::from_parts(
            base.a_dyn.clone(),
            Mat::zeros(5, 3),
            base.q.clone(),
            base.r.clone(),
            4,
            3.0,
        )
        .unwrap();
        let sol = riccati_optimal(&sys).unwrap();
        for k in &sol.gains {
            assert_eq!(k.frobenius_norm(), 0.0);
        }
        let sigma0 = Mat::identity(5).scale(3.0);
        let mut a_pow = Mat::identity(5);
        let mut expect = 0.0;
        for _ in 0..=4 {
            let prop = a_pow.matmul(&sigma0).unwrap().matmul(&a_pow.transpose()).unwrap();
            expect += sys.q.matmul(&prop).unwrap().trace();
            a_pow = sys.a_dyn.matmul(&a_pow).unwrap();
        }
        assert!((sol.cost_deterministic - expect).abs() < 1e-9);
        assert!(
            (sol.cost_stochastic_policy - (expect + 4.0 * sys.r.trace())).abs() < 1e-9
        );
    }

    #[test]
    fn learned_policies_never_beat_riccati() {
        let sys = make_lqr(41, 8, 5, 10).unwrap();
        let sol = riccati_optimal(&sys).unwrap();
        // The time-averaged optimal gain is feasible but weakly suboptimal.
        let avg = LinearPolicy::new(sol.time_averaged_gain());
        let avg_cost = exact_expected_cost(&sys, &avg).unwrap();
        assert!(avg_cost >= sol.cost_stochastic_policy - 1e-9);
        // Random time-invariant gains too.
        let mut rng = seeded_rng(43);
        for _ in 0..10 {
            let gain = Mat::gaussian(5, 8, &mut rng).scale(0.3);
            let cost = exact_expected_cost(&sys, &LinearPolicy::new(gain)).unwrap();
            assert!(cost >= sol.cost_stochastic_policy - 1e-9);
        }
    }

    #[test]
    fn finite_difference_gradient_smoke() {
        // Light version of the unbiasedness cross-check: REINFORCE mean over
        // a moderate batch should correlate strongly with the exact
        // finite-difference gradient.
        let sys = make_lqr(47, 5, 3, 6).unwrap();
        let mut policy = LinearPolicy::zeros(3, 5);
        for i in 0..3 {
            for j in 0..5 {
                policy.gain.set(i, j, 0.05 * ((i + 2 * j) as f64 / 12.0 - 0.4));
            }
        }
        let exact = exact_cost_gradient(&sys, &policy).unwrap();
        let (est, _) = reinforce_gradient(
            &sys,
            &policy,
            40_000,
            &mut seeded_rng(49),
            TrajectoryFilter::Disabled,
        )
        .unwrap();
        let dot: f64 = exact
            .as_slice()
            .iter()
            .zip(est.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let cos = dot / (exact.frobenius_norm() * est.frobenius_norm());
        assert!(cos > 0.95, "cosine between estimate and exact = {cos}");
    }
}
