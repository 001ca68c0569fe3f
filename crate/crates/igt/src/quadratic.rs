//! Exact quadratic-world oracle.
//!
//! Problems are `f(θ) = ½ (θ − θ*)ᵀ H (θ − θ*)` with `H` held as a diagonal
//! spectrum (the analysis decouples per eigendirection, so the diagonal frame
//! is where every identity is tested; an optional random rotation is
//! available for sanity checks). Stochastic gradients add isotropic Gaussian
//! noise that can be recorded and replayed bit-for-bit.
//!
//! Beyond problem generation the module carries the noise-propagation
//! toolkit: the per-eigendirection coefficients `N_{i,t}` with which the
//! noise of step `i` appears in iterate `t`, their empirical counterpart via
//! unit-impulse simulation, the 2×2 bias and 3×3 variance dynamics matrices
//! of Heavyball-IGT, and spectral-radius evaluation for both.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{IgtError, Result};
use crate::estimators::{GradientSample, QueryPoint};
use crate::linalg::Mat;
use crate::optimizers::GradientOracle;
use crate::rng::{seeded_rng, standard_normal_vec};
use crate::vector::ParamVector;

/// A strongly convex quadratic with diagonal Hessian spectrum, optimum, and
/// isotropic gradient-noise level.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    eigs: Vec<f64>,
    theta_star: ParamVector,
    noise_std: f64,
    rotation: Option<Mat>,
}

impl QuadraticProblem {
    pub fn new(eigs: Vec<f64>, theta_star: ParamVector, noise_std: f64) -> Result<Self> {
        if eigs.is_empty() {
            return Err(IgtError::InvalidParameter("empty spectrum".into()));
        }
        if eigs.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return Err(IgtError::InvalidParameter(
                "all Hessian eigenvalues must be positive".into(),
            ));
        }
        if eigs.len() != theta_star.dim() {
            return Err(IgtError::DimensionMismatch {
                expected: eigs.len(),
                got: theta_star.dim(),
            });
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(IgtError::InvalidParameter(format!(
                "noise std must be >= 0, got {noise_std}"
            )));
        }
        Ok(Self {
            eigs,
            theta_star,
            noise_std,
            rotation: None,
        })
    }

    /// Conjugates the Hessian by a random orthogonal matrix drawn from
    /// `seed`. The spectrum, optimum, and noise level are unchanged.
    pub fn with_random_rotation(mut self, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        self.rotation = Some(Mat::random_orthogonal(self.dim(), &mut rng));
        self
    }

    pub fn dim(&self) -> usize {
        self.eigs.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }

    /// Largest Hessian eigenvalue `L`.
    pub fn lipschitz(&self) -> f64 {
        self.eigs.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn condition_number(&self) -> f64 {
        let min = self.eigs.iter().cloned().fold(f64::MAX, f64::min);
        self.lipschitz() / min
    }

    pub fn theta_star(&self) -> &ParamVector {
        &self.theta_star
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// `g(θ) = H (θ − θ*)`.
    pub fn true_gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.theta_star.check_dim(theta)?;
        let delta = theta.sub(&self.theta_star)?;
        match &self.rotation {
            None => ParamVector::from_fn(self.dim(), |i| self.eigs[i] * delta[i]),
            Some(u) => {
                // H = U diag(eigs) Uᵀ
                let mut w = u.transpose_matvec(delta.as_slice());
                for (wi, h) in w.iter_mut().zip(&self.eigs) {
                    *wi *= h;
                }
                ParamVector::new(u.matvec(&w)?)
            }
        }
    }

    /// `g(θ) + ε` with `ε ~ N(0, σ² I)` drawn from `rng`; returns the
    /// gradient and the noise vector so callers can record it for replay.
    pub fn stochastic_gradient(
        &self,
        theta: &ParamVector,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ParamVector, Vec<f64>)> {
        let g = self.true_gradient(theta)?;
        let noise: Vec<f64> = (0..self.dim())
            .map(|_| self.noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let sample = ParamVector::from_fn(self.dim(), |i| g[i] + noise[i])?;
        Ok((sample, noise))
    }

    /// `f(θ) − f(θ*) = ½ Σ h_i δ_i²` in the diagonal frame.
    pub fn suboptimality(&self, theta: &ParamVector) -> Result<f64> {
        let delta = theta.sub(&self.theta_star)?;
        match &self.rotation {
            None => Ok(0.5
                * delta
                    .iter()
                    .zip(&self.eigs)
                    .map(|(d, h)| h * d * d)
                    .sum::<f64>()),
            Some(u) => {
                let w = u.transpose_matvec(delta.as_slice());
                Ok(0.5 * w.iter().zip(&self.eigs).map(|(d, h)| h * d * d).sum::<f64>())
            }
        }
    }
}

/// Eigenvalues geometrically spaced from `L/κ` to `L`, endpoints exact.
pub fn geometric_spectrum(d: usize, kappa: f64, l: f64) -> Result<Vec<f64>> {
    if d < 1 {
        return Err(IgtError::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(kappa >= 1.0) {
        return Err(IgtError::InvalidParameter(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if !(l > 0.0) {
        return Err(IgtError::InvalidParameter(format!(
            "largest eigenvalue must be positive, got {l}"
        )));
    }
    if d == 1 && kappa != 1.0 {
        return Err(IgtError::InvalidParameter(
            "a 1-d spectrum cannot carry a condition number > 1".into(),
        ));
    }
    let mut eigs = vec![0.0; d];
    for (i, e) in eigs.iter_mut().enumerate() {
        let u = if d == 1 { 1.0 } else { i as f64 / (d - 1) as f64 };
        *e = (l / kappa) * kappa.powf(u);
    }
    eigs[0] = l / kappa;
    eigs[d - 1] = l;
    Ok(eigs)
}

/// Builds the standard test problem: eigenvalues geometrically spaced from
/// `L/κ` to `L` with exact endpoints, optimum drawn standard normal from
/// `seed`. Deterministic per seed.
pub fn make_quadratic(
    d: usize,
    kappa: f64,
    l: f64,
    noise_std: f64,
    seed: u64,
) -> Result<QuadraticProblem> {
    let eigs = geometric_spectrum(d, kappa, l)?;
    let mut rng = seeded_rng(seed);
    let theta_star = ParamVector::new(standard_normal_vec(&mut rng, d))?;
    QuadraticProblem::new(eigs, theta_star, noise_std)
}

/// Stochastic oracle over a quadratic problem, optionally recording every
/// noise vector for exact replay.
pub struct QuadraticOracle<'a> {
    problem: &'a QuadraticProblem,
    rng: ChaCha8Rng,
    log: Option<Vec<Vec<f64>>>,
}

impl<'a> QuadraticOracle<'a> {
    pub fn new(problem: &'a QuadraticProblem, rng: ChaCha8Rng) -> Self {
        Self {
            problem,
            rng,
            log: None,
        }
    }

    pub fn recording(problem: &'a QuadraticProblem, rng: ChaCha8Rng) -> Self {
        Self {
            problem,
            rng,
            log: Some(Vec::new()),
        }
    }

    pub fn recorded_noise(&self) -> &[Vec<f64>] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn into_recorded_noise(self) -> Vec<Vec<f64>> {
        self.log.unwrap_or_default()
    }
}

impl GradientOracle for QuadraticOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let (sample, noise) = self.problem.stochastic_gradient(query.point(), &mut self.rng)?;
        if let Some(log) = &mut self.log {
            log.push(noise);
        }
        GradientSample::measured_at(query, sample)
    }
}

/// Replays a recorded noise sequence against the true gradient; the noise is
/// point-independent, so two algorithms replaying the same log see identical
/// stochastic gradients.
pub struct ReplayOracle<'a> {
    problem: &'a QuadraticProblem,
    noises: &'a [Vec<f64>],
    cursor: usize,
}

impl<'a> ReplayOracle<'a> {
    pub fn new(problem: &'a QuadraticProblem, noises: &'a [Vec<f64>]) -> Self {
        Self {
            problem,
            noises,
            cursor: 0,
        }
    }
}

impl GradientOracle for ReplayOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let noise = self.noises.get(self.cursor).ok_or_else(|| {
            IgtError::InvalidParameter(format!(
                "replay exhausted after {} samples",
                self.noises.len()
            ))
        })?;
        self.cursor += 1;
        let g = self.problem.true_gradient(query.point())?;
        let sample = ParamVector::from_fn(g.dim(), |i| g[i] + noise[i])?;
        GradientSample::measured_at(query, sample)
    }
}

/// Noiseless oracle: returns the true gradient at the query point.
pub struct NoiselessOracle<'a> {
    problem: &'a QuadraticProblem,
}

impl<'a> NoiselessOracle<'a> {
    pub fn new(problem: &'a QuadraticProblem) -> Self {
        Self { problem }
    }
}

impl GradientOracle for NoiselessOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let g = self.problem.true_gradient(query.point())?;
        GradientSample::measured_at(query, g)
    }
}

// ---------------------------------------------------------------------------
// Noise-propagation coefficients
// ---------------------------------------------------------------------------

/// Scalar coefficients `N_{i,t}`: the weight with which the noise injected at
/// step `i` appears in the deviation of iterate `t` from its mean,
/// `Δ_t − E[Δ_t] = −α Σ_i N_{i,t} ε_i`, along one eigendirection.
#[derive(Debug, Clone)]
pub struct NoiseCoefficients {
    t_max: usize,
    /// `values[i][t]` for `0 ≤ i ≤ t_max`, `0 ≤ t ≤ t_max`.
    values: Vec<Vec<f64>>,
}

impl NoiseCoefficients {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i][t]
    }

    /// The full series `N_{i,·}` for one injection index.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// `Σ_i N_{i,t}²` for each `t`.
    pub fn total_squared(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.t_max + 1];
        for row in &self.values {
            for (t, n) in row.iter().enumerate() {
                totals[t] += n * n;
            }
        }
        totals
    }
}

/// The IGT noise-coefficient recursion along an eigendirection with curvature
/// `h`: `N_{i,0} = 0`, `N_{i,t} = (1 − αh) N_{i,t−1} + 1_{i<t} (1/t)`.
pub fn igt_noise_coeffs(alpha: f64, h: f64, t_max: usize) -> NoiseCoefficients {
    let r = 1.0 - alpha * h;
    let mut values = Vec::with_capacity(t_max + 1);
    for i in 0..=t_max {
        let mut row = vec![0.0; t_max + 1];
        for t in (i + 1)..=t_max {
            row[t] = r * row[t - 1] + 1.0 / t as f64;
        }
        values.push(row);
    }
    NoiseCoefficients { t_max, values }
}

/// Methods whose per-noise impact can be measured by impulse simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpulseMethod {
    Sgd,
    MomentumFixed(f64),
    /// Increasing momentum `γ_t = 1 − 1/t` without transport.
    MomentumIncreasing,
    Igt,
}

/// Empirical `N_{i,·}`: simulates the scalar iteration from `Δ_0 = 0` with a
/// unit noise injected only at step `i`, and returns `|Δ_t − E[Δ_t]|/α` per
/// step (the noiseless path from `Δ_0 = 0` stays at zero, so this is
/// `|Δ_t|/α`).
pub fn impulse_response(
    method: ImpulseMethod,
    alpha: f64,
    h: f64,
    i: usize,
    t_max: usize,
) -> Result<Vec<f64>> {
    if i >= t_max {
        return Err(IgtError::InvalidParameter(format!(
            "impulse index {i} must be < horizon {t_max}"
        )));
    }
    let mut out = vec![0.0; t_max + 1];
    let eps = |t: usize| if t == i { 1.0 } else { 0.0 };
    match method {
        ImpulseMethod::Sgd => {
            let mut delta: f64 = 0.0;
            for t in 0..t_max {
                out[t] = delta.abs() / alpha;
                delta -= alpha * (h * delta + eps(t));
            }
            out[t_max] = delta.abs() / alpha;
        }
        ImpulseMethod::MomentumFixed(gamma) => {
            let mut delta: f64 = 0.0;
            let mut v: f64 = 0.0;
            for t in 0..t_max {
                out[t] = delta.abs() / alpha;
                let g = h * delta + eps(t);
                v = if t == 0 { g } else { gamma * v + (1.0 - gamma) * g };
                delta -= alpha * v;
            }
            out[t_max] = delta.abs() / alpha;
        }
        ImpulseMethod::MomentumIncreasing => {
            let mut delta: f64 = 0.0;
            let mut v: f64 = 0.0;
            for t in 0..t_max {
                out[t] = delta.abs() / alpha;
                let g = h * delta + eps(t);
                let gamma = if t == 0 { 0.0 } else { 1.0 - 1.0 / t as f64 };
                v = if t == 0 { g } else { gamma * v + (1.0 - gamma) * g };
                delta -= alpha * v;
            }
            out[t_max] = delta.abs() / alpha;
        }
        ImpulseMethod::Igt => {
            let mut delta: f64 = 0.0;
            let mut delta_prev: f64 = 0.0;
            let mut v: f64 = 0.0;
            for t in 0..t_max {
                out[t] = delta.abs() / alpha;
                let shifted = delta + t as f64 * (delta - delta_prev);
                let g = h * shifted + eps(t);
                let gamma = t as f64 / (t + 1) as f64;
                v = if t == 0 { g } else { gamma * v + (1.0 - gamma) * g };
                delta_prev = delta;
                delta -= alpha * v;
            }
            out[t_max] = delta.abs() / alpha;
        }
    }
    Ok(out)
}

/// `Σ_i N_{i,t}²` per step for the given method, summing impulse responses
/// over every injection index.
pub fn total_noise_squared(
    method: ImpulseMethod,
    alpha: f64,
    h: f64,
    t_max: usize,
) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; t_max + 1];
    for i in 0..t_max {
        let resp = impulse_response(method, alpha, h, i, t_max)?;
        for (t, n) in resp.iter().enumerate() {
            totals[t] += n * n;
        }
    }
    Ok(totals)
}

// ---------------------------------------------------------------------------
// Heavyball-IGT dynamics matrices
// ---------------------------------------------------------------------------

/// `A = [[1 − αh + μ, −μ], [1, 0]]`, governing the mean error
/// `(E[θ_t − θ*], E[θ_{t−1} − θ*])` along an eigendirection.
pub fn bias_matrix(alpha: f64, mu: f64, h: f64) -> [[f64; 2]; 2] {
    [[1.0 - alpha * h + mu, -mu], [1.0, 0.0]]
}

/// The 3×3 matrix driving `(U_{t+1}, U_t, V_{t+1})` where `U` is the iterate
/// variance and `V` the lag-1 covariance along an eigendirection.
pub fn variance_matrix(alpha: f64, mu: f64, h: f64) -> [[f64; 3]; 3] {
    let a = 1.0 - alpha * h + mu;
    [
        [a * a + 2.0 * alpha * alpha * h * h, mu * mu, -2.0 * mu * a * a],
        [1.0, 0.0, 0.0],
        [a, 0.0, -mu],
    ]
}

/// Bias and variance dynamics for one eigendirection.
#[derive(Debug, Clone)]
pub struct DynamicsMatrices {
    pub a: [[f64; 2]; 2],
    pub d: [[f64; 3]; 3],
    pub h: f64,
    pub alpha: f64,
    pub mu: f64,
}

pub fn dynamics_matrices(alpha: f64, mu: f64, h: f64) -> DynamicsMatrices {
    DynamicsMatrices {
        a: bias_matrix(alpha, mu, h),
        d: variance_matrix(alpha, mu, h),
        h,
        alpha,
        mu,
    }
}

/// Spectral radius of a 2×2 matrix via its characteristic quadratic.
pub fn spectral_radius2(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        det.sqrt()
    }
}

/// Spectral radius of a 3×3 matrix via closed-form cubic roots.
pub fn spectral_radius3(m: &[[f64; 3]; 3]) -> f64 {
    // Characteristic polynomial λ³ − c2 λ² + c1 λ − c0.
    let c2 = m[0][0] + m[1][1] + m[2][2];
    let c1 = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let c0 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);

    // Depressed cubic x³ + p x + q with λ = x + c2/3.
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = -2.0 * c2 * c2 * c2 / 27.0 + c1 * c2 / 3.0 - c0;
    let discr = -4.0 * p * p * p - 27.0 * q * q;

    if discr >= 0.0 {
        // Three real roots (trigonometric form).
        if p >= 0.0 {
            // Only possible with p = q = 0: triple root at the shift.
            return shift.abs();
        }
        let rho = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
        let phi = arg.clamp(-1.0, 1.0).acos();
        let mut radius: f64 = 0.0;
        for k in 0..3 {
            let x = rho * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            radius = radius.max((x + shift).abs());
        }
        radius
    } else {
        // One real root (Cardano, cancellation-safe) plus a complex pair.
        let rad = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = if q <= 0.0 {
            (-q / 2.0 + rad).cbrt()
        } else {
            (-q / 2.0 - rad).cbrt()
        };
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let real_root = u + v + shift;
        // Deflate: λ² + q1 λ + q0 holds the remaining pair.
        let q1 = real_root - c2;
        let q0 = c1 + real_root * q1;
        let disc2 = q1 * q1 - 4.0 * q0;
        let pair_radius = if disc2 < 0.0 {
            q0.sqrt()
        } else {
            let s = disc2.sqrt();
            ((-q1 + s) / 2.0).abs().max(((-q1 - s) / 2.0).abs())
        };
        real_root.abs().max(pair_radius)
    }
}

/// The convergence bound for the plain IGT recursion at stepsize `α`:
/// `(1 − 1/κ)^{2t} Δ₀² + d α² B ν̄₀² / t` with `ν̄₀ = (2 + 2 log κ) κ`.
/// Valid for `t > 2κ`.
pub fn igt_error_bound(
    alpha: f64,
    kappa: f64,
    d: usize,
    b_noise: f64,
    delta0_sq: f64,
    t: u64,
) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(IgtError::InvalidParameter(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if (t as f64) <= 2.0 * kappa {
        return Err(IgtError::InvalidParameter(format!(
            "bound is valid for t > 2*kappa; got t = {t}, kappa = {kappa}"
        )));
    }
    let nu0 = (2.0 + 2.0 * kappa.ln()) * kappa;
    let bias = (1.0 - 1.0 / kappa).powi(2 * t as i32) * delta0_sq;
    let variance = d as f64 * alpha * alpha * b_noise * nu0 * nu0 / t as f64;
    Ok(bias + variance)
}

/// One row of a stability sweep over heavy-ball momentum values.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub mu: f64,
    pub rho_a_max: f64,
    pub rho_d_max: f64,
    pub stable: bool,
}

/// Evaluates `max_h ρ(A)` and `max_h ρ(D)` over the spectrum for each
/// candidate momentum.
pub fn stability_sweep(alpha: f64, eigs: &[f64], mu_grid: &[f64]) -> Vec<SweepRow> {
    mu_grid
        .iter()
        .map(|&mu| {
            let mut rho_a_max: f64 = 0.0;
            let mut rho_d_max: f64 = 0.0;
            for &h in eigs {
                rho_a_max = rho_a_max.max(spectral_radius2(&bias_matrix(alpha, mu, h)));
                rho_d_max = rho_d_max.max(spectral_radius3(&variance_matrix(alpha, mu, h)));
            }
            SweepRow {
                mu,
                rho_a_max,
                rho_d_max,
                stable: rho_a_max < 1.0 && rho_d_max < 1.0,
            }
        })
        .collect()
}

/// The largest strictly positive momentum in the grid for which both
/// dynamics are stable across the whole spectrum.
pub fn stable_momentum_sweep(alpha: f64, eigs: &[f64], mu_grid: &[f64]) -> Option<SweepRow> {
    stability_sweep(alpha, eigs, mu_grid)
        .into_iter()
        .filter(|row| row.stable && row.mu > 0.0)
        .max_by(|a, b| a.mu.total_cmp(&b.mu))
}
