//! Parameter-update rules composed with a gradient estimator.
//!
//! An [`Optimizer`] owns an [`EstimatorState`] and an update rule. One step
//! runs the full two-phase protocol: ask the estimator where to measure,
//! evaluate the oracle there, fold the sample into the velocity, then move
//! the parameters. The named constructors cover the compositions used
//! throughout: plain SGD, heavy ball, Heavyball-IGT, Adam, and Adam-ITA.

use crate::error::{IgtError, Result};
use crate::estimators::{
    EstimatorKind, EstimatorState, GradientSample, QueryPoint, QueryToken,
    transport_with_multiplier,
};
use crate::vector::ParamVector;

/// A stochastic first-order oracle that evaluates `g(·, x_t)` at exactly the
/// point requested.
pub trait GradientOracle {
    fn dim(&self) -> usize;

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample>;
}

/// Wraps a closure as an oracle; handy for tests and bindings.
pub struct FnOracle<F: FnMut(&ParamVector) -> Vec<f64>> {
    f: F,
    dim: usize,
}

impl<F: FnMut(&ParamVector) -> Vec<f64>> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { f, dim }
    }
}

impl<F: FnMut(&ParamVector) -> Vec<f64>> GradientOracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&mut self, query: &QueryPoint) -> Result<GradientSample> {
        let values = ParamVector::new((self.f)(query.point()))?;
        GradientSample::measured_at(query, values)
    }
}

#[derive(Debug, Clone)]
enum UpdateRule {
    /// θ ← θ − α v
    Descent,
    /// w ← μ w − α v; θ ← θ + w
    HeavyBall { mu: f64, w: Option<ParamVector> },
    /// Standard Adam moments applied to the estimator output.
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Option<ParamVector>,
        s: Option<ParamVector>,
        steps: u64,
    },
}

/// An update rule plus its embedded gradient estimator.
#[derive(Debug, Clone)]
pub struct Optimizer {
    alpha: f64,
    rule: UpdateRule,
    estimator: EstimatorState,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(IgtError::InvalidParameter(format!(
            "stepsize must be finite and positive, got {alpha}"
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu) {
        return Err(IgtError::InvalidParameter(format!(
            "heavy-ball momentum must lie in [0, 1), got {mu}"
        )));
    }
    Ok(())
}

impl Optimizer {
    fn compose(alpha: f64, rule: UpdateRule, kind: EstimatorKind) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            rule,
            estimator: EstimatorState::new(kind)?,
        })
    }

    /// θ ← θ − α g with the raw stochastic gradient.
    pub fn sgd(alpha: f64) -> Result<Self> {
        Self::compose(alpha, UpdateRule::Descent, EstimatorKind::Sgd)
    }

    /// Plain descent on the IGT velocity; equivalent to the two-term
    /// recursion of [`igt_direct_step`].
    pub fn igt(alpha: f64) -> Result<Self> {
        Self::compose(alpha, UpdateRule::Descent, EstimatorKind::Igt)
    }

    /// Plain descent on the anytime-tail-averaged velocity.
    pub fn ita(alpha: f64, tail_fraction: f64) -> Result<Self> {
        Self::compose(
            alpha,
            UpdateRule::Descent,
            EstimatorKind::Ita { tail_fraction },
        )
    }

    /// Descent on a fixed-γ averaged velocity (the convex-combination form
    /// of momentum, exercised as an estimator).
    pub fn momentum_descent(alpha: f64, gamma: f64) -> Result<Self> {
        Self::compose(alpha, UpdateRule::Descent, EstimatorKind::Momentum { gamma })
    }

    /// Displacement-form heavy ball on the raw gradient:
    /// `w ← μ w − α g`, `θ ← θ + w`.
    pub fn heavy_ball(alpha: f64, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Self::compose(alpha, UpdateRule::HeavyBall { mu, w: None }, EstimatorKind::Sgd)
    }

    /// Heavy ball driven by the IGT velocity. The first step initializes
    /// `w_0 = −α v_0`, `θ_1 = θ_0 + w_0`.
    pub fn heavyball_igt(alpha: f64, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Self::compose(alpha, UpdateRule::HeavyBall { mu, w: None }, EstimatorKind::Igt)
    }

    /// Heavy ball driven by the tail-averaged velocity.
    pub fn heavyball_ita(alpha: f64, mu: f64, tail_fraction: f64) -> Result<Self> {
        check_mu(mu)?;
        Self::compose(
            alpha,
            UpdateRule::HeavyBall { mu, w: None },
            EstimatorKind::Ita { tail_fraction },
        )
    }

    /// Adam with the default constants β₁ = 0.9, β₂ = 0.999, ε = 1e−8.
    pub fn adam(alpha: f64) -> Result<Self> {
        Self::adam_with(alpha, 0.9, 0.999, 1e-8)
    }

    pub fn adam_with(alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(IgtError::InvalidParameter(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(eps > 0.0) {
            return Err(IgtError::InvalidParameter(format!(
                "adam eps must be positive, got {eps}"
            )));
        }
        Self::compose(
            alpha,
            UpdateRule::Adam {
                beta1,
                beta2,
                eps,
                m: None,
                s: None,
                steps: 0,
            },
            EstimatorKind::Sgd,
        )
    }

    /// Adam on the tail-averaged velocity. `eps` is exposed because a larger
    /// value (e.g. 0.01) is appropriate once the velocity variance is small.
    pub fn adam_ita(alpha: f64, tail_fraction: f64, eps: f64) -> Result<Self> {
        let base = Self::adam_with(alpha, 0.9, 0.999, eps)?;
        Ok(Self {
            estimator: EstimatorState::new(EstimatorKind::Ita { tail_fraction })?,
            ..base
        })
    }

    /// Rebuilds a heavy-ball optimizer mid-run from checkpointed state.
    pub fn resume_heavy_ball(
        alpha: f64,
        mu: f64,
        w: ParamVector,
        estimator: EstimatorState,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_mu(mu)?;
        Ok(Self {
            alpha,
            rule: UpdateRule::HeavyBall { mu, w: Some(w) },
            estimator,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    /// Heavy-ball displacement `w_t`, if this optimizer has one.
    pub fn displacement(&self) -> Option<&ParamVector> {
        match &self.rule {
            UpdateRule::HeavyBall { w, .. } => w.as_ref(),
            _ => None,
        }
    }

    /// Runs one full step: query → oracle → velocity → parameter update.
    /// Returns `(θ_next, v_t)`.
    pub fn step(
        &mut self,
        theta: &ParamVector,
        oracle: &mut dyn GradientOracle,
    ) -> Result<(ParamVector, ParamVector)> {
        let query = self.estimator.query(theta)?;
        let sample = oracle.gradient(&query)?;
        let v = self.estimator.update(theta, &sample)?;
        let next = match &mut self.rule {
            UpdateRule::Descent => theta.axpy(-self.alpha, &v)?,
            UpdateRule::HeavyBall { mu, w } => {
                let w_prev = w.take().unwrap_or_else(|| ParamVector::zeros(v.dim()));
                let w_new = w_prev.scale(*mu).axpy(-self.alpha, &v)?;
                let next = theta.add(&w_new)?;
                *w = Some(w_new);
                next
            }
            UpdateRule::Adam {
                beta1,
                beta2,
                eps,
                m,
                s,
                steps,
            } => {
                *steps += 1;
                let m_prev = m.take().unwrap_or_else(|| ParamVector::zeros(v.dim()));
                let s_prev = s.take().unwrap_or_else(|| ParamVector::zeros(v.dim()));
                let m_new = m_prev.scale(*beta1).axpy(1.0 - *beta1, &v)?;
                let v_sq = ParamVector::from_fn(v.dim(), |i| v[i] * v[i])?;
                let s_new = s_prev.scale(*beta2).axpy(1.0 - *beta2, &v_sq)?;
                let bc1 = 1.0 - beta1.powi(*steps as i32);
                let bc2 = 1.0 - beta2.powi(*steps as i32);
                let next = ParamVector::from_fn(v.dim(), |i| {
                    let m_hat = m_new[i] / bc1;
                    let s_hat = s_new[i] / bc2;
                    theta[i] - self.alpha * m_hat / (s_hat.sqrt() + *eps)
                })?;
                *m = Some(m_new);
                *s = Some(s_new);
                next
            }
        };
        if !next.is_finite() {
            return Err(IgtError::NonFinite {
                context: "Optimizer::step".into(),
            });
        }
        Ok((next, v))
    }

    /// Adam moment accumulators `(m, s)`, if this is an Adam variant.
    pub fn adam_moments(&self) -> Option<(&ParamVector, &ParamVector)> {
        match &self.rule {
            UpdateRule::Adam { m: Some(m), s: Some(s), .. } => Some((m, s)),
            _ => None,
        }
    }
}

/// One step of the two-term IGT recursion that eliminates the velocity:
///
/// ```text
/// θ_{t+1} = ((2t+1)/(t+1)) θ_t − (t/(t+1)) θ_{t−1}
///           − (α/(t+1)) g(θ_t + t (θ_t − θ_{t−1}), x_t)
/// ```
///
/// Valid for `t ≥ 1`; at `t = 0` the caller takes `θ_1 = θ_0 − α g(θ_0, x_0)`.
pub fn igt_direct_step(
    theta_t: &ParamVector,
    theta_prev: &ParamVector,
    t: u64,
    alpha: f64,
    oracle: &mut dyn GradientOracle,
) -> Result<ParamVector> {
    if t == 0 {
        return Err(IgtError::InvalidParameter(
            "igt_direct_step requires t >= 1; seed with theta_1 = theta_0 - alpha g(theta_0)".into(),
        ));
    }
    theta_t.check_dim(theta_prev)?;
    let shifted = transport_with_multiplier(theta_t, theta_prev, t as f64)?;
    let query = QueryPoint::new(shifted, QueryToken::for_step(t));
    let g = oracle.gradient(&query)?;
    let tf = t as f64;
    let next = ParamVector::from_fn(theta_t.dim(), |i| {
        (2.0 * tf + 1.0) / (tf + 1.0) * theta_t[i] - tf / (tf + 1.0) * theta_prev[i]
            - alpha / (tf + 1.0) * g.values()[i]
    })?;
    Ok(next)
}

/// The known optimal heavy-ball tuning for a quadratic with largest
/// eigenvalue `l` and condition number `kappa`:
/// `μ = ((√κ−1)/(√κ+1))²`, `α = (1+√μ)²/L`.
pub fn optimal_hb_tuning(l: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(l > 0.0) {
        return Err(IgtError::InvalidParameter(format!(
            "largest eigenvalue must be positive, got {l}"
        )));
    }
    if !(kappa >= 1.0) {
        return Err(IgtError::InvalidParameter(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    let sk = kappa.sqrt();
    let mu = ((sk - 1.0) / (sk + 1.0)).powi(2);
    let alpha = (1.0 + mu.sqrt()).powi(2) / l;
    Ok((alpha, mu))
}
