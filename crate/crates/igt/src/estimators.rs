//! Gradient estimators with a two-phase query/update protocol.
//!
//! Each estimator first *proposes* a query point — possibly extrapolated ahead
//! of the current iterate — and then *folds* the stochastic gradient measured
//! there into a running velocity:
//!
//! ```text
//! v_t = γ_t v_{t−1} + (1 − γ_t) g(query_t, x_t)
//! ```
//!
//! With the increasing schedule `γ_t = t/(t+1)` and the query point
//! `θ_t + t (θ_t − θ_{t−1})`, the velocity equals the uniform average of all
//! past gradients transported to the current iterate; on an equal-Hessian
//! quadratic this makes `v_t = g(θ_t) + mean(ε_0..ε_t)` exactly.
//!
//! Correctness hinges on the gradient really being measured at the proposed
//! point, so [`EstimatorState::query`] hands out an opaque step token and
//! [`EstimatorState::update`] rejects samples whose token does not match.

use crate::error::{IgtError, Result};
use crate::vector::ParamVector;

/// Which averaging scheme the estimator runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Raw stochastic gradient: `v_t = g_t`.
    Sgd,
    /// Fixed-weight averaging, `v_t = γ v_{t−1} + (1 − γ) g_t`, no transport.
    Momentum { gamma: f64 },
    /// Increasing momentum `t/(t+1)` with implicit transport.
    Igt,
    /// IGT weights replaced by anytime tail averaging over the most recent
    /// fraction `tail_fraction` of samples.
    Ita { tail_fraction: f64 },
}

/// Opaque tag binding a gradient sample to the estimator step that asked for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryToken {
    step: u64,
}

impl QueryToken {
    pub(crate) fn for_step(step: u64) -> Self {
        Self { step }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// The point at which the oracle must evaluate the next gradient.
#[derive(Debug, Clone)]
pub struct QueryPoint {
    point: ParamVector,
    token: QueryToken,
}

impl QueryPoint {
    pub(crate) fn new(point: ParamVector, token: QueryToken) -> Self {
        Self { point, token }
    }

    pub fn point(&self) -> &ParamVector {
        &self.point
    }

    pub fn token(&self) -> QueryToken {
        self.token
    }
}

/// A stochastic gradient together with the point it was evaluated at.
#[derive(Debug, Clone)]
pub struct GradientSample {
    values: ParamVector,
    query_point: ParamVector,
    token: QueryToken,
}

impl GradientSample {
    /// Tags `values` as having been measured at `query`.
    pub fn measured_at(query: &QueryPoint, values: ParamVector) -> Result<Self> {
        query.point().check_dim(&values)?;
        if !values.is_finite() {
            return Err(IgtError::NonFinite {
                context: "GradientSample::measured_at".into(),
            });
        }
        Ok(Self {
            values,
            query_point: query.point().clone(),
            token: query.token(),
        })
    }

    pub fn values(&self) -> &ParamVector {
        &self.values
    }

    pub fn query_point(&self) -> &ParamVector {
        &self.query_point
    }

    pub fn token(&self) -> QueryToken {
        self.token
    }
}

/// The increasing IGT momentum schedule `γ_t = t/(t+1)`.
///
/// `γ_0 = 0` (the first sample gets full weight) and `γ_t → 1`, which makes
/// the velocity a uniform average of all transported gradients.
pub fn igt_gamma(t: u64) -> f64 {
    t as f64 / (t + 1) as f64
}

/// The anytime-tail-averaging weight for step `t ≥ 1` and tail fraction
/// `c ∈ (0, 1]`:
///
/// ```text
/// γ_t = c(t−1)/(1 + c(t−1)) · (1 − (1/c)√((1−c)/(t(t−1))))
/// ```
///
/// `γ_1 = 0` by continuity (the bracket's limit as t→1⁺ is −∞ scaled by a
/// vanishing prefactor; the product limit is 0, so the first sample restarts
/// the average). A negative bracket at small `t` clamps to 0 for the same
/// reason: a zero weight means "restart the tail here". `c = 1` recovers the
/// uniform average `γ_t = (t−1)/t`.
pub fn ata_gamma(t: u64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(IgtError::InvalidParameter(format!(
            "tail fraction must lie in (0, 1], got {c}"
        )));
    }
    if t == 0 {
        return Err(IgtError::InvalidParameter(
            "ata_gamma is defined for steps t >= 1".into(),
        ));
    }
    if t == 1 {
        return Ok(0.0);
    }
    let tf = t as f64;
    let prefactor = c * (tf - 1.0) / (1.0 + c * (tf - 1.0));
    let bracket = 1.0 - (1.0 / c) * ((1.0 - c) / (tf * (tf - 1.0))).sqrt();
    Ok(prefactor * bracket.max(0.0))
}

/// Extrapolates `θ_t + (γ/(1−γ)) (θ_t − θ_prev)`.
pub fn transport_point(
    theta_t: &ParamVector,
    theta_prev: &ParamVector,
    gamma: f64,
) -> Result<ParamVector> {
    if !(gamma < 1.0) {
        return Err(IgtError::InvalidParameter(format!(
            "transport requires gamma < 1, got {gamma}"
        )));
    }
    transport_with_multiplier(theta_t, theta_prev, gamma / (1.0 - gamma))
}

/// Extrapolates `θ_t + m (θ_t − θ_prev)` with an explicit multiplier.
///
/// For IGT the multiplier at step `t` is the integer `t` itself; using it
/// directly keeps the extrapolation bit-exact instead of round-tripping
/// through `γ/(1−γ)`.
pub fn transport_with_multiplier(
    theta_t: &ParamVector,
    theta_prev: &ParamVector,
    multiplier: f64,
) -> Result<ParamVector> {
    theta_t.check_dim(theta_prev)?;
    let shifted = theta_t.axpy(multiplier, &theta_t.sub(theta_prev)?)?;
    if !shifted.is_finite() {
        return Err(IgtError::NonFinite {
            context: "transport_point".into(),
        });
    }
    Ok(shifted)
}

/// Running state of a gradient estimator.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    kind: EstimatorKind,
    t: u64,
    v: Option<ParamVector>,
    theta_prev: Option<ParamVector>,
}

impl EstimatorState {
    pub fn new(kind: EstimatorKind) -> Result<Self> {
        match kind {
            EstimatorKind::Momentum { gamma } if !(0.0..1.0).contains(&gamma) => {
                return Err(IgtError::InvalidParameter(format!(
                    "momentum gamma must lie in [0, 1), got {gamma}"
                )));
            }
            EstimatorKind::Ita { tail_fraction } if !(tail_fraction > 0.0 && tail_fraction <= 1.0) => {
                return Err(IgtError::InvalidParameter(format!(
                    "tail fraction must lie in (0, 1], got {tail_fraction}"
                )));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            t: 0,
            v: None,
            theta_prev: None,
        })
    }

    /// Rebuilds mid-run state, e.g. from a checkpoint.
    pub fn resume(
        kind: EstimatorKind,
        t: u64,
        v: ParamVector,
        theta_prev: ParamVector,
    ) -> Result<Self> {
        let mut state = Self::new(kind)?;
        v.check_dim(&theta_prev)?;
        state.t = t;
        state.v = Some(v);
        state.theta_prev = Some(theta_prev);
        Ok(state)
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Number of updates folded in so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Current gradient estimate, `None` before the first update.
    pub fn velocity(&self) -> Option<&ParamVector> {
        self.v.as_ref()
    }

    pub fn theta_prev(&self) -> Option<&ParamVector> {
        self.theta_prev.as_ref()
    }

    /// The averaging weight this estimator applies at step `t`.
    pub fn gamma_at(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Ok(0.0);
        }
        match self.kind {
            EstimatorKind::Sgd => Ok(0.0),
            EstimatorKind::Momentum { gamma } => Ok(gamma),
            EstimatorKind::Igt => Ok(igt_gamma(t)),
            EstimatorKind::Ita { tail_fraction } => ata_gamma(t, tail_fraction),
        }
    }

    /// Proposes the point at which the next gradient must be measured.
    ///
    /// SGD and fixed momentum query the iterate itself. IGT queries
    /// `θ_t + t (θ_t − θ_{t−1})`; ITA uses its own weight in the multiplier
    /// `γ/(1−γ)`. At `t = 0` every kind queries `θ_t`.
    pub fn query(&self, theta_t: &ParamVector) -> Result<QueryPoint> {
        if let Some(prev) = &self.theta_prev {
            prev.check_dim(theta_t)?;
        }
        let token = QueryToken::for_step(self.t);
        let point = match self.kind {
            EstimatorKind::Sgd | EstimatorKind::Momentum { .. } => theta_t.clone(),
            EstimatorKind::Igt => match &self.theta_prev {
                Some(prev) if self.t > 0 => {
                    transport_with_multiplier(theta_t, prev, self.t as f64)?
                }
                _ => theta_t.clone(),
            },
            EstimatorKind::Ita { .. } => match &self.theta_prev {
                Some(prev) if self.t > 0 => {
                    let gamma = self.gamma_at(self.t)?;
                    if gamma == 0.0 {
                        theta_t.clone()
                    } else {
                        transport_point(theta_t, prev, gamma)?
                    }
                }
                _ => theta_t.clone(),
            },
        };
        Ok(QueryPoint::new(point, token))
    }

    /// Folds a measured gradient into the velocity and returns `v_t`.
    ///
    /// The sample must carry the token issued by [`query`](Self::query) for
    /// the current step; anything else is a contract violation and fails
    /// loudly, because a gradient taken at the wrong point silently destroys
    /// the transport identity.
    pub fn update(&mut self, theta_t: &ParamVector, grad: &GradientSample) -> Result<ParamVector> {
        let expected = QueryToken::for_step(self.t);
        if grad.token() != expected {
            return Err(IgtError::QueryContract {
                expected: expected.step(),
                got: grad.token().step(),
            });
        }
        theta_t.check_dim(grad.values())?;
        let gamma = self.gamma_at(self.t)?;
        let v_new = match &self.v {
            // A zero weight takes the sample verbatim (SGD always; the other
            // kinds when the schedule restarts the average).
            Some(v) if self.t > 0 && gamma > 0.0 => {
                // v + (1−γ)(g − v): keeps v fixed bit-for-bit when g == v.
                v.axpy(1.0 - gamma, &grad.values().sub(v)?)?
            }
            _ => grad.values().clone(),
        };
        if !v_new.is_finite() {
            return Err(IgtError::NonFinite {
                context: "EstimatorState::update".into(),
            });
        }
        self.theta_prev = Some(theta_t.clone());
        self.v = Some(v_new.clone());
        self.t += 1;
        Ok(v_new)
    }
}
