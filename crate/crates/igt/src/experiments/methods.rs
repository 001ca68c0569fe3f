//! Method-name parsing shared by the CLI and the runners.

use crate::error::{IgtError, Result};
use crate::optimizers::Optimizer;
use crate::quadratic::ImpulseMethod;

use super::config::{ExperimentConfig, ExperimentKind};

/// A method named in a config, resolved against the config's constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Sgd,
    HeavyBall { mu: f64 },
    Igt,
    Ita { c: f64 },
    HeavyBallIgt { mu: f64 },
    HeavyBallIta { mu: f64, c: f64 },
    Adam,
    AdamIta { c: f64 },
    MomentumFixed { gamma: f64 },
    MomentumIncreasing,
    /// Exact gradient descent (lqr only).
    ExactGd,
}

impl MethodSpec {
    pub fn parse(name: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let spec = match name {
            "sgd" => MethodSpec::Sgd,
            "hb" => MethodSpec::HeavyBall { mu: cfg.mu },
            "igt" => MethodSpec::Igt,
            "ita" => MethodSpec::Ita { c: cfg.c },
            "hb-igt" => MethodSpec::HeavyBallIgt { mu: cfg.mu },
            "hb-ita" => MethodSpec::HeavyBallIta { mu: cfg.mu, c: cfg.c },
            "adam" => MethodSpec::Adam,
            "adam-ita" => MethodSpec::AdamIta { c: cfg.c },
            "momentum-inc" => MethodSpec::MomentumIncreasing,
            "gd" if cfg.experiment == ExperimentKind::Lqr => MethodSpec::ExactGd,
            other => {
                if let Some(rest) = other.strip_prefix("momentum-") {
                    let gamma: f64 = rest.parse().map_err(|_| {
                        IgtError::Config(format!("cannot parse momentum weight in '{other}'"))
                    })?;
                    if !(0.0..1.0).contains(&gamma) {
                        return Err(IgtError::Config(format!(
                            "momentum weight must lie in [0, 1), got {gamma}"
                        )));
                    }
                    MethodSpec::MomentumFixed { gamma }
                } else {
                    return Err(IgtError::Config(format!("unknown method '{other}'")));
                }
            }
        };
        // Methods that make no sense for the experiment are rejected up front.
        match (cfg.experiment, spec) {
            (ExperimentKind::NoisePropagation, s) => {
                s.impulse_method()?;
            }
            (ExperimentKind::Lqr, MethodSpec::ExactGd | MethodSpec::Sgd | MethodSpec::Ita { .. }) => {}
            (ExperimentKind::Lqr, _) => {
                return Err(IgtError::Config(format!(
                    "method '{name}' is not available for the lqr experiment"
                )));
            }
            (_, MethodSpec::ExactGd | MethodSpec::MomentumIncreasing) => {
                return Err(IgtError::Config(format!(
                    "method '{name}' is only available for {} experiments",
                    if matches!(spec, MethodSpec::ExactGd) { "lqr" } else { "noise-propagation" }
                )));
            }
            _ => {}
        }
        Ok(spec)
    }

    /// Builds the optimizer this method names, at stepsize `alpha`.
    pub fn build_optimizer(&self, alpha: f64) -> Result<Optimizer> {
        match *self {
            MethodSpec::Sgd => Optimizer::sgd(alpha),
            MethodSpec::HeavyBall { mu } => Optimizer::heavy_ball(alpha, mu),
            MethodSpec::Igt => Optimizer::igt(alpha),
            MethodSpec::Ita { c } => Optimizer::ita(alpha, c),
            MethodSpec::HeavyBallIgt { mu } => Optimizer::heavyball_igt(alpha, mu),
            MethodSpec::HeavyBallIta { mu, c } => Optimizer::heavyball_ita(alpha, mu, c),
            MethodSpec::Adam => Optimizer::adam(alpha),
            MethodSpec::AdamIta { c } => Optimizer::adam_ita(alpha, c, 1e-8),
            MethodSpec::MomentumFixed { gamma } => Optimizer::momentum_descent(alpha, gamma),
            MethodSpec::MomentumIncreasing | MethodSpec::ExactGd => Err(
                IgtError::InvalidParameter(format!("{self:?} is not an optimizer composition")),
            ),
        }
    }

    /// The scalar impulse-simulation view of this method, where one exists.
    pub fn impulse_method(&self) -> Result<ImpulseMethod> {
        match *self {
            MethodSpec::Sgd => Ok(ImpulseMethod::Sgd),
            MethodSpec::MomentumFixed { gamma } => Ok(ImpulseMethod::MomentumFixed(gamma)),
            MethodSpec::MomentumIncreasing => Ok(ImpulseMethod::MomentumIncreasing),
            MethodSpec::Igt => Ok(ImpulseMethod::Igt),
            _ => Err(IgtError::Config(format!(
                "{self:?} has no impulse-response form"
            ))),
        }
    }
}
