//! Implicit gradient transport (IGT) for online stochastic optimization.
//!
//! The central idea: a running average of past stochastic gradients is a poor
//! estimate of the gradient at the *current* iterate because the old samples
//! are stale. When every component function is a quadratic with the same
//! Hessian, staleness can be corrected exactly — without ever touching the
//! Hessian — by evaluating each new gradient at an extrapolated point
//! `θ_t + t (θ_t − θ_{t−1})`. The resulting velocity is the uniform average of
//! all past (transported) gradients and its noise shrinks like `O(1/t)`.
//!
//! The crate provides:
//!
//! * [`estimators`] — the two-phase (query / update) gradient estimators:
//!   plain SGD, fixed-momentum averaging, IGT, and the anytime-tail-averaged
//!   variant ITA.
//! * [`optimizers`] — parameter-update rules consuming estimator output:
//!   SGD, heavy ball, Heavyball-IGT, Adam, Adam-ITA, plus the two-term IGT
//!   recursion that eliminates the velocity.
//! * [`quadratic`] — an exact quadratic oracle world: problem generation,
//!   noise-propagation coefficients, and the bias/variance dynamics matrices
//!   whose spectral radii govern Heavyball-IGT.
//! * [`lqr`] — a linear-quadratic-regulator policy-gradient testbed with a
//!   REINFORCE estimator, exact moment-propagation costs, and the
//!   finite-horizon Riccati optimum.
//! * [`analysis`] — run records, slope fitting, and seed aggregation.
//! * [`experiments`] — reproducible named experiments writing CSV/JSON.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod lqr;
pub mod optimizers;
pub mod quadratic;
pub mod rng;
pub mod vector;

pub use error::{IgtError, Result};
pub use vector::ParamVector;
