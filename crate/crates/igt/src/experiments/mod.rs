//! Reproducible named experiments: JSON configuration in, CSV + JSON out.
//!
//! Five experiments are built in:
//!
//! * `noise-propagation` — per-noise impact coefficients `N_{i,t}²` and their
//!   total for SGD, fixed momentum, increasing momentum, and IGT.
//! * `quadratic` — multi-seed optimizer runs on the standard noisy quadratic,
//!   recording iterate error, estimator noise, and cosine diagnostics.
//! * `lqr` — policy-gradient training (exact GD, REINFORCE SGD, and ITA)
//!   against the Riccati optimum.
//! * `hb-rate` — noiseless Heavyball-IGT contraction at the optimal tuning.
//! * `spectral-sweep` — stability sweep over the heavy-ball momentum plus a
//!   bias/variance run at the selected tuning.
//!
//! Outputs are deterministic: identical `(config, seed)` yields byte-identical
//! files.

mod config;
mod csvio;
mod methods;
mod runner;

pub use config::{default_output_root, ExperimentConfig, ExperimentKind, Overrides};
pub use methods::MethodSpec;
pub use runner::{
    cosine_comparison_on_igt_runs, run_experiment, run_lqr_method, run_quadratic_method,
    CosineBin, LqrRow, LqrSeries, PropertyCheck, RunOutcome, SummaryFile,
};
