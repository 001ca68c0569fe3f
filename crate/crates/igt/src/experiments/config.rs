//! Experiment configuration: JSON schema, per-experiment defaults, flag
//! overrides, and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IgtError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoisePropagation,
    Quadratic,
    Lqr,
    HbRate,
    SpectralSweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::NoisePropagation => "noise-propagation",
            ExperimentKind::Quadratic => "quadratic",
            ExperimentKind::Lqr => "lqr",
            ExperimentKind::HbRate => "hb-rate",
            ExperimentKind::SpectralSweep => "spectral-sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "noise-propagation" => Ok(ExperimentKind::NoisePropagation),
            "quadratic" => Ok(ExperimentKind::Quadratic),
            "lqr" => Ok(ExperimentKind::Lqr),
            "hb-rate" => Ok(ExperimentKind::HbRate),
            "spectral-sweep" => Ok(ExperimentKind::SpectralSweep),
            other => Err(IgtError::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Fully resolved experiment configuration. Serialized verbatim into the
/// output directory so any run can be reproduced from its echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub methods: Vec<String>,
    /// Problem dimension (quadratic worlds).
    pub d: usize,
    pub kappa: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub noise_std: f64,
    pub alpha: f64,
    /// Heavy-ball momentum for `hb`/`hb-igt`/`hb-ita` methods.
    pub mu: f64,
    /// Tail fraction for `ita`/`hb-ita`/`adam-ita` methods.
    pub c: f64,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Trajectories per REINFORCE gradient (lqr).
    pub n_traj: usize,
    /// Training iterations (lqr).
    pub iterations: usize,
    /// Seed for the LQR system matrices (distinct from training seeds).
    pub system_seed: u64,
    /// Trajectory-filter threshold as a multiple of the batch median
    /// gradient norm; 0 disables filtering.
    pub filter_multiple: f64,
}

/// Partial configuration as read from a JSON file; unknown keys are
/// rejected, missing keys fall back to the experiment defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<ExperimentKind>,
    methods: Option<Vec<String>>,
    d: Option<usize>,
    kappa: Option<f64>,
    #[serde(rename = "L")]
    l: Option<f64>,
    noise_std: Option<f64>,
    alpha: Option<f64>,
    mu: Option<f64>,
    c: Option<f64>,
    steps: Option<u64>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    n_traj: Option<usize>,
    iterations: Option<usize>,
    system_seed: Option<u64>,
    filter_multiple: Option<f64>,
}

/// Command-line flag overrides; flags win over config-file keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub methods: Option<Vec<String>>,
    pub d: Option<usize>,
    pub kappa: Option<f64>,
    pub l: Option<f64>,
    pub noise_std: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub c: Option<f64>,
    pub steps: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub n_traj: Option<usize>,
    pub iterations: Option<usize>,
    pub system_seed: Option<u64>,
    pub filter_multiple: Option<f64>,
}

/// Output-directory fallback: the `IGT_OUT` environment variable, then
/// `./out`.
pub fn default_output_root() -> PathBuf {
    std::env::var_os("IGT_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

impl ExperimentConfig {
    /// The canonical defaults for each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            methods: Vec::new(),
            d: 100,
            kappa: 1000.0,
            l: 1.0,
            noise_std: 0.3f64.sqrt(),
            alpha: 1.0,
            mu: 0.9,
            c: 0.1,
            steps: 10_000,
            seeds: vec![0, 1, 2],
            output_dir: None,
            n_traj: 100,
            iterations: 2000,
            system_seed: 7,
            filter_multiple: 10.0,
        };
        match kind {
            ExperimentKind::NoisePropagation => Self {
                methods: vec![
                    "sgd".into(),
                    "momentum-0.9".into(),
                    "momentum-inc".into(),
                    "igt".into(),
                ],
                d: 1,
                kappa: 1.0,
                alpha: 0.1,
                noise_std: 0.0,
                seeds: vec![0],
                ..base
            },
            ExperimentKind::Quadratic => Self {
                methods: vec!["sgd".into(), "hb".into(), "igt".into(), "hb-igt".into()],
                ..base
            },
            ExperimentKind::Lqr => Self {
                methods: vec!["gd".into(), "sgd".into(), "ita".into()],
                alpha: 2e-4,
                c: 0.5,
                seeds: vec![0],
                ..base
            },
            ExperimentKind::HbRate => Self {
                methods: vec!["hb-igt".into()],
                d: 50,
                kappa: 100.0,
                noise_std: 0.0,
                steps: 500,
                seeds: vec![0],
                ..base
            },
            ExperimentKind::SpectralSweep => Self {
                methods: vec!["hb-igt".into()],
                d: 20,
                kappa: 100.0,
                alpha: 0.5,
                steps: 4000,
                seeds: (0..20).collect(),
                ..base
            },
        }
    }

    /// Loads a config file, layering it over the defaults for its experiment.
    /// `kind_hint` (from the CLI subcommand) must agree with the file when
    /// both are present.
    pub fn load(path: &Path, kind_hint: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| IgtError::Config(format!("{}: {e}", path.display())))?;
        let kind = match (file.experiment, kind_hint) {
            (Some(k), Some(h)) if k != h => {
                return Err(IgtError::Config(format!(
                    "config file is for '{}' but '{}' was requested",
                    k.name(),
                    h.name()
                )));
            }
            (Some(k), _) => k,
            (None, Some(h)) => h,
            (None, None) => {
                return Err(IgtError::Config(
                    "config file does not name an experiment".into(),
                ));
            }
        };
        let mut cfg = Self::default_for(kind);
        cfg.merge_file(file);
        cfg.validate()?;
        Ok(cfg)
    }

    fn merge_file(&mut self, file: ConfigFile) {
        if let Some(v) = file.methods {
            self.methods = v;
        }
        if let Some(v) = file.d {
            self.d = v;
        }
        if let Some(v) = file.kappa {
            self.kappa = v;
        }
        if let Some(v) = file.l {
            self.l = v;
        }
        if let Some(v) = file.noise_std {
            self.noise_std = v;
        }
        if let Some(v) = file.alpha {
            self.alpha = v;
        }
        if let Some(v) = file.mu {
            self.mu = v;
        }
        if let Some(v) = file.c {
            self.c = v;
        }
        if let Some(v) = file.steps {
            self.steps = v;
        }
        if let Some(v) = file.seeds {
            self.seeds = v;
        }
        if let Some(v) = file.output_dir {
            self.output_dir = Some(v);
        }
        if let Some(v) = file.n_traj {
            self.n_traj = v;
        }
        if let Some(v) = file.iterations {
            self.iterations = v;
        }
        if let Some(v) = file.system_seed {
            self.system_seed = v;
        }
        if let Some(v) = file.filter_multiple {
            self.filter_multiple = v;
        }
    }

    /// Applies command-line overrides on top; flags win.
    pub fn apply_overrides(&mut self, ov: &Overrides) {
        if let Some(v) = &ov.methods {
            self.methods = v.clone();
        }
        if let Some(v) = ov.d {
            self.d = v;
        }
        if let Some(v) = ov.kappa {
            self.kappa = v;
        }
        if let Some(v) = ov.l {
            self.l = v;
        }
        if let Some(v) = ov.noise_std {
            self.noise_std = v;
        }
        if let Some(v) = ov.alpha {
            self.alpha = v;
        }
        if let Some(v) = ov.mu {
            self.mu = v;
        }
        if let Some(v) = ov.c {
            self.c = v;
        }
        if let Some(v) = ov.steps {
            self.steps = v;
        }
        if let Some(v) = &ov.seeds {
            self.seeds = v.clone();
        }
        if let Some(v) = &ov.output_dir {
            self.output_dir = Some(v.clone());
        }
        if let Some(v) = ov.n_traj {
            self.n_traj = v;
        }
        if let Some(v) = ov.iterations {
            self.iterations = v;
        }
        if let Some(v) = ov.system_seed {
            self.system_seed = v;
        }
        if let Some(v) = ov.filter_multiple {
            self.filter_multiple = v;
        }
    }

    /// The directory this run writes into.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| default_output_root().join(self.experiment.name()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(IgtError::Config("method list is empty".into()));
        }
        for m in &self.methods {
            super::methods::MethodSpec::parse(m, self)?;
        }
        if self.d < 1 {
            return Err(IgtError::Config("d must be >= 1".into()));
        }
        if !(self.kappa >= 1.0) {
            return Err(IgtError::Config(format!(
                "kappa must be >= 1, got {}",
                self.kappa
            )));
        }
        if !(self.l > 0.0) {
            return Err(IgtError::Config(format!("L must be > 0, got {}", self.l)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(IgtError::Config(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(IgtError::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(IgtError::Config(format!(
                "mu must lie in [0, 1), got {}",
                self.mu
            )));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(IgtError::Config(format!(
                "c must lie in (0, 1], got {}",
                self.c
            )));
        }
        if self.seeds.is_empty() {
            return Err(IgtError::Config("seed list is empty".into()));
        }
        if self.n_traj < 1 {
            return Err(IgtError::Config("n_traj must be >= 1".into()));
        }
        if !(self.filter_multiple >= 0.0) {
            return Err(IgtError::Config(format!(
                "filter_multiple must be >= 0 (0 disables), got {}",
                self.filter_multiple
            )));
        }
        Ok(())
    }
}
