//! Python bindings: the estimator/optimizer machinery, the quadratic oracle
//! world, and the analysis helpers, importable as `igt_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use igt::estimators::{self, EstimatorKind, EstimatorState, GradientSample, QueryPoint};
use igt::optimizers::{self, GradientOracle, Optimizer};
use igt::quadratic::{self, QuadraticProblem};
use igt::rng::{stream_rng, ChaCha8Rng};
use igt::ParamVector;

fn to_py_err(e: igt::IgtError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(values: Vec<f64>) -> PyResult<ParamVector> {
    ParamVector::new(values).map_err(to_py_err)
}

/// γ_t = t/(t+1).
#[pyfunction]
fn igt_gamma(t: u64) -> f64 {
    estimators::igt_gamma(t)
}

/// The anytime-tail-averaging weight for step `t >= 1` and tail fraction
/// `c` in (0, 1].
#[pyfunction]
fn ata_gamma(t: u64, c: f64) -> PyResult<f64> {
    estimators::ata_gamma(t, c).map_err(to_py_err)
}

/// θ + (γ/(1−γ))(θ − θ_prev).
#[pyfunction]
fn transport_point(theta: Vec<f64>, theta_prev: Vec<f64>, gamma: f64) -> PyResult<Vec<f64>> {
    let out = estimators::transport_point(&vector(theta)?, &vector(theta_prev)?, gamma)
        .map_err(to_py_err)?;
    Ok(out.into_vec())
}

/// The optimal heavy-ball pair `(alpha, mu)` for largest eigenvalue `l` and
/// condition number `kappa`.
#[pyfunction]
fn optimal_hb_tuning(l: f64, kappa: f64) -> PyResult<(f64, f64)> {
    optimizers::optimal_hb_tuning(l, kappa).map_err(to_py_err)
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    if u.len() != v.len() {
        return Err(PyValueError::new_err("dimension mismatch"));
    }
    Ok(igt::analysis::cosine_similarity(&vector(u)?, &vector(v)?))
}

/// Least-squares slope of log y against log t over `[t_min, t_max]`.
#[pyfunction]
fn loglog_slope(series: Vec<(f64, f64)>, t_min: f64, t_max: f64) -> PyResult<f64> {
    igt::analysis::loglog_slope(&series, t_min, t_max).map_err(to_py_err)
}

/// 2x2 bias matrix of Heavyball-IGT along an eigendirection.
#[pyfunction]
fn bias_matrix(alpha: f64, mu: f64, h: f64) -> Vec<Vec<f64>> {
    quadratic::bias_matrix(alpha, mu, h)
        .iter()
        .map(|r| r.to_vec())
        .collect()
}

/// 3x3 variance matrix of Heavyball-IGT along an eigendirection.
#[pyfunction]
fn variance_matrix(alpha: f64, mu: f64, h: f64) -> Vec<Vec<f64>> {
    quadratic::variance_matrix(alpha, mu, h)
        .iter()
        .map(|r| r.to_vec())
        .collect()
}

/// Spectral radius of a 2x2 or 3x3 matrix given as nested lists.
#[pyfunction]
fn spectral_radius(m: Vec<Vec<f64>>) -> PyResult<f64> {
    match m.len() {
        2 if m.iter().all(|r| r.len() == 2) => {
            let a = [[m[0][0], m[0][1]], [m[1][0], m[1][1]]];
            Ok(quadratic::spectral_radius2(&a))
        }
        3 if m.iter().all(|r| r.len() == 3) => {
            let a = [
                [m[0][0], m[0][1], m[0][2]],
                [m[1][0], m[1][1], m[1][2]],
                [m[2][0], m[2][1], m[2][2]],
            ];
            Ok(quadratic::spectral_radius3(&a))
        }
        _ => Err(PyValueError::new_err("expected a square 2x2 or 3x3 matrix")),
    }
}

/// The convergence bound `(1 − 1/κ)^{2t} Δ0² + d α² B ν̄0²/t`, valid for
/// `t > 2κ`.
#[pyfunction]
fn igt_error_bound(
    alpha: f64,
    kappa: f64,
    d: usize,
    b_noise: f64,
    delta0_sq: f64,
    t: u64,
) -> PyResult<f64> {
    quadratic::igt_error_bound(alpha, kappa, d, b_noise, delta0_sq, t).map_err(to_py_err)
}

fn parse_kind(kind: &str, gamma: Option<f64>, tail_fraction: Option<f64>) -> PyResult<EstimatorKind> {
    match kind {
        "sgd" => Ok(EstimatorKind::Sgd),
        "momentum" => Ok(EstimatorKind::Momentum {
            gamma: gamma.ok_or_else(|| PyValueError::new_err("momentum needs gamma"))?,
        }),
        "igt" => Ok(EstimatorKind::Igt),
        "ita" => Ok(EstimatorKind::Ita {
            tail_fraction: tail_fraction
                .ok_or_else(|| PyValueError::new_err("ita needs tail_fraction"))?,
        }),
        other => Err(PyValueError::new_err(format!("unknown estimator kind '{other}'"))),
    }
}

/// Two-phase gradient estimator. `query` proposes the point to measure at;
/// `update` folds the gradient measured there and returns the velocity.
#[pyclass]
struct Estimator {
    state: EstimatorState,
    pending: Option<QueryPoint>,
}

#[pymethods]
impl Estimator {
    #[new]
    #[pyo3(signature = (kind, gamma=None, tail_fraction=None))]
    fn new(kind: &str, gamma: Option<f64>, tail_fraction: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            state: EstimatorState::new(parse_kind(kind, gamma, tail_fraction)?)
                .map_err(to_py_err)?,
            pending: None,
        })
    }

    /// The point at which the next gradient must be evaluated.
    fn query(&mut self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        let q = self.state.query(&vector(theta)?).map_err(to_py_err)?;
        let point = q.point().as_slice().to_vec();
        self.pending = Some(q);
        Ok(point)
    }

    /// Folds a gradient measured at the last queried point; returns `v_t`.
    fn update(&mut self, theta: Vec<f64>, grad: Vec<f64>) -> PyResult<Vec<f64>> {
        let q = self
            .pending
            .take()
            .ok_or_else(|| PyRuntimeError::new_err("update called before query"))?;
        let sample = GradientSample::measured_at(&q, vector(grad)?).map_err(to_py_err)?;
        let v = self
            .state
            .update(&vector(theta)?, &sample)
            .map_err(to_py_err)?;
        Ok(v.into_vec())
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.state.step_count()
    }

    #[getter]
    fn velocity(&self) -> Option<Vec<f64>> {
        self.state.velocity().map(|v| v.as_slice().to_vec())
    }
}

struct CallableOracle<'py> {
    f: Bound<'py, PyAny>,
    dim: usize,
}

impl GradientOracle for CallableOracle<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&mut self, query: &QueryPoint) -> igt::Result<GradientSample> {
        let values: Vec<f64> = self
            .f
            .call1((query.point().as_slice().to_vec(),))
            .and_then(|obj| obj.extract())
            .map_err(|e| igt::IgtError::InvalidParameter(format!("python oracle failed: {e}")))?;
        GradientSample::measured_at(query, ParamVector::new(values)?)
    }
}

/// An update rule composed with an embedded gradient estimator.
#[pyclass(name = "Optimizer")]
struct PyOptimizer {
    inner: Optimizer,
}

#[pymethods]
impl PyOptimizer {
    #[staticmethod]
    fn sgd(alpha: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::sgd(alpha).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn igt(alpha: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::igt(alpha).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn ita(alpha: f64, tail_fraction: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::ita(alpha, tail_fraction).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn heavy_ball(alpha: f64, mu: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::heavy_ball(alpha, mu).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn heavyball_igt(alpha: f64, mu: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::heavyball_igt(alpha, mu).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn heavyball_ita(alpha: f64, mu: f64, tail_fraction: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::heavyball_ita(alpha, mu, tail_fraction).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn adam(alpha: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::adam(alpha).map_err(to_py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, tail_fraction, eps=1e-8))]
    fn adam_ita(alpha: f64, tail_fraction: f64, eps: f64) -> PyResult<Self> {
        Ok(Self { inner: Optimizer::adam_ita(alpha, tail_fraction, eps).map_err(to_py_err)? })
    }

    /// One full step. `oracle` is a callable mapping a point (list of floats)
    /// to the stochastic gradient evaluated exactly there. Returns
    /// `(theta_next, velocity)`.
    fn step(
        &mut self,
        theta: Vec<f64>,
        oracle: &Bound<'_, PyAny>,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let theta = vector(theta)?;
        let mut oracle = CallableOracle {
            f: oracle.clone(),
            dim: theta.dim(),
        };
        let (next, v) = self.inner.step(&theta, &mut oracle).map_err(to_py_err)?;
        Ok((next.into_vec(), v.into_vec()))
    }
}

/// A diagonal-spectrum quadratic problem with isotropic gradient noise.
#[pyclass(name = "Quadratic")]
struct PyQuadratic {
    problem: QuadraticProblem,
}

#[pymethods]
impl PyQuadratic {
    /// Geometric spectrum from `l/kappa` to `l`, optimum drawn from `seed`.
    #[staticmethod]
    fn make(d: usize, kappa: f64, l: f64, noise_std: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            problem: quadratic::make_quadratic(d, kappa, l, noise_std, seed).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.problem.eigenvalues().to_vec()
    }

    #[getter]
    fn theta_star(&self) -> Vec<f64> {
        self.problem.theta_star().as_slice().to_vec()
    }

    fn true_gradient(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .problem
            .true_gradient(&vector(theta)?)
            .map_err(to_py_err)?
            .into_vec())
    }

    fn suboptimality(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.problem.suboptimality(&vector(theta)?).map_err(to_py_err)
    }

    /// A seeded stochastic-gradient sampler over this problem, usable as the
    /// oracle callable of `Optimizer.step`.
    fn sampler(&self, seed: u64) -> PySampler {
        PySampler {
            problem: self.problem.clone(),
            rng: stream_rng(seed, &[0x7079]),
        }
    }
}

/// Stochastic gradient sampler: call with a point, get `g(point) + noise`.
#[pyclass(name = "Sampler")]
struct PySampler {
    problem: QuadraticProblem,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PySampler {
    fn __call__(&mut self, point: Vec<f64>) -> PyResult<Vec<f64>> {
        let (g, _) = self
            .problem
            .stochastic_gradient(&vector(point)?, &mut self.rng)
            .map_err(to_py_err)?;
        Ok(g.into_vec())
    }
}

#[pymodule]
fn igt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(igt_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(ata_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(transport_point, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_hb_tuning, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(bias_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(variance_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(igt_error_bound, m)?)?;
    m.add_class::<Estimator>()?;
    m.add_class::<PyOptimizer>()?;
    m.add_class::<PyQuadratic>()?;
    m.add_class::<PySampler>()?;
    Ok(())
}
