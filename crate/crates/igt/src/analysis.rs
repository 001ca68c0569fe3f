//! Run records and statistics: estimator-quality diagnostics, slope fits,
//! multi-seed aggregation, and distance-binned comparisons.

use crate::error::{IgtError, Result};
use crate::vector::ParamVector;

/// One recorded step of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: u64,
    /// `‖θ_t − θ*‖²`.
    pub iterate_err_sq: f64,
    /// `‖v_t − g(θ_t)‖²`: the noise carried by the gradient estimate.
    pub estimator_noise_sq: f64,
    pub v_norm: f64,
    /// `cos(v_t, g(θ_t))`.
    pub cosine: f64,
    /// Exact evaluation cost, when the run has one (LQR).
    pub eval_cost: Option<f64>,
}

/// Per-step time series for one `(method, seed)` run.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RunRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.t <= last.t {
                return Err(IgtError::InvalidParameter(format!(
                    "rows must be strictly increasing in t: {} after {}",
                    row.t, last.t
                )));
            }
        }
        if row.iterate_err_sq < 0.0 || row.estimator_noise_sq < 0.0 {
            return Err(IgtError::InvalidParameter(
                "squared norms must be nonnegative".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&row.cosine) {
            return Err(IgtError::InvalidParameter(format!(
                "cosine {} outside [-1, 1]",
                row.cosine
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[RunRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(t, value)` pairs for a column selector, ready for slope fitting.
    pub fn series(&self, f: impl Fn(&RunRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t as f64, f(r))).collect()
    }
}

/// `u·v / (‖u‖‖v‖)`, defined as 0 when either vector is zero. The flagged
/// variant reports that degenerate case.
pub fn cosine_similarity(u: &ParamVector, v: &ParamVector) -> f64 {
    cosine_similarity_flagged(u, v).0
}

pub fn cosine_similarity_flagged(u: &ParamVector, v: &ParamVector) -> (f64, bool) {
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return (0.0, true);
    }
    let c = u.dot(v).expect("callers pass equal dims") / (nu * nv);
    (c.clamp(-1.0, 1.0), false)
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len();
    if n < 2 {
        return Err(IgtError::InvalidParameter(
            "need at least two points to fit a line".into(),
        ));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(IgtError::InvalidParameter(
            "degenerate fit: all x equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Least-squares slope of `log y` against `log t` over the window
/// `t_min ≤ t ≤ t_max`. Requires at least 10 points, all with `y > 0`.
pub fn loglog_slope(series: &[(f64, f64)], t_min: f64, t_max: f64) -> Result<f64> {
    let mut pts = Vec::new();
    for &(t, y) in series {
        if t < t_min || t > t_max {
            continue;
        }
        if !(y > 0.0) {
            return Err(IgtError::InvalidParameter(format!(
                "nonpositive value {y} at t = {t} in log-log window"
            )));
        }
        pts.push((t.ln(), y.ln()));
    }
    if pts.len() < 10 {
        return Err(IgtError::InvalidParameter(format!(
            "log-log window holds {} points, need >= 10",
            pts.len()
        )));
    }
    Ok(linear_fit(&pts)?.slope)
}

/// Pointwise mean/std across seeds for one recorded column set.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub t: u64,
    pub iterate_err_sq_mean: f64,
    pub iterate_err_sq_std: f64,
    pub estimator_noise_sq_mean: f64,
    pub estimator_noise_sq_std: f64,
    pub v_norm_mean: f64,
    pub v_norm_std: f64,
    pub cosine_mean: f64,
    pub cosine_std: f64,
}

/// Pointwise mean and sample standard deviation over records sharing one
/// step grid.
pub fn seed_aggregate(records: &[RunRecord]) -> Result<Vec<AggRow>> {
    let first = records
        .first()
        .ok_or_else(|| IgtError::InvalidParameter("no records to aggregate".into()))?;
    for rec in records {
        if rec.len() != first.len()
            || rec
                .rows()
                .iter()
                .zip(first.rows())
                .any(|(a, b)| a.t != b.t)
        {
            return Err(IgtError::InvalidParameter(
                "records do not share a step grid".into(),
            ));
        }
    }
    let n = records.len() as f64;
    let mut out = Vec::with_capacity(first.len());
    for idx in 0..first.len() {
        let column = |f: &dyn Fn(&RunRow) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = records.iter().map(|r| f(&r.rows()[idx])).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let std = if records.len() < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            (mean, std)
        };
        let (ie_m, ie_s) = column(&|r| r.iterate_err_sq);
        let (en_m, en_s) = column(&|r| r.estimator_noise_sq);
        let (vn_m, vn_s) = column(&|r| r.v_norm);
        let (co_m, co_s) = column(&|r| r.cosine);
        out.push(AggRow {
            t: first.rows()[idx].t,
            iterate_err_sq_mean: ie_m,
            iterate_err_sq_std: ie_s,
            estimator_noise_sq_mean: en_m,
            estimator_noise_sq_std: en_s,
            v_norm_mean: vn_m,
            v_norm_std: vn_s,
            cosine_mean: co_m,
            cosine_std: co_s,
        });
    }
    Ok(out)
}

/// Logarithmically spaced bin edges: `n_bins + 1` edges from `min` to `max`.
pub fn log_bin_edges(min: f64, max: f64, n_bins: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min) {
        return Err(IgtError::InvalidParameter(format!(
            "log bins need 0 < min < max, got [{min}, {max}]"
        )));
    }
    let ratio = (max / min).powf(1.0 / n_bins as f64);
    let mut edges: Vec<f64> = (0..=n_bins).map(|k| min * ratio.powi(k as i32)).collect();
    edges[0] = min;
    edges[n_bins] = max;
    Ok(edges)
}

#[derive(Debug, Clone, Copy)]
pub struct BinnedMean {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean: f64,
}

/// Bins `(key, value)` samples by key and averages values per bin. The last
/// bin is closed on the right.
pub fn binned_mean(samples: &[(f64, f64)], edges: &[f64]) -> Vec<BinnedMean> {
    let n_bins = edges.len().saturating_sub(1);
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for &(key, value) in samples {
        if key < edges[0] || key > edges[n_bins] {
            continue;
        }
        let mut bin = match edges.binary_search_by(|e| e.total_cmp(&key)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if bin >= n_bins {
            bin = n_bins - 1;
        }
        sums[bin] += value;
        counts[bin] += 1;
    }
    (0..n_bins)
        .map(|b| BinnedMean {
            lo: edges[b],
            hi: edges[b + 1],
            count: counts[b],
            mean: if counts[b] == 0 { 0.0 } else { sums[b] / counts[b] as f64 },
        })
        .collect()
}
