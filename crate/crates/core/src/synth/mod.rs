//! Seeded generators with known ground truth, and brute-force oracles that
//! the estimators are checked against.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so outputs are
//! stable across platforms for a given seed.

mod inputs;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use thiserror::Error;

use crate::covariates::CovariateRow;
use crate::data_model::{DataError, OutageObservation, OutageSeries, RegionId};
use crate::glmm::GlmmError;
use crate::resilience::{RegionSeries, ResilienceError};

pub use inputs::{sim_horizon, sim_landfall, simulate_inputs, SimulatedInputs, SimulationConfig, SIM_TIMEZONE};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    /// Maximum drop, `1 - min Q`.
    pub depth: f64,
    pub drop_day: usize,
    pub recovery_days: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl CurveParams {
    pub fn validate(&self, days: usize) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.depth) {
            return Err(SynthError::BadParams(format!("depth {} outside [0, 1]", self.depth)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(SynthError::BadParams(format!("noise_sd {}", self.noise_sd)));
        }
        if self.drop_day + self.recovery_days >= days {
            return Err(SynthError::BadParams(format!(
                "drop day {} plus {} recovery days exceeds {days} days",
                self.drop_day, self.recovery_days
            )));
        }
        Ok(())
    }
}

/// Daily quality values: a linear fall from 1 on day 0 to `1 - depth` on
/// `drop_day` (immediate when `drop_day` is 0), a linear climb back over
/// `recovery_days`, and 1 afterwards. Gaussian noise is added and the result
/// is truncated at zero.
pub fn curve_values(params: &CurveParams, days: usize) -> Result<Vec<f64>, SynthError> {
    params.validate(days)?;
    let mut rng = rng(params.seed);
    let noise = Normal::new(0.0, params.noise_sd).expect("validated sd");
    let (drop, rec) = (params.drop_day, params.recovery_days as f64);
    Ok((0..days)
        .map(|d| {
            let shortfall = if d < drop {
                params.depth * d as f64 / drop as f64
            } else {
                let k = (d - drop) as f64;
                params.depth * (1.0 - k / (rec + 1.0)).max(0.0)
            };
            let eps: f64 = if params.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (1.0 - shortfall + eps).max(0.0)
        })
        .collect())
}

pub fn gen_curve(
    params: &CurveParams,
    region: RegionId,
    start: NaiveDate,
    days: usize,
) -> Result<RegionSeries, SynthError> {
    Ok(RegionSeries::new(region, start, curve_values(params, days)?)?)
}

/// A quality function on `[0, T]` defined by daily knots.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityCurve {
    /// `Q(t) = q[floor(t)]`.
    Step(Vec<f64>),
    /// Linear between `q[d]` at `t = d`; the last knot is held to `T`.
    Linear(Vec<f64>),
}

impl QualityCurve {
    pub fn horizon(&self) -> f64 {
        match self {
            QualityCurve::Step(q) | QualityCurve::Linear(q) => q.len() as f64,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            QualityCurve::Step(q) => q[(t.floor() as usize).min(q.len() - 1)],
            QualityCurve::Linear(q) => {
                let d = t.floor() as usize;
                if d + 1 >= q.len() {
                    return q[q.len() - 1];
                }
                let frac = t - d as f64;
                q[d] + frac * (q[d + 1] - q[d])
            }
        }
    }
}

/// Brute-force shortfall integral by the midpoint rule on a grid of step `dt`.
pub fn oracle_trl(curve: &QualityCurve, dt: f64) -> Result<f64, SynthError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(SynthError::BadParams(format!("dt {dt} must lie in (0, 0.01]")));
    }
    let horizon = curve.horizon();
    if horizon == 0.0 {
        return Ok(0.0);
    }
    let steps = (horizon / dt).round() as usize;
    let h = horizon / steps as f64;
    let mut total = 0.0;
    for j in 0..steps {
        total += (1.0 - curve.at((j as f64 + 0.5) * h)).max(0.0);
    }
    Ok(total * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmScenario {
    /// Intercept followed by up to eight slopes; absent slopes are zero.
    pub beta_true: Vec<f64>,
    pub sigma_b_true: f64,
    pub shape_true: f64,
    pub n_groups: usize,
    pub n_per_group: usize,
    pub seed: u64,
}

/// Standardized effects of the fitted county-subdivision model, intercept first.
pub const STUDY_BETA: [f64; 9] = [0.936, 0.141, 0.632, 0.090, -0.092, 0.322, -0.111, -0.006, -0.029];

impl GlmmScenario {
    /// 36 groups of 5 rows, eight predictors, `sigma_b = 0.35`, `shape = 3`.
    pub fn county_study(seed: u64) -> Self {
        GlmmScenario {
            beta_true: STUDY_BETA.to_vec(),
            sigma_b_true: 0.35,
            shape_true: 3.0,
            n_groups: 36,
            n_per_group: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_groups == 0 || self.n_per_group == 0 {
            return Err(SynthError::BadParams("counts must be at least 1".into()));
        }
        if self.beta_true.is_empty() || self.beta_true.len() > 9 {
            return Err(SynthError::BadParams("beta_true needs 1 to 9 entries".into()));
        }
        if !(self.sigma_b_true >= 0.0) || !(self.shape_true > 0.0) {
            return Err(SynthError::BadParams("sigma_b must be >= 0 and shape > 0".into()));
        }
        Ok(())
    }

    /// True coefficients padded to intercept + 8 slopes.
    pub fn full_beta(&self) -> [f64; 9] {
        let mut b = [0.0; 9];
        b[..self.beta_true.len()].copy_from_slice(&self.beta_true);
        b
    }
}

/// Rows drawn from the random-intercept Gamma model. Predictors are iid
/// standard normal; `trl` is Gamma with mean `exp(x'beta + b_g)` and shape
/// `shape_true`.
pub fn gen_glmm_data(s: &GlmmScenario) -> Result<Vec<CovariateRow>, SynthError> {
    s.validate()?;
    let beta = s.full_beta();
    let mut rng = rng(s.seed);
    let mut rows = Vec::with_capacity(s.n_groups * s.n_per_group);
    for g in 0..s.n_groups {
        let z: f64 = rng.sample(StandardNormal);
        let b = s.sigma_b_true * z;
        for i in 0..s.n_per_group {
            let mut x = [0.0; 8];
            for v in &mut x {
                *v = rng.sample(StandardNormal);
            }
            let eta = beta[0] + x.iter().zip(&beta[1..]).map(|(a, c)| a * c).sum::<f64>() + b;
            let mu = eta.exp();
            let y: f64 = Gamma::new(s.shape_true, mu / s.shape_true)
                .map_err(|e| SynthError::BadParams(e.to_string()))?
                .sample(&mut rng);
            let mut row = CovariateRow {
                polygon_id: format!("g{g:03}-{i:03}"),
                group: format!("group-{g:03}"),
                trl: y.max(f64::MIN_POSITIVE),
                ..CovariateRow::default()
            };
            row.set_predictors(x);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Response and design (with intercept) for a fixed-effects Gamma/log model
/// with `p` standard-normal predictors.
pub fn gen_glm_data(
    seed: u64,
    n: usize,
    beta: &[f64],
    shape: f64,
) -> Result<(Vec<f64>, DMatrix<f64>), SynthError> {
    if beta.is_empty() || n <= beta.len() || !(shape > 0.0) {
        return Err(SynthError::BadParams("need n > p + 1, p >= 0 and shape > 0".into()));
    }
    let k = beta.len();
    let mut rng = rng(seed);
    let mut x = DMatrix::from_element(n, k, 1.0);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for j in 1..k {
            x[(i, j)] = rng.sample(StandardNormal);
        }
        let eta: f64 = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
        let mu = eta.exp();
        let draw: f64 = Gamma::new(shape, mu / shape)
            .map_err(|e| SynthError::BadParams(e.to_string()))?
            .sample(&mut rng);
        y.push(draw.max(f64::MIN_POSITIVE));
    }
    Ok((y, x))
}

/// Gaussian elimination with partial pivoting on a dense square system.
/// Returns `None` when a pivot falls below `1e-12` of the largest entry.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Newton-Raphson on the Gamma/log log-likelihood with the observed Hessian,
/// solved through explicit normal equations. Independent of the QR path in
/// [`crate::glmm::fit_glm`].
pub fn oracle_irls(y: &[f64], x: &DMatrix<f64>) -> Result<Vec<f64>, GlmmError> {
    if let Some(index) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(GlmmError::NonPositiveResponse { index, value: y[index] });
    }
    let (n, k) = x.shape();
    if n <= k {
        return Err(GlmmError::TooFewObservations { rows: n, coefficients: k });
    }
    let rank_err = || GlmmError::RankDeficientDesign { ratio: 0.0 };
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum()).collect())
        .collect();
    gauss_solve(xtx, vec![0.0; k]).ok_or_else(rank_err)?;

    let loglik = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let eta: f64 = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
                -eta - y[i] * (-eta).exp()
            })
            .sum()
    };
    let mut beta = vec![0.0; k];
    // intercept column is the one that is constant
    if let Some(c) = (0..k).find(|&j| (0..n).all(|i| x[(i, j)] == x[(0, j)]) && x[(0, j)] != 0.0) {
        beta[c] = (y.iter().sum::<f64>() / n as f64).ln() / x[(0, c)];
    }
    let mut current = loglik(&beta);
    for _ in 0..500 {
        let mut grad = vec![0.0; k];
        let mut hess = vec![vec![0.0; k]; k];
        for i in 0..n {
            let eta: f64 = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
            let w = y[i] * (-eta).exp();
            for a in 0..k {
                grad[a] += x[(i, a)] * (w - 1.0);
                for b in 0..k {
                    hess[a][b] += w * x[(i, a)] * x[(i, b)];
                }
            }
        }
        let step = gauss_solve(hess, grad).ok_or_else(rank_err)?;
        let mut t = 1.0;
        let mut next;
        loop {
            next = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect::<Vec<_>>();
            let val = loglik(&next);
            if val.is_finite() && val >= current - 1e-12 * current.abs().max(1.0) {
                current = val;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return Err(GlmmError::NoConvergence { stage: "oracle IRLS", iterations: 500 });
            }
        }
        let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        beta = next;
        if change <= 1e-13 * size {
            return Ok(beta);
        }
    }
    Err(GlmmError::NoConvergence { stage: "oracle IRLS", iterations: 500 })
}

/// Nakagawa R² from the fixed-effect linear predictor, computed with a
/// one-pass (Welford) variance.
pub fn oracle_r2(linear_predictor: &[f64], sigma2_group: f64, shape: f64) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, v) in linear_predictor.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let sf = if linear_predictor.len() > 1 { m2 / (linear_predictor.len() - 1) as f64 } else { 0.0 };
    let sd = (1.0 / shape).ln_1p();
    let denom = sf + sigma2_group + sd;
    if denom <= 0.0 {
        return (0.0, 0.0);
    }
    (sf / denom, (sf + sigma2_group) / denom)
}

/// `1 / (1 - R²_j)` from regressing each column on the others plus an
/// intercept.
pub fn oracle_vif(columns: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (n, p) = columns.shape();
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&c| c != j).collect();
        let k = others.len() + 1;
        let design = |i: usize, c: usize| if c == 0 { 1.0 } else { columns[(i, others[c - 1])] };
        let xtx: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| (0..n).map(|i| design(i, a) * design(i, b)).sum()).collect())
            .collect();
        let xty: Vec<f64> = (0..k).map(|a| (0..n).map(|i| design(i, a) * columns[(i, j)]).sum()).collect();
        let coef = gauss_solve(xtx, xty)?;
        let mean = (0..n).map(|i| columns[(i, j)]).sum::<f64>() / n as f64;
        let (mut sse, mut sst) = (0.0, 0.0);
        for i in 0..n {
            let fit: f64 = (0..k).map(|c| design(i, c) * coef[c]).sum();
            sse += (columns[(i, j)] - fit).powi(2);
            sst += (columns[(i, j)] - mean).powi(2);
        }
        out.push(sst / sse);
    }
    Some(out)
}

/// Hourly outage series whose fraction is a step function with a known
/// first reaching and last exceedance of `threshold`.
#[derive(Debug, Clone)]
pub struct OutageCase {
    pub series: OutageSeries,
    /// Exact restoration time of the constructed step function, in days.
    pub expected_days: f64,
}

pub fn gen_outage_steps(seed: u64, start: DateTime<FixedOffset>, threshold: f64) -> OutageCase {
    let mut rng = rng(seed);
    let hours = rng.random_range(48..400usize);
    let total: u64 = rng.random_range(500..100_000);
    let affected = rng.random_bool(0.9);
    let first = rng.random_range(1..hours - 1);
    let last = rng.random_range(first..hours - 1);
    let above_lo = threshold + 0.02;
    let below_hi = (threshold - 0.02).max(0.0);
    let fractions: Vec<f64> = (0..hours)
        .map(|h| {
            let above = affected && (h == first || h == last || (h > first && h < last && rng.random_bool(0.8)));
            if above {
                rng.random_range(above_lo..=1.0)
            } else {
                rng.random_range(0.0..=below_hi)
            }
        })
        .collect();
    let points = fractions
        .iter()
        .enumerate()
        .map(|(h, f)| OutageObservation {
            county: format!("case-{seed}"),
            timestamp: start + Duration::hours(h as i64),
            customers_total: total,
            customers_out: (f * total as f64).round() as u64,
        })
        .collect();
    OutageCase {
        series: OutageSeries {
            county: format!("case-{seed}"),
            points,
        },
        expected_days: if affected { (last - first) as f64 / 24.0 } else { 0.0 },
    }
}
