//! Column standardization and collinearity diagnostics.

use nalgebra::DMatrix;
use serde::Serialize;

use super::CovariateError;

/// Z-scored columns plus the moments needed to undo the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    /// Sample standard deviations (n - 1 denominator).
    pub stds: Vec<f64>,
}

impl StandardizedMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }
}

pub fn column_mean_std(col: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = col.clone().count() as f64;
    let mean = col.clone().sum::<f64>() / n;
    let ss: f64 = col.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn standardize(columns: &DMatrix<f64>) -> Result<StandardizedMatrix, CovariateError> {
    let (n, p) = columns.shape();
    if n < 2 {
        return Err(CovariateError::TooFewRows { rows: n, needed: 2 });
    }
    let mut values = columns.clone();
    let mut means = Vec::with_capacity(p);
    let mut stds = Vec::with_capacity(p);
    for j in 0..p {
        let (mean, std) = column_mean_std(columns.column(j).iter().copied());
        if !(std > 1e-12 * mean.abs().max(1.0)) || !std.is_finite() {
            return Err(CovariateError::ConstantColumn(j));
        }
        values.column_mut(j).apply(|v| *v = (*v - mean) / std);
        means.push(mean);
        stds.push(std);
    }
    Ok(StandardizedMatrix {
        values,
        means,
        stds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Row-major p x p correlation matrix.
    pub pearson: Vec<Vec<f64>>,
    pub vif: Vec<f64>,
    pub condition_number: f64,
}

/// Pearson correlations, variance inflation factors, and the condition
/// number of the standardized design.
///
/// VIF is read off the diagonal of the inverse correlation matrix, which
/// equals `1 / (1 - R^2_j)` for the regression of column j on the rest.
pub fn diagnostics(x: &StandardizedMatrix) -> Result<Diagnostics, CovariateError> {
    let (n, p) = x.values.shape();
    if n <= p {
        return Err(CovariateError::TooFewRows { rows: n, needed: p + 1 });
    }
    let svd = x.values.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let (kmin, smin) = sv.argmin();
    if smin <= 1e-10 * smax {
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let null = v_t.row(kmin);
        let peak = null.amax();
        let columns = (0..p).filter(|&j| null[j].abs() > 1e-6 * peak).collect();
        return Err(CovariateError::RankDeficient { columns });
    }

    let mut corr = x.values.tr_mul(&x.values) / (n as f64 - 1.0);
    for i in 0..p {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            let avg = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = avg;
            corr[(j, i)] = avg;
        }
    }
    let inv = corr
        .clone()
        .cholesky()
        .ok_or_else(|| CovariateError::RankDeficient {
            columns: (0..p).collect(),
        })?
        .inverse();
    let vif = (0..p).map(|j| inv[(j, j)].max(1.0)).collect();
    let pearson = (0..p)
        .map(|i| (0..p).map(|j| corr[(i, j)]).collect())
        .collect();
    Ok(Diagnostics {
        pearson,
        vif,
        condition_number: smax / smin,
    })
}
