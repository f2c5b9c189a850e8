//! Gamma/log-link regression with a single random-intercept factor.
//!
//! [`fit_glm`] is the fixed-effects model; [`fit_glmm`] maximizes the
//! Laplace-approximated marginal likelihood over `(beta, sigma2_group,
//! shape)`, the GLM being its `sigma2_group = 0` boundary.

mod glm;
mod inference;
mod laplace;
pub mod optim;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariates::{self, CovariateError, CovariateRow, PREDICTORS};

pub use glm::{fit_glm, gamma_log_density, MAX_SHAPE};
pub use inference::{
    exp_coefficient, information_criteria, nakagawa_r2, normal_two_sided_p, significance_stars,
    variance_partition, wald, wald_table, CoefficientRow, InformationCriteria,
};
pub use laplace::{ConditionalMode, LaplaceModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmmError {
    #[error("response must be strictly positive (row {index} has {value})")]
    NonPositiveResponse { index: usize, value: f64 },
    #[error("design matrix is rank deficient (smallest/largest singular value {ratio:e})")]
    RankDeficientDesign { ratio: f64 },
    #[error("{stage} did not converge within {iterations} iterations")]
    NoConvergence { stage: &'static str, iterations: usize },
    #[error("need more rows than coefficients ({rows} rows, {coefficients} coefficients)")]
    TooFewObservations { rows: usize, coefficients: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid fit controls: {0}")]
    InvalidControls(String),
    #[error("group and residual variance are both zero")]
    ZeroTotalVariance,
    #[error("information matrix is not positive definite")]
    SingularInformation,
    #[error(transparent)]
    Covariate(#[from] CovariateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: String,
    pub predictors: Vec<String>,
    pub group: String,
    pub family: String,
    pub link: String,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            response: "trl".into(),
            predictors: PREDICTORS.iter().map(|s| s.to_string()).collect(),
            group: "county".into(),
            family: "Gamma".into(),
            link: "log".into(),
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), GlmmError> {
        if self.predictors.is_empty() {
            return Err(GlmmError::InvalidSpec("no predictors".into()));
        }
        for (i, p) in self.predictors.iter().enumerate() {
            if self.predictors[..i].contains(p) {
                return Err(GlmmError::InvalidSpec(format!("duplicate predictor `{p}`")));
            }
            if !PREDICTORS.contains(&p.as_str()) {
                return Err(GlmmError::InvalidSpec(format!("unknown predictor `{p}`")));
            }
        }
        if self.predictors.contains(&self.group) || self.group == self.response {
            return Err(GlmmError::InvalidSpec("group must be distinct from the other columns".into()));
        }
        if self.group != "county" {
            return Err(GlmmError::InvalidSpec(format!("unsupported group column `{}`", self.group)));
        }
        if self.response != "trl" {
            return Err(GlmmError::InvalidSpec(format!("unsupported response `{}`", self.response)));
        }
        if self.family != "Gamma" || self.link != "log" {
            return Err(GlmmError::InvalidSpec("only the Gamma family with log link is supported".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitControls {
    pub max_outer_iter: usize,
    pub max_inner_iter: usize,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub variance_floor: f64,
}

impl Default for FitControls {
    fn default() -> Self {
        FitControls {
            max_outer_iter: 200,
            max_inner_iter: 100,
            tol_inner: 1e-10,
            tol_outer: 1e-8,
            variance_floor: 1e-12,
        }
    }
}

impl FitControls {
    pub fn validate(&self) -> Result<(), GlmmError> {
        let ok = self.max_outer_iter > 0
            && self.max_inner_iter > 0
            && self.tol_inner > 0.0
            && self.tol_outer > 0.0
            && self.variance_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GlmmError::InvalidControls("all controls must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// sigma2_group sits at the variance floor.
    pub boundary_variance: bool,
    /// Fewer than two groups: the result is a plain GLM fit.
    pub single_group_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmmFit {
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub sigma2_group: f64,
    /// Observation-level variance on the latent scale, `ln(1 + 1/shape)`.
    pub sigma2_resid: f64,
    pub shape: f64,
    pub b_hat: Vec<f64>,
    pub group_names: Vec<String>,
    /// Variance of the fixed-effect linear predictor over rows.
    pub sigma2_fixed: f64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub r2_marginal: f64,
    pub r2_conditional: f64,
    pub n_obs: usize,
    pub n_groups: usize,
    pub k_params: usize,
    pub convergence: Convergence,
    /// Best objective value after each accepted outer iteration.
    pub outer_trace: Vec<f64>,
    pub standardization: Option<Standardization>,
}

impl GlmmFit {
    pub fn variance_partition(&self) -> Result<f64, GlmmError> {
        variance_partition(self.sigma2_group, self.sigma2_resid)
    }

    pub fn r2_nakagawa(&self) -> (f64, f64) {
        (self.r2_marginal, self.r2_conditional)
    }

    pub(crate) fn finish(&mut self) {
        let (m, c) = nakagawa_r2(self.sigma2_fixed, self.sigma2_group, self.shape);
        self.r2_marginal = m;
        self.r2_conditional = c;
        let ic = information_criteria(self.loglik, self.k_params, self.n_obs);
        self.aic = ic.aic;
        self.bic = ic.bic;
        for j in 0..self.beta.len() {
            let (t, p) = wald(self.beta[j], self.se[j]);
            self.t_stats.push(t);
            self.p_values.push(p);
        }
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    std::iter::once("(Intercept)".to_string())
        .chain((1..=p).map(|j| format!("x{j}")))
        .collect()
}

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

pub(crate) fn check_response(y: &[f64]) -> Result<(), GlmmError> {
    match y.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        Some(index) => Err(GlmmError::NonPositiveResponse { index, value: y[index] }),
        None => Ok(()),
    }
}

pub(crate) fn check_design(x: &DMatrix<f64>) -> Result<(), GlmmError> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(GlmmError::TooFewObservations { rows: n, coefficients: k });
    }
    let sv = x.singular_values();
    let ratio = sv.min() / sv.max();
    if !(ratio > 1e-10) {
        return Err(GlmmError::RankDeficientDesign { ratio });
    }
    Ok(())
}

/// Response, standardized design and group indices extracted from rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmmData {
    pub y: Vec<f64>,
    /// Intercept column followed by the z-scored predictors.
    pub x: DMatrix<f64>,
    /// Index into `group_names` per row.
    pub groups: Vec<usize>,
    /// Sorted distinct group labels.
    pub group_names: Vec<String>,
    pub standardization: Standardization,
}

impl GlmmData {
    pub fn prepare(rows: &[CovariateRow], spec: &ModelSpec) -> Result<Self, GlmmError> {
        spec.validate()?;
        let y: Vec<f64> = rows.iter().map(|r| r.trl).collect();
        check_response(&y)?;
        let cols: Vec<&str> = spec.predictors.iter().map(String::as_str).collect();
        let raw = covariates::column_matrix(rows, &cols)?;
        let k = cols.len() + 1;
        if rows.len() <= k {
            return Err(GlmmError::TooFewObservations { rows: rows.len(), coefficients: k });
        }
        let z = covariates::standardize(&raw)?;
        let x = with_intercept(&z.values);

        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rows {
            index.insert(r.group.as_str(), 0);
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let groups = rows.iter().map(|r| index[r.group.as_str()]).collect();
        let group_names = index.keys().map(|s| s.to_string()).collect();
        Ok(GlmmData {
            y,
            x,
            groups,
            group_names,
            standardization: Standardization {
                columns: spec.predictors.clone(),
                means: z.means,
                stds: z.stds,
            },
        })
    }
}

/// Fits the model of `spec` to covariate rows with a random intercept per
/// county. Predictors are z-scored first and estimates are reported on that
/// scale; the response is used as is.
pub fn fit_glmm(
    rows: &[CovariateRow],
    spec: &ModelSpec,
    controls: &FitControls,
) -> Result<GlmmFit, GlmmError> {
    controls.validate()?;
    let data = GlmmData::prepare(rows, spec)?;
    let mut fit = if data.group_names.len() < 2 {
        let mut f = fit_glm(&data.y, &data.x, controls)?;
        f.convergence.single_group_fallback = true;
        f.n_groups = data.group_names.len();
        f
    } else {
        LaplaceModel::new(data.y, data.x, data.groups, controls.clone())?.fit()?
    };
    fit.group_names = data.group_names;
    fit.names = std::iter::once("(Intercept)".to_string())
        .chain(spec.predictors.iter().cloned())
        .collect();
    fit.standardization = Some(data.standardization);
    Ok(fit)
}
