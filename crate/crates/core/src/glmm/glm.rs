use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::{check_design, check_response, default_names, Convergence, FitControls, GlmmError, GlmmFit};

/// Cap on the Pearson shape estimate when the fit is exact.
pub const MAX_SHAPE: f64 = 1e12;

/// Log density of a Gamma variate with mean `mu` and shape `shape`.
pub fn gamma_log_density(y: f64, mu: f64, shape: f64) -> f64 {
    shape * shape.ln() - shape * mu.ln() + (shape - 1.0) * y.ln() - shape * y / mu - ln_gamma(shape)
}

pub(crate) fn gamma_loglik(y: &[f64], mu: &[f64], shape: f64) -> f64 {
    y.iter().zip(mu).map(|(&y, &m)| gamma_log_density(y, m, shape)).sum()
}

fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| (y - m) / m - (y / m).ln())
        .sum::<f64>()
}

pub(crate) struct IrlsOutcome {
    pub beta: DVector<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// Upper-triangular factor of the design's QR decomposition.
    pub r: DMatrix<f64>,
}

/// Fisher scoring for the Gamma/log GLM. The working weights are constant
/// under this link, so every step is an ordinary least-squares solve against
/// the same QR factorization.
pub(crate) fn irls(y: &[f64], x: &DMatrix<f64>, controls: &FitControls) -> Result<IrlsOutcome, GlmmError> {
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let solve = |z: &DVector<f64>| -> DVector<f64> {
        r.solve_upper_triangular(&q.tr_mul(z))
            .expect("full-rank design has invertible R")
    };
    let linear = |beta: &DVector<f64>| -> Vec<f64> { (x * beta).iter().map(|e| e.exp()).collect() };

    let log_y = DVector::from_iterator(y.len(), y.iter().map(|v| v.ln()));
    let mut beta = solve(&log_y);
    let mut mu = linear(&beta);
    let mut dev = deviance(y, &mu);
    for it in 1..=controls.max_inner_iter {
        let eta = x * &beta;
        let z = DVector::from_iterator(
            y.len(),
            (0..y.len()).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]),
        );
        let target = solve(&z);
        let step = &target - &beta;
        let mut scale = 1.0;
        let (mut next, mut next_mu, mut next_dev);
        loop {
            next = &beta + &step * scale;
            next_mu = linear(&next);
            next_dev = deviance(y, &next_mu);
            if (next_dev.is_finite() && next_dev <= dev * (1.0 + 1e-12)) || scale < 1e-10 {
                break;
            }
            scale *= 0.5;
        }
        let change = (&next - &beta).amax();
        let size = next.amax().max(1.0);
        beta = next;
        mu = next_mu;
        dev = next_dev;
        if !dev.is_finite() {
            break;
        }
        if change <= controls.tol_inner * size {
            return Ok(IrlsOutcome {
                beta,
                mu,
                iterations: it,
                r,
            });
        }
    }
    Err(GlmmError::NoConvergence {
        stage: "IRLS",
        iterations: controls.max_inner_iter,
    })
}

pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Gamma/log GLM. `x` must already contain the intercept column.
///
/// The shape is the Pearson moment estimate and the log-likelihood is
/// evaluated at it; `k_params` counts the coefficients plus the shape.
pub fn fit_glm(y: &[f64], x: &DMatrix<f64>, controls: &FitControls) -> Result<GlmmFit, GlmmError> {
    controls.validate()?;
    check_response(y)?;
    if x.nrows() != y.len() {
        return Err(GlmmError::InvalidSpec(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    check_design(x)?;
    let (n, k) = x.shape();
    let out = irls(y, x, controls)?;
    let pearson: f64 = y
        .iter()
        .zip(&out.mu)
        .map(|(&y, &m)| ((y - m) / m).powi(2))
        .sum();
    // a perfect fit has no dispersion to estimate
    let shape = ((n - k) as f64 / pearson).min(MAX_SHAPE);
    if !(shape.is_finite() && shape > 0.0) {
        return Err(GlmmError::SingularInformation);
    }
    let r_inv = out
        .r
        .clone()
        .try_inverse()
        .ok_or(GlmmError::SingularInformation)?;
    let cov = &r_inv * r_inv.transpose() / shape;
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].sqrt()).collect();
    let eta: Vec<f64> = (x * &out.beta).iter().copied().collect();

    let mut fit = GlmmFit {
        names: default_names(k - 1),
        beta: out.beta.iter().copied().collect(),
        se,
        t_stats: Vec::with_capacity(k),
        p_values: Vec::with_capacity(k),
        sigma2_group: 0.0,
        sigma2_resid: (1.0 + 1.0 / shape).ln(),
        shape,
        b_hat: Vec::new(),
        group_names: Vec::new(),
        sigma2_fixed: sample_variance(&eta),
        loglik: gamma_loglik(y, &out.mu, shape),
        aic: 0.0,
        bic: 0.0,
        r2_marginal: 0.0,
        r2_conditional: 0.0,
        n_obs: n,
        n_groups: 0,
        k_params: k + 1,
        convergence: Convergence {
            converged: true,
            outer_iterations: 0,
            inner_iterations: out.iterations,
            boundary_variance: false,
            single_group_fallback: false,
        },
        outer_trace: Vec::new(),
        standardization: None,
    };
    fit.finish();
    Ok(fit)
}
