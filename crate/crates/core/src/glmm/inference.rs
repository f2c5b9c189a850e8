use serde::Serialize;
use statrs::function::erf::erfc;

use super::{GlmmError, GlmmFit};

/// `2 * Phi(-|t|)`.
pub fn normal_two_sided_p(t: f64) -> f64 {
    erfc(t.abs() / std::f64::consts::SQRT_2)
}

/// Wald statistic and its two-sided normal p-value.
pub fn wald(beta: f64, se: f64) -> (f64, f64) {
    let t = beta / se;
    (t, normal_two_sided_p(t))
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 1e-4 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn exp_coefficient(beta: f64) -> f64 {
    beta.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub exp_estimate: f64,
    pub stars: &'static str,
}

pub fn wald_table(fit: &GlmmFit) -> Vec<CoefficientRow> {
    (0..fit.beta.len())
        .map(|j| {
            let (t, p) = wald(fit.beta[j], fit.se[j]);
            CoefficientRow {
                name: fit.names[j].clone(),
                estimate: fit.beta[j],
                se: fit.se[j],
                t,
                p,
                exp_estimate: exp_coefficient(fit.beta[j]),
                stars: significance_stars(p),
            }
        })
        .collect()
}

/// Share of latent-scale variance attributable to the grouping factor.
pub fn variance_partition(sigma2_group: f64, sigma2_resid: f64) -> Result<f64, GlmmError> {
    let total = sigma2_group + sigma2_resid;
    if !(total > 0.0) {
        return Err(GlmmError::ZeroTotalVariance);
    }
    Ok(sigma2_group / total)
}

/// Marginal and conditional R² with the lognormal approximation
/// `ln(1 + 1/shape)` for the observation-level variance.
pub fn nakagawa_r2(sigma2_fixed: f64, sigma2_group: f64, shape: f64) -> (f64, f64) {
    let sigma2_d = (1.0 + 1.0 / shape).ln();
    let total = sigma2_fixed + sigma2_group + sigma2_d;
    if !(total > 0.0) || !total.is_finite() {
        return (0.0, 0.0);
    }
    (sigma2_fixed / total, (sigma2_fixed + sigma2_group) / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

pub fn information_criteria(loglik: f64, k_params: usize, n_obs: usize) -> InformationCriteria {
    let k = k_params as f64;
    InformationCriteria {
        aic: -2.0 * loglik + 2.0 * k,
        bic: -2.0 * loglik + k * (n_obs as f64).ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_examples() {
        let (t, _) = wald(0.632, 0.139);
        assert!((t - 4.547).abs() < 5e-4);
        assert!((t - 4.539).abs() < 0.01);
        let (t, _) = wald(0.141, 0.066);
        assert!((t - 2.136).abs() < 5e-4);
        assert!((t - 2.140).abs() < 0.01);
        assert_eq!(wald(0.0, 0.3), (0.0, 1.0));
    }

    #[test]
    fn normal_p_values() {
        let p = normal_two_sided_p(1.959963984540054);
        assert!((p - 0.05).abs() < 1e-10, "{p:e}");
        assert!((normal_two_sided_p(-1.6448536269514722) - 0.10).abs() < 1e-10);
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(5e-5), "***");
        assert_eq!(significance_stars(0.001), "**");
        assert_eq!(significance_stars(0.07), "*");
        assert_eq!(significance_stars(0.5), "");
    }

    #[test]
    fn exponentiated() {
        assert!((exp_coefficient(0.141) - 1.1514).abs() < 5e-5);
        assert_eq!(format!("{:.2}", exp_coefficient(0.632)), "1.88");
        assert_eq!(exp_coefficient(0.0), 1.0);
    }

    #[test]
    fn partition() {
        let f = variance_partition(0.1185, 0.3250).unwrap();
        assert!((f - 0.2672).abs() < 5e-5);
        assert_eq!((f * 100.0).round(), 27.0);
        assert_eq!(variance_partition(0.0, 0.4).unwrap(), 0.0);
        assert_eq!(variance_partition(0.4, 0.0).unwrap(), 1.0);
        assert_eq!(variance_partition(0.0, 0.0), Err(GlmmError::ZeroTotalVariance));
    }

    #[test]
    fn r2_examples() {
        assert_eq!(nakagawa_r2(0.0, 0.0, 3.0), (0.0, 0.0));
        let (m, c) = nakagawa_r2(0.4, 0.0, 3.0);
        assert_eq!(m, c);
        let (m, c) = nakagawa_r2(0.4, 0.2, 3.0);
        assert!(0.0 <= m && m <= c && c <= 1.0);
    }

    #[test]
    fn criteria() {
        let ic = information_criteria(-295.0, 11, 166);
        assert_eq!(ic.aic, 612.0);
        assert!((ic.bic - 646.2319).abs() < 1e-3);
        assert_eq!(ic.bic.round(), 646.0);
        assert_eq!(information_criteria(0.0, 0, 1), InformationCriteria { aic: 0.0, bic: 0.0 });
        let ic = information_criteria(-10.0, 2, 100);
        assert_eq!(ic.aic, 24.0);
        assert!((ic.bic - 29.2103).abs() < 1e-4);
    }
}
