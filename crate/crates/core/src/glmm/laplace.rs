//! Laplace-approximated marginal likelihood for the random-intercept model.
//!
//! The random effects are written `b = sigma * v` with `v ~ N(0, 1)`, which
//! keeps the inner problem well conditioned as `sigma -> 0`. For fixed
//! `(sigma2, shape)` the joint mode of `(beta, v)` is found by Newton's method
//! on the penalized log-likelihood; the random-effect block of its Hessian is
//! diagonal, so each step eliminates it and solves a `k x k` system.

use nalgebra::{DMatrix, DVector};

use super::glm::{gamma_loglik, irls, sample_variance};
use super::optim::{golden_section_max, nelder_mead, NelderMeadOptions};
use super::{check_design, check_response, default_names, Convergence, FitControls, GlmmError, GlmmFit};

/// Simplex diameter (in log-parameter units) required for outer convergence.
const OUTER_STEP_TOL: f64 = 1e-6;
const LOG_SHAPE_RANGE: (f64, f64) = (-10.0, 20.0);
const LOG_SIGMA2_MAX: f64 = 7.0;

/// Joint mode of the fixed and random effects at given variance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMode {
    pub beta: Vec<f64>,
    /// Random intercepts on the response-link scale.
    pub b: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
struct Mode {
    beta: DVector<f64>,
    v: Vec<f64>,
    iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LaplaceModel {
    y: Vec<f64>,
    x: DMatrix<f64>,
    groups: Vec<usize>,
    members: Vec<Vec<usize>>,
    controls: FitControls,
    start_beta: DVector<f64>,
}

impl LaplaceModel {
    /// `x` includes the intercept column; `groups[i]` indexes `0..n_groups`
    /// and every index in that range must occur.
    pub fn new(
        y: Vec<f64>,
        x: DMatrix<f64>,
        groups: Vec<usize>,
        controls: FitControls,
    ) -> Result<Self, GlmmError> {
        controls.validate()?;
        check_response(&y)?;
        if x.nrows() != y.len() || groups.len() != y.len() {
            return Err(GlmmError::InvalidSpec("response, design and groups differ in length".into()));
        }
        check_design(&x)?;
        let q = groups.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); q];
        for (i, &g) in groups.iter().enumerate() {
            members[g].push(i);
        }
        if members.iter().any(Vec::is_empty) {
            return Err(GlmmError::InvalidSpec("group indices must be contiguous".into()));
        }
        if q < 2 {
            return Err(GlmmError::InvalidSpec("at least two groups are required".into()));
        }
        let start_beta = irls(&y, &x, &controls)?.beta;
        Ok(LaplaceModel {
            y,
            x,
            groups,
            members,
            controls,
            start_beta,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.members.len()
    }

    fn eta(&self, beta: &DVector<f64>, v: &[f64], sigma: f64) -> Vec<f64> {
        let fixed = &self.x * beta;
        (0..self.y.len())
            .map(|i| fixed[i] + sigma * v[self.groups[i]])
            .collect()
    }

    /// Penalized log-likelihood up to terms constant in `(beta, v)`.
    fn penalized(&self, eta: &[f64], v: &[f64], shape: f64) -> f64 {
        let fit: f64 = eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| -e - y * (-e).exp())
            .sum();
        shape * fit - 0.5 * v.iter().map(|u| u * u).sum::<f64>()
    }

    fn solve_mode(&self, sigma2: f64, shape: f64, start: Option<&Mode>) -> Result<Mode, GlmmError> {
        let (n, k) = self.x.shape();
        let q = self.members.len();
        let sigma = sigma2.sqrt();
        let (mut beta, mut v) = match start {
            Some(m) => (m.beta.clone(), m.v.clone()),
            None => (self.start_beta.clone(), vec![0.0; q]),
        };
        let mut eta = self.eta(&beta, &v, sigma);
        let mut pl = self.penalized(&eta, &v, shape);
        if !pl.is_finite() {
            beta = self.start_beta.clone();
            v = vec![0.0; q];
            eta = self.eta(&beta, &v, sigma);
            pl = self.penalized(&eta, &v, shape);
        }

        for it in 1..=self.controls.max_inner_iter {
            let mut r = vec![0.0; n];
            let mut w = vec![0.0; n];
            for i in 0..n {
                let ratio = self.y[i] * (-eta[i]).exp();
                r[i] = shape * (ratio - 1.0);
                w[i] = shape * ratio;
            }
            let g_beta = self.x.tr_mul(&DVector::from_column_slice(&r));
            let mut a = DMatrix::<f64>::zeros(k, k);
            for i in 0..n {
                let row = self.x.row(i);
                for c in 0..k {
                    let wc = w[i] * row[c];
                    for d in 0..=c {
                        a[(c, d)] += wc * row[d];
                    }
                }
            }
            let mut s = a;
            let mut rhs = g_beta;
            let mut bcols = DMatrix::<f64>::zeros(k, q);
            let mut diag = vec![0.0; q];
            let mut g_v = vec![0.0; q];
            for (g, idx) in self.members.iter().enumerate() {
                let mut wsum = 0.0;
                let mut rsum = 0.0;
                for &i in idx {
                    wsum += w[i];
                    rsum += r[i];
                    for c in 0..k {
                        bcols[(c, g)] += sigma * w[i] * self.x[(i, c)];
                    }
                }
                diag[g] = sigma2 * wsum + 1.0;
                g_v[g] = sigma * rsum - v[g];
                let col = bcols.column(g);
                for c in 0..k {
                    rhs[c] -= col[c] * g_v[g] / diag[g];
                    for d in 0..=c {
                        s[(c, d)] -= col[c] * col[d] / diag[g];
                    }
                }
            }
            for c in 0..k {
                for d in 0..c {
                    s[(d, c)] = s[(c, d)];
                }
            }
            let d_beta = s
                .cholesky()
                .ok_or(GlmmError::SingularInformation)?
                .solve(&rhs);
            let d_v: Vec<f64> = (0..q)
                .map(|g| (g_v[g] - bcols.column(g).dot(&d_beta)) / diag[g])
                .collect();

            let mut scale = 1.0;
            let accepted = loop {
                let nb = &beta + &d_beta * scale;
                let nv: Vec<f64> = v.iter().zip(&d_v).map(|(a, b)| a + scale * b).collect();
                let ne = self.eta(&nb, &nv, sigma);
                let npl = self.penalized(&ne, &nv, shape);
                if npl.is_finite() && npl >= pl - 1e-13 * (1.0 + pl.abs()) {
                    break Some((nb, nv, ne, npl));
                }
                scale *= 0.5;
                if scale < 1e-12 {
                    break None;
                }
            };
            let Some((nb, nv, ne, npl)) = accepted else {
                break;
            };
            let step = d_beta
                .iter()
                .chain(&d_v)
                .fold(0.0f64, |m, d| m.max((d * scale).abs()));
            let size = nb.iter().chain(&nv).fold(1.0f64, |m, u| m.max(u.abs()));
            beta = nb;
            v = nv;
            eta = ne;
            pl = npl;
            if step <= self.controls.tol_inner * size {
                return Ok(Mode {
                    beta,
                    v,
                    iterations: it,
                });
            }
        }
        Err(GlmmError::NoConvergence {
            stage: "penalized IRLS",
            iterations: self.controls.max_inner_iter,
        })
    }

    fn laplace_at(&self, sigma2: f64, shape: f64, mode: &Mode) -> f64 {
        let sigma = sigma2.sqrt();
        let eta = self.eta(&mode.beta, &mode.v, sigma);
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let mut logdet = 0.0;
        for idx in &self.members {
            let wsum: f64 = idx.iter().map(|&i| shape * self.y[i] / mu[i]).sum();
            logdet += (1.0 + sigma2 * wsum).ln();
        }
        gamma_loglik(&self.y, &mu, shape) - 0.5 * mode.v.iter().map(|u| u * u).sum::<f64>() - 0.5 * logdet
    }

    pub fn conditional_mode(&self, sigma2: f64, shape: f64) -> Result<ConditionalMode, GlmmError> {
        let m = self.solve_mode(sigma2, shape, None)?;
        let sigma = sigma2.sqrt();
        Ok(ConditionalMode {
            beta: m.beta.iter().copied().collect(),
            b: m.v.iter().map(|v| sigma * v).collect(),
            iterations: m.iterations,
        })
    }

    /// Laplace approximation to the marginal log-likelihood.
    pub fn objective(&self, sigma2: f64, shape: f64) -> Result<f64, GlmmError> {
        let m = self.solve_mode(sigma2, shape, None)?;
        Ok(self.laplace_at(sigma2, shape, &m))
    }

    /// Gradient of the joint penalized log-likelihood with respect to
    /// `(beta, b)`, where `b` has prior variance `sigma2`.
    pub fn penalized_score(&self, sigma2: f64, shape: f64, beta: &[f64], b: &[f64]) -> Vec<f64> {
        let fixed = &self.x * DVector::from_column_slice(beta);
        let r: Vec<f64> = (0..self.y.len())
            .map(|i| shape * (self.y[i] * (-(fixed[i] + b[self.groups[i]])).exp() - 1.0))
            .collect();
        let mut out: Vec<f64> = self.x.tr_mul(&DVector::from_column_slice(&r)).iter().copied().collect();
        for (g, idx) in self.members.iter().enumerate() {
            out.push(idx.iter().map(|&i| r[i]).sum::<f64>() - b[g] / sigma2);
        }
        out
    }

    /// Standard errors of `beta` from the inverse of the penalized Fisher
    /// information.
    fn fixed_effect_se(&self, sigma2: f64, shape: f64) -> Result<Vec<f64>, GlmmError> {
        let k = self.x.ncols();
        let sigma = sigma2.sqrt();
        let mut s = self.x.tr_mul(&self.x) * shape;
        for idx in &self.members {
            let mut col = DVector::<f64>::zeros(k);
            for &i in idx {
                col += self.x.row(i).transpose();
            }
            col *= sigma * shape;
            let d = sigma2 * shape * idx.len() as f64 + 1.0;
            s -= &col * col.transpose() / d;
        }
        let inv = s
            .cholesky()
            .ok_or(GlmmError::SingularInformation)?
            .inverse();
        Ok((0..k).map(|j| inv[(j, j)].sqrt()).collect())
    }

    pub fn fit(&self) -> Result<GlmmFit, GlmmError> {
        let floor = self.controls.variance_floor;
        let lower = [floor.ln(), LOG_SHAPE_RANGE.0];
        let upper = [LOG_SIGMA2_MAX.max(floor.ln() + 1.0), LOG_SHAPE_RANGE.1];
        let mut warm: Option<Mode> = None;
        let mut inner_total = 0usize;
        let mut evaluate = |sigma2: f64, shape: f64, warm: &mut Option<Mode>| -> Option<f64> {
            let mode = self.solve_mode(sigma2, shape, warm.as_ref()).ok()?;
            inner_total += mode.iterations;
            let value = self.laplace_at(sigma2, shape, &mode);
            *warm = Some(mode);
            value.is_finite().then_some(value)
        };

        let nm = nelder_mead(
            |theta| {
                evaluate(theta[0].exp(), theta[1].exp(), &mut warm).map_or(f64::INFINITY, |v| -v)
            },
            &[0.1f64.ln(), 0.0],
            &[1.0, 1.0],
            &NelderMeadOptions {
                max_iter: self.controls.max_outer_iter,
                f_tol: self.controls.tol_outer,
                x_tol: OUTER_STEP_TOL,
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            },
        );

        let mut boundary_warm = None;
        let (log_shape_b, ll_b) = golden_section_max(
            |t| evaluate(floor, t.exp(), &mut boundary_warm).unwrap_or(f64::NEG_INFINITY),
            LOG_SHAPE_RANGE.0,
            LOG_SHAPE_RANGE.1,
            1e-10,
        );

        let interior_ll = -nm.f;
        let (sigma2, shape, boundary) = if ll_b.is_finite() && ll_b >= interior_ll {
            (floor, log_shape_b.exp(), true)
        } else if nm.converged && interior_ll.is_finite() {
            let sigma2 = nm.x[0].exp().max(floor);
            (sigma2, nm.x[1].exp(), nm.x[0] <= lower[0])
        } else {
            return Err(GlmmError::NoConvergence {
                stage: "outer variance search",
                iterations: nm.iterations,
            });
        };

        let start = if boundary { boundary_warm } else { warm };
        let mode = self.solve_mode(sigma2, shape, start.as_ref())?;
        let loglik = self.laplace_at(sigma2, shape, &mode);
        let se = self.fixed_effect_se(sigma2, shape)?;
        let sigma = sigma2.sqrt();
        let fixed: Vec<f64> = (&self.x * &mode.beta).iter().copied().collect();
        let (n, k) = self.x.shape();

        let mut fit = GlmmFit {
            names: default_names(k - 1),
            beta: mode.beta.iter().copied().collect(),
            se,
            t_stats: Vec::with_capacity(k),
            p_values: Vec::with_capacity(k),
            sigma2_group: sigma2,
            sigma2_resid: (1.0 + 1.0 / shape).ln(),
            shape,
            b_hat: mode.v.iter().map(|v| sigma * v).collect(),
            group_names: Vec::new(),
            sigma2_fixed: sample_variance(&fixed),
            loglik,
            aic: 0.0,
            bic: 0.0,
            r2_marginal: 0.0,
            r2_conditional: 0.0,
            n_obs: n,
            n_groups: self.members.len(),
            k_params: k + 2,
            convergence: Convergence {
                converged: true,
                outer_iterations: nm.iterations,
                inner_iterations: inner_total + mode.iterations,
                boundary_variance: boundary,
                single_group_fallback: false,
            },
            outer_trace: nm.trace.iter().map(|f| -f).collect(),
            standardization: None,
        };
        fit.finish();
        Ok(fit)
    }
}
