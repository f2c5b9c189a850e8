//! Derivative-free minimizers used by the outer variance-parameter search.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values drops below this...
    pub f_tol: f64,
    /// ...and the simplex diameter drops below this. A spread below
    /// `f_tol * 1e-3` stops regardless of diameter (flat directions).
    pub x_tol: f64,
    /// Per-coordinate box; points are projected into it.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` starting from the simplex `x0, x0 + step_i e_i`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let d = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    project(&mut start, &opts.lower, &opts.upper);
    simplex.push(start.clone());
    for i in 0..d {
        let mut p = start.clone();
        p[i] += step[i];
        project(&mut p, &opts.lower, &opts.upper);
        if p[i] == start[i] {
            p[i] -= step[i];
            project(&mut p, &opts.lower, &opts.upper);
        }
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.is_finite()
            && ((spread <= opts.f_tol && diameter <= opts.x_tol) || spread <= opts.f_tol * 1e-3)
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, &opts.lower, &opts.upper);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let (xc, fc) = if fr < values[d] {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let mut p: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    project(&mut p, &opts.lower, &opts.upper);
                    values[i] = eval(&p);
                    simplex[i] = p;
                }
            }
        }
        trace.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("non-empty simplex");
    NelderMeadResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
        trace,
    }
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
