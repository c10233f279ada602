//! Box-bounded local minimizers: an adaptive Nelder-Mead simplex (default)
//! and a BFGS quasi-Newton method with finite-difference gradients.
//!
//! Both operate on the transformed parameter space and clip iterates to the
//! box. They are deterministic for fixed inputs.

/// Objective value returned when the model evaluation fails; large enough to
/// repel the search, finite so the simplex keeps moving.
pub const PENALTY: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct OptimOptions {
    pub max_iters: usize,
    /// Convergence tolerance on the objective spread (simplex) or gradient
    /// norm (quasi-Newton).
    pub tolerance: f64,
    /// Initial simplex displacement / line-search scale.
    pub initial_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            tolerance: 1e-8,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Nelder-Mead with the dimension-adaptive coefficients of Gao & Han, which
/// behave better than the classic constants in 10+ dimensions.
pub(crate) fn nelder_mead<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "empty parameter vector");
    let nf = n as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    };

    // Initial simplex: x0 plus a vertex displaced by the absolute step per
    // coordinate (the transformed space is already scale-free).
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    {
        let mut v0 = x0.to_vec();
        clip(&mut v0, bounds);
        simplex.push(v0);
    }
    for i in 0..n {
        let mut v = simplex[0].clone();
        let step = opts.initial_step;
        v[i] += if v[i] + step <= bounds[i].1 { step } else { -step };
        clip(&mut v, bounds);
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iters = 0usize;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        // Order vertices by objective.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| fvals[i].total_cmp(&fvals[j]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if fvals[worst] - fvals[best] <= opts.tolerance {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, xi) in centroid.iter_mut().zip(&simplex[i]) {
                *c += xi / nf;
            }
        }

        let point_along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clip(&mut p, bounds);
            p
        };

        let reflected = point_along(alpha);
        let f_reflected = eval(&reflected);

        if f_reflected < fvals[best] {
            let expanded = point_along(alpha * beta);
            let f_expanded = eval(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                fvals[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                fvals[worst] = f_reflected;
            }
        } else if f_reflected < fvals[second_worst] {
            simplex[worst] = reflected;
            fvals[worst] = f_reflected;
        } else if f_reflected < fvals[worst] {
            // Outside contraction.
            let contracted = point_along(alpha * gamma);
            let f_contracted = eval(&contracted);
            if f_contracted <= f_reflected {
                simplex[worst] = contracted;
                fvals[worst] = f_contracted;
            } else {
                shrink(&mut simplex, &mut fvals, best, delta, bounds, &mut eval);
            }
        } else {
            // Inside contraction.
            let contracted = point_along(-gamma);
            let f_contracted = eval(&contracted);
            if f_contracted < fvals[worst] {
                simplex[worst] = contracted;
                fvals[worst] = f_contracted;
            } else {
                shrink(&mut simplex, &mut fvals, best, delta, bounds, &mut eval);
            }
        }
    }

    let best = fvals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    OptimResult {
        x: simplex[best].clone(),
        f: fvals[best],
        iters,
        evals,
        converged,
    }
}

fn shrink<F>(
    simplex: &mut [Vec<f64>],
    fvals: &mut [f64],
    best: usize,
    delta: f64,
    bounds: &[(f64, f64)],
    eval: &mut F,
) where
    F: FnMut(&[f64]) -> f64,
{
    let anchor = simplex[best].clone();
    for i in 0..simplex.len() {
        if i == best {
            continue;
        }
        for (v, a) in simplex[i].iter_mut().zip(&anchor) {
            *v = a + delta * (*v - a);
        }
        clip(&mut simplex[i], bounds);
        fvals[i] = eval(&simplex[i]);
    }
}

/// BFGS with central finite-difference gradients and a backtracking Armijo
/// line search, iterates clipped to the box.
pub(crate) fn quasi_newton<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    };

    let grad_step = 1e-6;
    let gradient = |x: &[f64], eval: &mut dyn FnMut(&[f64]) -> f64| -> Vec<f64> {
        let mut g = vec![0.0; n];
        let mut xp = x.to_vec();
        for i in 0..n {
            let h = grad_step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = eval(&xp);
            xp[i] = x[i] - h;
            let fm = eval(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    };

    let mut x = x0.to_vec();
    clip(&mut x, bounds);
    let mut fx = eval(&x);
    let mut g = gradient(&x, &mut eval);
    // Inverse Hessian approximation.
    let mut h_inv = vec![vec![0.0; n]; n];
    for (i, row) in h_inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut iters = 0usize;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= opts.tolerance.max(1e-10) {
            converged = true;
            break;
        }
        // Search direction d = -H_inv g.
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= h_inv[i][j] * g[j];
            }
        }
        let descent: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        if descent >= 0.0 {
            // Reset to steepest descent if curvature info went bad.
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            for (i, row) in h_inv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
        }

        // Backtracking Armijo line search.
        let slope: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        let mut step = opts.initial_step.max(1e-3);
        let mut x_new = x.clone();
        let mut f_new = fx;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            clip(&mut x_new, bounds);
            f_new = eval(&x_new);
            if f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || f_new >= fx {
            converged = (fx - f_new).abs() <= opts.tolerance;
            break;
        }

        let g_new = gradient(&x_new, &mut eval);
        // BFGS inverse update.
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += h_inv[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    OptimResult {
        x,
        f: fx,
        iters,
        evals,
        converged,
    }
}
