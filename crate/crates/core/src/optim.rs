//! Spectral projected gradient descent over box constraints.
//!
//! Minimizes a smooth convex function over `x >= lower` (coordinates with
//! `lower = -inf` are unconstrained). The step length is the safeguarded
//! Barzilai-Borwein step with a non-monotone Armijo line search, the SPG2
//! scheme of Birgin, Martinez and Raydan. All model fits in this crate
//! reduce to this routine or to exact closed-form solves.

/// Options for [`spg_minimize`].
#[derive(Debug, Clone)]
pub struct SpgOptions {
    /// Convergence threshold on the projected-gradient sup-norm, relative
    /// to `max(1, |f|)`.
    pub tol_rel: f64,
    pub max_iter: usize,
    /// History length of the non-monotone line search.
    pub memory: usize,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-7,
            max_iter: 20_000,
            memory: 10,
        }
    }
}

/// Result of a projected-gradient run.
#[derive(Debug, Clone)]
pub struct SpgResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sup-norm of the projected gradient at the final iterate.
    pub pg_sup_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value per iteration.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lower: &[f64]) {
    for (xi, &lo) in x.iter_mut().zip(lower) {
        if *xi < lo {
            *xi = lo;
        }
    }
}

fn pg_sup_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    // Projected gradient: at an active lower bound only the inward
    // (negative) gradient component counts; this encodes the KKT sign
    // condition on active bounds.
    let mut sup = 0.0f64;
    for i in 0..x.len() {
        let pg = if x[i] <= lower[i] { g[i].min(0.0) } else { g[i] };
        sup = sup.max(pg.abs());
    }
    sup
}

/// Minimize `f` over the box `x >= lower`.
///
/// `eval` writes the gradient into its second argument and returns the
/// objective value; it may return `f64::INFINITY` outside the domain.
pub fn spg_minimize<F>(
    mut eval: F,
    x0: Vec<f64>,
    lower: &[f64],
    opts: &SpgOptions,
) -> SpgResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    project(&mut x, lower);
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g);
    let mut trace = vec![f];
    let mut recent: Vec<f64> = vec![f];

    let mut pg = pg_sup_norm(&x, &g, lower);
    let mut step = if pg > 0.0 { (1.0 / pg).clamp(1e-10, 1e10) } else { 1.0 };
    let gamma = 1e-4;

    let mut iterations = 0;
    let mut converged = pg <= opts.tol_rel * f.abs().max(1.0);

    while !converged && iterations < opts.max_iter {
        iterations += 1;

        // Trial direction: projected BB step.
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = (x[i] - step * g[i]).max(lower[i]) - x[i];
        }
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gd >= 0.0 {
            // No descent available along the projected arc.
            break;
        }
        let f_ref = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut alpha = 1.0;
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut f_new;
        loop {
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
            }
            f_new = eval(&x_new, &mut g_new);
            if f_new <= f_ref + gamma * alpha * gd {
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                // Line search failed; accept the best point seen and stop.
                x_new.copy_from_slice(&x);
                g_new.copy_from_slice(&g);
                f_new = f;
                break;
            }
        }

        // BB1 step from the accepted move.
        let mut sty = 0.0;
        let mut sts = 0.0;
        for i in 0..n {
            let s = x_new[i] - x[i];
            let y = g_new[i] - g[i];
            sty += s * y;
            sts += s * s;
        }
        step = if sty > 0.0 {
            (sts / sty).clamp(1e-10, 1e10)
        } else {
            1.0
        };

        if sts == 0.0 {
            // Stalled line search: report current status.
            x = x_new;
            g = g_new;
            f = f_new;
            trace.push(f);
            break;
        }

        x = x_new;
        g = g_new;
        f = f_new;
        trace.push(f);
        recent.push(f);
        if recent.len() > opts.memory {
            recent.remove(0);
        }

        pg = pg_sup_norm(&x, &g, lower);
        converged = pg <= opts.tol_rel * f.abs().max(1.0);
    }

    SpgResult {
        pg_sup_norm: pg_sup_norm(&x, &g, lower),
        x,
        objective: f,
        iterations,
        converged,
        trace,
    }
}
