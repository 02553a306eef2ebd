//! Small dense symmetric solves for the least-squares normal equations.

use crate::error::{Error, Result};

/// Solve `A x = b` for symmetric positive semi-definite `A` (row-major,
/// n*n) by Cholesky factorization.
///
/// If the factorization stalls on a non-positive pivot the system is
/// re-solved with a ridge of `ridge * trace(A)/n` added to the diagonal
/// and `ridged` is reported to the caller.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize, ridge: f64) -> Result<(Vec<f64>, bool)> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    match cholesky_solve(a, b, n) {
        Some(x) => Ok((x, false)),
        None => {
            let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
            let lam = ridge * (trace / n as f64).max(1.0);
            let mut ar = a.to_vec();
            for i in 0..n {
                ar[i * n + i] += lam;
            }
            match cholesky_solve(&ar, b, n) {
                Some(x) => Ok((x, true)),
                None => Err(Error::Numeric(
                    "normal equations not positive definite even after ridge".into(),
                )),
            }
        }
    }
}

fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    // Lower-triangular factor L with A = L L^T.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}
