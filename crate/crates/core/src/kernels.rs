//! Sums-of-exponentials Hawkes kernels, their norms and the stability check.
//!
//! Every interaction kernel in the toolkit has the form
//!
//! ```text
//! phi[l][m](t) = sum_u alpha[l][m][u] * beta[u] * exp(-beta[u] * t)
//! ```
//!
//! so that `integral phi[l][m] = sum_u alpha[l][m][u]`. The decay grid
//! `beta` is a hyper-parameter shared by all kernels; the coefficient
//! tensor `alpha` is fitted. The process is stable when the spectral
//! radius of the kernel-norm matrix is strictly below one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of exponential decay rates, strictly positive and strictly
/// increasing (canonical order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySet {
    betas: Vec<f64>,
}

impl DecaySet {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain("decay set must not be empty".into()));
        }
        for w in betas.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain(format!(
                    "decays must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if betas[0] <= 0.0 || !betas.iter().all(|b| b.is_finite()) {
            return Err(Error::Domain("decays must be finite and positive".into()));
        }
        Ok(Self { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Number of exponential terms per kernel.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// Coefficient tensor `alpha[l][m][u]` for a D-type model with U decays.
///
/// Coefficients are non-negative when produced by maximum likelihood and
/// sign-unrestricted when produced by least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCoeffs {
    dim: usize,
    n_decays: usize,
    alphas: Vec<f64>,
}

impl KernelCoeffs {
    /// All-zero tensor for a `dim`-type model with `n_decays` decays.
    pub fn zeros(dim: usize, n_decays: usize) -> Self {
        Self {
            dim,
            n_decays,
            alphas: vec![0.0; dim * dim * n_decays],
        }
    }

    pub fn from_flat(dim: usize, n_decays: usize, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != dim * dim * n_decays {
            return Err(Error::Domain(format!(
                "alpha tensor length {} does not match {}x{}x{}",
                alphas.len(),
                dim,
                dim,
                n_decays
            )));
        }
        Ok(Self { dim, n_decays, alphas })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_decays(&self) -> usize {
        self.n_decays
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, u: usize) -> f64 {
        self.alphas[(l * self.dim + m) * self.n_decays + u]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, u: usize, v: f64) {
        self.alphas[(l * self.dim + m) * self.n_decays + u] = v;
    }

    /// Flat view in `[l][m][u]` row-major order.
    pub fn flat(&self) -> &[f64] {
        &self.alphas
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.alphas
    }
}

/// Kernel value `phi[l][m](t) = sum_u alpha[l][m][u] beta[u] exp(-beta[u] t)`.
pub fn eval_kernel(
    coeffs: &KernelCoeffs,
    decays: &DecaySet,
    l: usize,
    m: usize,
    t: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("kernel evaluated at negative lag {t}")));
    }
    let mut v = 0.0;
    for (u, &beta) in decays.betas().iter().enumerate() {
        v += coeffs.get(l, m, u) * beta * (-beta * t).exp();
    }
    Ok(v)
}

/// Matrix of kernel norms `|phi[l][m]| = sum_u alpha[l][m][u]`.
pub fn kernel_norms(coeffs: &KernelCoeffs) -> Vec<Vec<f64>> {
    let d = coeffs.dim();
    let mut norms = vec![vec![0.0; d]; d];
    for l in 0..d {
        for m in 0..d {
            for u in 0..coeffs.n_decays() {
                norms[l][m] += coeffs.get(l, m, u);
            }
        }
    }
    norms
}

const POWER_ITER_MAX: usize = 1 << 21;
const POWER_ITER_RTOL: f64 = 1e-10;

/// Spectral radius of an entrywise non-negative square matrix by shifted
/// power iteration.
///
/// A diagonal shift makes the Perron root strictly dominant, so the
/// iteration converges even for periodic patterns such as `[[0,a],[b,0]]`.
/// When the Perron root carries a Jordan block (triangular matrices with
/// equal norms) the iterates approach the limit like `rho + c/k`;
/// Richardson extrapolation over power-of-two checkpoints removes that
/// tail exactly, and it is harmless on geometric tails.
pub fn spectral_radius(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    for row in matrix {
        if row.len() != n {
            return Err(Error::Domain("matrix must be square".into()));
        }
        if row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain(
                "spectral radius requires entrywise non-negative finite matrix".into(),
            ));
        }
    }
    let row_sum_max = matrix
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    if row_sum_max == 0.0 {
        return Ok(0.0);
    }
    // Shift keeps convergence geometric without flattening the spectrum.
    let shift = 0.25 * row_sum_max;

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut rho_prev = f64::NAN;
    let mut checkpoint = 1usize;
    let mut rho_at_checkpoint = f64::NAN;
    let mut extrapolated_prev = f64::NAN;
    let mut trace: Vec<f64> = Vec::new();
    for k in 1..=POWER_ITER_MAX {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut acc = shift * v[i];
            for j in 0..n {
                acc += matrix[i][j] * v[j];
            }
            w[i] = acc;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for x in &mut w {
            *x /= norm;
        }
        let rho = (norm - shift).max(0.0);
        if rho_prev.is_finite() && (rho - rho_prev).abs() <= 1e-13 * rho.max(1e-300) {
            return Ok(rho); // geometric tail already flat
        }
        if k == checkpoint {
            if rho_at_checkpoint.is_finite() {
                let extrapolated = (2.0 * rho - rho_at_checkpoint).max(0.0);
                trace.push(extrapolated);
                if extrapolated_prev.is_finite()
                    && (extrapolated - extrapolated_prev).abs()
                        <= POWER_ITER_RTOL * extrapolated.max(1e-300)
                {
                    return Ok(extrapolated);
                }
                extrapolated_prev = extrapolated;
            }
            rho_at_checkpoint = rho;
            checkpoint *= 2;
        }
        rho_prev = rho;
        v = w;
    }
    let tail: Vec<f64> = trace.iter().rev().take(5).rev().copied().collect();
    Err(Error::Numeric(format!(
        "power iteration did not converge after {POWER_ITER_MAX} iterations; last extrapolants {tail:?}"
    )))
}

/// Outcome of the ergodicity check on the kernel-norm matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
}

/// Stable iff the spectral radius of the kernel-norm matrix is strictly
/// below one; the boundary case is classified unstable.
pub fn stability_check(coeffs: &KernelCoeffs) -> Result<StabilityReport> {
    let norms = kernel_norms(coeffs);
    // Negative norms can come out of least-squares fits; the ergodicity
    // argument applies to the absolute values.
    let abs: Vec<Vec<f64>> = norms
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).collect())
        .collect();
    let rho = spectral_radius(&abs)?;
    Ok(StabilityReport {
        stable: rho < 1.0,
        spectral_radius: rho,
    })
}
