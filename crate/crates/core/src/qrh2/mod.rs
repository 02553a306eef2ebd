//! Two-sided queue-reactive Hawkes model (QRH-II).
//!
//! Eight event types describe the best bid/ask flow: midprice moves
//! `P+`/`P-` plus limit, cancel and market orders on either side that
//! leave the midprice unchanged. The intensity of type `l` is
//!
//! ```text
//! lambda[l](t) = f[l](state(t-)) * (mu[l] + sum_m sum_u alpha[l][m][u] g[m][u](t))
//! ```
//!
//! where the state is the pair of per-side queue-size quantile buckets
//! and `f[l]` is normalized to one on the lowest-bucket pair. In the
//! clamped variant the parenthesis is replaced by its positive part,
//! which keeps intensities meaningful when least-squares estimation
//! produces inhibitory (negative) kernels.
//!
//! There is no intra-day reset: the memory runs from market open to
//! close, and the state path is exogenous (read from data or replayed).

mod cache;
mod eval;
mod fit;

pub use cache::{precompute_ls, LsCache, Qrh2Data};
pub use eval::{
    event_intensities_qrh2, intensity_qrh2, loglik_qrh2, ls_objective, time_rescaling_residuals_qrh2,
    IntensityMode, Qrh2Grad,
};
pub use fit::{fit_qrh2_ls, fit_qrh2_mle, Qrh2FitOptions, Qrh2FitResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DecaySet, KernelCoeffs};
use crate::lob::StateGrid;

/// Full QRH-II parameter set.
///
/// `f[l][s]` are the multiplicative state factors over the flattened
/// bucket grid with the gauge `f[l][0] = 1` (lowest ask and bid buckets).
/// Kernel coefficients are non-negative in maximum-likelihood mode and
/// sign-unrestricted in least-squares mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qrh2Params {
    pub decays: DecaySet,
    pub coeffs: KernelCoeffs,
    pub mu: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub n_states: usize,
}

impl Qrh2Params {
    /// Unit state factors, zero kernels and zero baselines.
    pub fn flat(decays: DecaySet, dim: usize, n_states: usize) -> Self {
        let u = decays.len();
        Self {
            coeffs: KernelCoeffs::zeros(dim, u),
            mu: vec![0.0; dim],
            f: vec![vec![1.0; n_states]; dim],
            n_states,
            decays,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.coeffs.dim() != d || self.f.len() != d {
            return Err(Error::Domain("parameter dimensions disagree".into()));
        }
        if self.coeffs.n_decays() != self.decays.len() {
            return Err(Error::Domain("coefficient tensor does not match decay grid".into()));
        }
        for row in &self.f {
            if row.len() != self.n_states {
                return Err(Error::Domain("state factor table does not match grid".into()));
            }
            // Fitted factors are strictly positive; a zero is allowed so
            // simulations can gate a state off entirely.
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::Domain("state factors must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Apply the per-type gauge `f -> f/c, (mu, alpha) -> c (mu, alpha)`,
    /// which leaves every intensity unchanged.
    pub fn rescale_gauge(&mut self, scales: &[f64]) {
        let d = self.dim();
        let u = self.decays.len();
        for l in 0..d {
            let c = scales[l];
            for fs in &mut self.f[l] {
                *fs /= c;
            }
            self.mu[l] *= c;
            for m in 0..d {
                for ui in 0..u {
                    let v = self.coeffs.get(l, m, ui);
                    self.coeffs.set(l, m, ui, v * c);
                }
            }
        }
    }

    /// Enforce `f[l][0] = 1` by pushing the factor into `(mu, alpha)`.
    pub fn normalize_gauge(&mut self) -> Result<()> {
        let scales: Vec<f64> = self.f.iter().map(|row| row[0]).collect();
        if scales.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Numeric("gauge state factor is not positive".into()));
        }
        self.rescale_gauge(&scales);
        Ok(())
    }
}

/// Serialized QRH-II model document: parameters, the quantile grid they
/// were fitted on, and the post-midprice-move queue redraw laws used by
/// the mechanical simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qrh2Model {
    /// One of `qrh2-mle`, `qrh2-ls`, `hawkes8`.
    pub kind: String,
    pub params: Qrh2Params,
    pub grid: StateGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<String>,
    /// `(q_ask, q_bid, probability)` triples, AES units.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_up_redraw: Vec<(u32, u32, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_down_redraw: Vec<(u32, u32, f64)>,
}

impl Qrh2Model {
    pub fn param_count(&self) -> usize {
        let p = &self.params;
        let hawkes = p.dim() + p.dim() * p.dim() * p.decays.len();
        match self.kind.as_str() {
            "hawkes8" => hawkes,
            _ => hawkes + p.dim() * p.n_states,
        }
    }
}

/// Probability that two successive midprice moves have opposite
/// directions; `directions` holds +1 for upward and -1 for downward moves
/// in time order.
pub fn mean_reversion_rate(directions: &[i8]) -> Result<f64> {
    if directions.len() < 2 {
        return Err(Error::Domain("need at least two midprice moves".into()));
    }
    let mut opposite = 0usize;
    for w in directions.windows(2) {
        if (w[0] as i32) * (w[1] as i32) < 0 {
            opposite += 1;
        }
    }
    Ok(opposite as f64 / (directions.len() - 1) as f64)
}
