//! Single-queue queue-reactive Hawkes model (QRH-I).
//!
//! The intensity of event type `l` over a constant-reference-price
//! segment is
//!
//! ```text
//! lambda[l](t) = mu[l](q(t-)) + sum_m sum_u alpha[l][m][u] g[m][u](t)
//! g[m][u](t)   = sum_{t_j < t, type_j = m} beta[u] exp(-beta[u] (t - t_j))
//! ```
//!
//! with `lambda[l](t) = 0` for queue-consuming types while the queue is
//! empty. Setting all `alpha` to zero recovers the queue-reactive
//! birth-death model; making `mu[l]` state-independent recovers a
//! standard multivariate Hawkes model.
//!
//! The log-likelihood and its gradients are evaluated in one pass over
//! each segment via the `g`/`G` recursions; states above `q_max` share
//! the boundary baseline.

mod fit;
mod loglik;

pub use fit::{fit_hawkes3, fit_qr, fit_qrh1, FitOptions, FitReport, QrInfo};
pub use loglik::{
    event_intensities, intensity_qrh1, loglik_grad_qrh1, loglik_qrh1, precompute_gg,
    time_rescaling_residuals, GGCache, Qrh1Eval, Qrh1Grad,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DecaySet, KernelCoeffs};
use crate::lob::Segment;

/// Queue increments of the canonical 3-type scheme (L, C, M).
pub const DELTAS3: [i8; 3] = [1, -1, -1];

/// Full QRH-I parameter set.
///
/// `mu[l][q]` are the state-dependent baselines for queue sizes
/// `0..=q_max` (larger queues share the boundary entry), `deltas[l]` is
/// the queue increment of type `l`, and types with a negative increment
/// have identically zero intensity while the queue is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qrh1Params {
    pub decays: DecaySet,
    pub coeffs: KernelCoeffs,
    pub mu: Vec<Vec<f64>>,
    pub q_max: u32,
    pub deltas: Vec<i8>,
}

impl Qrh1Params {
    /// All-zero parameters for the standard L/C/M scheme.
    pub fn zeros3(decays: DecaySet, q_max: u32) -> Self {
        let u = decays.len();
        Self {
            coeffs: KernelCoeffs::zeros(3, u),
            mu: vec![vec![0.0; q_max as usize + 1]; 3],
            q_max,
            deltas: DELTAS3.to_vec(),
            decays,
        }
    }

    /// All-zero parameters with explicit queue increments per type.
    pub fn zeros(decays: DecaySet, q_max: u32, deltas: Vec<i8>) -> Self {
        let d = deltas.len();
        let u = decays.len();
        Self {
            coeffs: KernelCoeffs::zeros(d, u),
            mu: vec![vec![0.0; q_max as usize + 1]; d],
            q_max,
            deltas,
            decays,
        }
    }

    pub fn dim(&self) -> usize {
        self.deltas.len()
    }

    pub fn n_states(&self) -> usize {
        self.q_max as usize + 1
    }

    /// Whether type `l` is forced to zero intensity on an empty queue.
    #[inline]
    pub fn gated(&self, l: usize) -> bool {
        self.deltas[l] < 0
    }

    /// Baseline lookup state for a raw queue size.
    #[inline]
    pub fn cap_state(&self, q: u32) -> usize {
        q.min(self.q_max) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.mu.len() != d || self.coeffs.dim() != d {
            return Err(Error::Domain("parameter dimensions disagree".into()));
        }
        if self.coeffs.n_decays() != self.decays.len() {
            return Err(Error::Domain("coefficient tensor does not match decay grid".into()));
        }
        for row in &self.mu {
            if row.len() != self.n_states() {
                return Err(Error::Domain("baseline table does not match q_max".into()));
            }
        }
        Ok(())
    }

    /// Number of model parameters: the baseline table plus, when
    /// `include_kernels`, the Hawkes coefficient tensor.
    pub fn param_count(&self, include_kernels: bool) -> usize {
        let d = self.dim();
        let base = d * self.n_states();
        if include_kernels {
            base + d * d * self.decays.len()
        } else {
            base
        }
    }
}

/// One constant-reference-price realization in model coordinates: event
/// times, type indices and the queue size after each event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentData {
    pub start: f64,
    pub end: f64,
    pub q0: u32,
    pub times: Vec<f64>,
    pub types: Vec<usize>,
    pub q_after: Vec<u32>,
}

impl SegmentData {
    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    /// Queue size just before event `k`.
    #[inline]
    pub fn q_before(&self, k: usize) -> u32 {
        if k == 0 {
            self.q0
        } else {
            self.q_after[k - 1]
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.times.len() != self.types.len() || self.times.len() != self.q_after.len() {
            return Err(Error::Input("segment event arrays differ in length".into()));
        }
        if self.end < self.start {
            return Err(Error::Input("segment ends before it starts".into()));
        }
        let mut prev = self.start;
        for (k, &t) in self.times.iter().enumerate() {
            if t < prev {
                return Err(Error::Ordering {
                    line: k,
                    msg: format!("event time {t} before {prev}"),
                });
            }
            if t > self.end {
                return Err(Error::Input(format!("event at {t} after segment end {}", self.end)));
            }
            prev = t;
        }
        if self.types.iter().any(|&m| m >= dim) {
            return Err(Error::Input("event type out of range".into()));
        }
        Ok(())
    }
}

impl From<&Segment> for SegmentData {
    fn from(seg: &Segment) -> Self {
        SegmentData {
            start: seg.start,
            end: seg.end,
            q0: seg.q0,
            times: seg.events.iter().map(|e| e.ts).collect(),
            types: seg.events.iter().map(|e| e.kind.index()).collect(),
            q_after: seg.events.iter().map(|e| e.q_after).collect(),
        }
    }
}

/// Serialized QRH-I model document: parameters plus dataset metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qrh1Model {
    /// One of `qr`, `hawkes`, `qrh1`.
    pub kind: String,
    pub params: Qrh1Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    /// Baseline entries that were never visited in the data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_mu: Vec<(usize, u32)>,
}

impl Qrh1Model {
    pub fn param_count(&self) -> usize {
        self.params.param_count(self.kind != "qr")
    }
}
