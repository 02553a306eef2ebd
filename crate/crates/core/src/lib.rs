//! Calibration, simulation and diagnostics for queue-reactive Hawkes
//! order-book models.
//!
//! The crate covers two model families over Level-I order-book data:
//!
//! - a single-queue model ([`qrh1`]) whose baselines depend on the queue
//!   size, fitted by exact maximum likelihood over constant-reference-
//!   price segments, nesting the pure queue-reactive (birth-death) and
//!   the standard Hawkes restrictions;
//! - a two-sided eight-event-type model ([`qrh2`]) with multiplicative
//!   state factors over a bid/ask queue quantile grid, fitted by maximum
//!   likelihood or by a least-squares contrast that allows inhibitory
//!   (negative) kernels.
//!
//! Supporting modules provide data ingestion and preprocessing ([`lob`]),
//! exponential-sum kernels with the spectral-radius stability check
//! ([`kernels`]), exact thinning simulators and invariant-distribution
//! machinery ([`simulate`]) and goodness-of-fit / model-comparison
//! diagnostics ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod lob;
pub mod optim;
pub mod qrh1;
pub mod qrh2;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
