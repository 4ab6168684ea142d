//! Core algorithms for uncertainty-aware classification with rejection.
//!
//! Everything in this crate is a pure function of its inputs and a `u64` seed:
//!
//! - [`nn`]: a small dense ReLU network with a sigmoid output, inverted dropout,
//!   Glorot-uniform initialization, Adam and early stopping.
//! - [`uncertainty`]: standard, MC Dropout and Deep Ensemble predictive samples and the
//!   entropy decomposition into total, data (aleatoric) and model (epistemic) uncertainty.
//! - [`rejection`]: uncertainty-ranked rejection and the NRA / CQ / RQ metrics.
//! - [`data`]: the in-memory dataset, standardization, seeded splits and synthetic
//!   distribution-shift generators.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment harness and
//! the command-line interface live in the `abstain` crate.
//!
//! All transcendental functions go through `libm`, so results are bit-identical across
//! targets and independent of the `std` feature.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod data;
mod error;
pub mod nn;
pub mod rejection;
pub mod seed;
pub mod uncertainty;

pub use error::{Error, Result};

pub use data::{Dataset, ShiftLevel, ShiftSpec, StandardizerParams, TwoRegionSpec};
pub use nn::{Mlp, MlpConfig, TrainReport};
pub use rejection::{EvaluatedSet, RejectionCurve, RejectionPartition, RqValue};
pub use uncertainty::{PredictiveMatrix, Predictor, PredictorKind, UncertaintyTriple};
