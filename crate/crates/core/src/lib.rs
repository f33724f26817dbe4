//! Multi-scale, multi-modality spectral classification.
//!
//! Spectra are rescaled to [-1, 1], reduced by piecewise aggregate
//! approximation, encoded as Gramian angular summation fields at two scales
//! and classified by a two-branch CNN. The preliminary class distribution is
//! then fused with a history probability matrix through a trainable weight
//! matrix.

pub mod error;
pub mod exec;
pub mod gaf;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod spectra;

pub use error::{M3sError, Result};
pub use exec::Execution;
