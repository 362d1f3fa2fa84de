//! MDL-optimal sparse representations of one-dimensional signals in
//! orthonormal wavelet bases, and the features built on them: per-window
//! sparsity profiles, wavelet basis selection, and atypicality-based anomaly
//! detection.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod atypicality;
pub mod codelength;
pub mod error;
mod filters;
pub mod io;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use sparse::{optimal_k, total_codelength, Analysis, Criterion, SparseRepresentation};
pub use wavelet::{forward_dwt, inverse_dwt, Segment, WaveletBasis};
