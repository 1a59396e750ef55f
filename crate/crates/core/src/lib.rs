//! Covariance estimation from compressive measurements.
//!
//! Every sample `x_i` is observed only through `y_i = R_iᵀ x_i`, where `R_i` is a
//! `p × m` random matrix with i.i.d. zero-mean entries. The naive estimator built
//! from the back-projections `R_i y_i` carries a diagonal and a trace bias that
//! depend only on `m`, `p` and the kurtosis of the entry distribution; this crate
//! accumulates that estimator in one pass and removes the bias in closed form.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, timing, parallel
//! execution and the command-line driver live in the `compcov` companion crate.

#![no_std]
#![deny(unsafe_code)]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod estimator;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod projection;
pub mod sketch;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{
    bias_coefficients, debias, estimate, estimate_with_clock, BiasCoefficients, CovAccumulator,
    CovEstimate, EstimateKind, EstimateParams,
};
pub use linalg::SymMatrix;
pub use metrics::{
    normalized_error, spectral_norm, stable_rank, top_eigenvectors, ErrorReport, SpectrumSummary,
};
pub use projection::{
    derive_seed, moments, Distribution, Moments, Projection, ProjectionSpec, SparseProjection,
};
pub use sketch::{backproject, measure, sketch_dataset, ProjectedSample, SketchSet};
pub use synth::{Dataset, SynthModel, SynthSpec};
