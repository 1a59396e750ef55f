use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sparsity parameter s must be a finite real >= 1, got {0}")]
    InvalidSparsity(f64),

    #[error("measurement dimension must satisfy 1 <= m < p, got p = {p}, m = {m}")]
    InvalidDimensions { p: usize, m: usize },

    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample {index} has length {found}, expected {expected}")]
    SampleLength {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("sample index {0} is out of range (must be < 2^63)")]
    SampleIndexOutOfRange(u64),

    #[error("no samples have been accumulated")]
    EmptyAccumulator,

    #[error("cannot merge accumulators built from different projection specs")]
    SpecMismatch,

    #[error("bias coefficients are singular for kappa = {kappa}, m = {m}, p = {p}: {reason}")]
    SingularCoefficients {
        kappa: f64,
        m: usize,
        p: usize,
        reason: &'static str,
    },

    #[error("estimate is already {0:?}; debias expects a biased estimate")]
    NotBiased(crate::estimator::EstimateKind),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("matrix must be {expected}x{expected}, got {found} entries")]
    BadMatrixShape { expected: usize, found: usize },

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("k = {k} must satisfy 1 <= k <= p = {p}")]
    InvalidEigenCount { k: usize, p: usize },

    #[error("index {index} out of range for dimension {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("E_kl requires k != l (use the E_kk form), got k = l = {0}")]
    DiagonalPair(usize),

    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { min: usize, got: usize },

    #[error("sample vector must be nonzero")]
    ZeroSample,

    #[error("invalid synthetic spec: {0}")]
    InvalidSynth(&'static str),

    #[error("dataset must contain at least one sample of positive dimension")]
    EmptyDataset,

    #[error("at least {min} entries are required, got {got}")]
    TooFewEntries { min: usize, got: usize },
}
