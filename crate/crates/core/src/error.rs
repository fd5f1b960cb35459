use alloc::string::String;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix dimension {0} outside supported range 1..=16")]
    UnsupportedDimension(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("matrix exponential overflows (norm {norm:e})")]
    ExpOverflow { norm: f64 },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("step size underflow at t = {t} (last reachable time)")]
    StepUnderflow { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not a reparameterization at s = {s}: best orbit distance {distance:e} exceeds {tol:e}")]
    NoOrbitMatch { s: f64, distance: f64, tol: f64 },
    #[error("reparameterization step {step} at t = {t} failed: {reason}")]
    ExtensionFailed { step: usize, t: f64, reason: String },
    #[error("enumeration exceeds cap of {0} tuples")]
    EnumerationCap(u64),
    #[error("sample grids differ: {0}")]
    GridMismatch(String),
    #[error("graph disconnected at this resolution; refine the net")]
    Disconnected,
    #[error("fibers differ: heights must coincide")]
    FiberMismatch,
    #[error("frame is rank deficient at point {0:?}")]
    RankDeficient(alloc::vec::Vec<f64>),
    #[error("generators do not commute (residual {0:e})")]
    NotCommuting(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
