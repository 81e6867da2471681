//! Crate-wide error type.

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root bracket did not straddle a sign change.
    #[error("no sign change over bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// An iteration failed to converge within its evaluation cap.
    #[error("{what} did not converge within {cap} iterations")]
    NonConvergence { what: &'static str, cap: u32 },

    /// The operation is defined only for a subset of prior kinds.
    #[error("unsupported prior for {op}: {why}")]
    UnsupportedPrior { op: &'static str, why: String },

    /// Numerical quadrature produced a non-finite or degenerate result.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A sampling region was not a contiguous run of lattice cells.
    /// Can genuinely occur near the upper stopping threshold when the
    /// per-sample cost is large; downstream consumers that are free to
    /// choose their operating point should move off the offending cost.
    #[error("sampling region at t = {t} is not an interval in s")]
    NonIntervalRegion { t: u32 },

    /// A lattice lookup at (t, s) fell outside the stored triangle.
    #[error("lattice index out of range: t = {t}, s = {s}, horizon = {horizon}")]
    OutOfLattice { t: u32, s: u32, horizon: u32 },

    /// A calibration search could not bracket the target level.
    #[error("calibration bracket failure: {0}")]
    BracketFailure(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
