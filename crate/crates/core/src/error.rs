//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result<T>`]. Variants are
//! grouped by what the caller can do about them: `Domain` and `InvalidMargin`
//! mean the caller passed parameters outside the model's domain, `Data` and
//! `DegenerateEvidence` mean the input dataset cannot be analysed as given,
//! and `Numerical` means an internal routine failed to converge (which is a
//! bug report waiting to happen, not a user error).

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (non-positive scale,
    /// probability outside (0, 1), negative heterogeneity, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-inferiority margin that does not define a usable risk-ratio
    /// threshold.
    #[error("invalid margin: {0}")]
    InvalidMargin(String),

    /// Trial counts from which no finite log risk ratio can be formed even
    /// after continuity correction (for example a zero-size arm).
    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),

    /// An analysis was requested on an empty collection of studies.
    #[error("no studies supplied")]
    EmptyEvidence,

    /// A simulation scenario whose implied event probabilities leave (0, 1).
    #[error("scenario rejected: {0}")]
    ScenarioRejected(String),

    /// Malformed input data (CSV, JSON records, grid config), with enough
    /// context to locate the offending line or field.
    #[error("data error: {0}")]
    Data(String),

    /// An iterative numerical routine exhausted its budget without meeting
    /// its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A command-line invocation that cannot be executed as given (an
    /// inconsistent flag combination, for example). Kept separate from
    /// `Data` so the process can exit with the conventional usage code.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line tool: usage errors are 2
    /// (matching the argument parser's own exit code), data and domain
    /// problems are 3, numerical failures are 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}
