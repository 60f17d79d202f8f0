//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by estimation, optimization, and pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// Requested quantity cannot be filled by the ladder.
    #[error("insufficient depth: requested {requested} units, ladder holds {available}")]
    InsufficientDepth { requested: f64, available: f64 },

    /// Orderbook failed a structural invariant (crossed, unsorted, non-positive entries).
    #[error("invalid orderbook for {exchange}: {reason}")]
    InvalidBook { exchange: String, reason: String },

    /// Not enough observations before the requested minute.
    #[error("insufficient history: no usable squared return before the target minute")]
    InsufficientHistory,

    /// Parameter outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Maximum-likelihood fit did not reach the gradient tolerance.
    #[error("optimizer did not converge: {details}")]
    NonConvergence { details: String },

    /// Likelihood-ratio test called on models that are not nested.
    #[error("models are not nested: {reason}")]
    NotNested { reason: String },

    /// Covariate vector does not match the fitted model schema.
    #[error("covariate schema mismatch: expected {expected} columns, got {got}")]
    SchemaMismatch { expected: usize, got: usize },

    /// Root bracketing failed.
    #[error("root finder failed: {details}")]
    RootBracketing { details: String },

    /// Too many Monte Carlo paths fell outside the utility domain.
    #[error(
        "{rejected} of {total} paths breached the utility domain (limit {limit:.3}%); \
         reduce sigma or shift delta"
    )]
    DomainBreach { rejected: usize, total: usize, limit: f64 },

    /// Malformed input file or record.
    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    /// Pipeline configuration failed validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// An upstream artifact was produced under a different configuration.
    #[error("stale upstream artifact {artifact}: config hash {found} != expected {expected}; rerun the upstream stage")]
    StaleArtifact { artifact: String, found: String, expected: String },

    /// Required upstream artifact is missing.
    #[error("missing upstream artifact: {0}; run the upstream stage first")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code class: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidBook { .. }
            | Error::SchemaMismatch { .. }
            | Error::StaleArtifact { .. }
            | Error::MissingArtifact(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
