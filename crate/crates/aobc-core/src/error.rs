//! Crate-wide error type.

use crate::age::DelayRecord;

/// Everything that can go wrong in the library.
///
/// Parameter values are reported as `f64` regardless of the scalar type the
/// caller instantiated, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A constructor or function precondition was violated.
    #[error("invalid {what}: {why}")]
    InvalidArgument { what: &'static str, why: String },

    /// Path-loss exponent at or below 2: the interference integral diverges and
    /// no finite simulation window can represent the field.
    #[error("path-loss exponent beta = {beta} diverges (requires beta > 2)")]
    DivergentInterference { beta: f64 },

    /// Path loss evaluated at zero separation (transmitter on top of receiver).
    #[error("path loss is singular at zero distance ({context})")]
    SingularPathLoss { context: &'static str },

    /// Subset enumeration asked about more nodes than the hard cap allows.
    #[error("{n} nodes exceed the enumeration cap of {cap}")]
    CapacityExceeded { n: usize, cap: usize },

    /// An age ledger was stepped with a slot outcome of a different node count.
    #[error("age ledger tracks {ledger} nodes but the slot outcome has {outcome}")]
    SizeMismatch { ledger: usize, outcome: usize },

    /// A delay measurement ran past its slot cap. Carries what was observed so
    /// far; nodes that never received report a first-reception slot of 0.
    #[error("delay measurement exceeded {cap} slots ({served} of {total} nodes served)")]
    DelayTimeout {
        cap: u64,
        served: usize,
        total: usize,
        partial: DelayRecord,
    },

    /// A realization file (or other text input) failed to parse.
    #[error("parse error at line {line}, column {column}: {why}")]
    Parse {
        line: usize,
        column: usize,
        why: String,
    },

    /// An underlying reader or writer failed.
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidArgument {
            what,
            why: why.into(),
        }
    }
}
