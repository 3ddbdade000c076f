use crate::approx::DeltaReport;
use crate::bisim::BisimReport;

/// Errors produced by construction, validation and reduction operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data fails a structural invariant (shape, finiteness, coverage).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Arguments violate an operation's contract (mismatched layers, negative
    /// tolerance, incompatible sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A layer or node index is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// The partition is not an exact bisimulation; the report carries the
    /// first violating witness.
    #[error("partition is not a bisimulation ({})", witness_summary(&.0.witness))]
    NotBisimulation(Box<BisimReport>),

    /// The partition is not a delta-bisimulation for the requested delta.
    #[error("partition is not a {}-bisimulation ({})", .0.delta, witness_summary(&.0.witness))]
    NotDeltaBisimulation(Box<DeltaReport>),

    /// A document could not be parsed. Carries the serde location.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// Filesystem failure while reading or writing a document.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn witness_summary(witness: &Option<crate::bisim::Witness>) -> String {
    match witness {
        Some(w) => w.to_string(),
        None => "no witness".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
