use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a structural requirement (ordering, lengths, ranges).
    #[error("validation error: {0}")]
    Validation(String),

    /// An operation was called outside its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A breakpoint value was requested where the two sides disagree and no
    /// explicit value is stored.
    #[error("ambiguous value at breakpoint {at}: left limit {left}, right limit {right}")]
    Ambiguous { at: f64, left: f64, right: f64 },

    /// A diffusion coefficient vanishes where it must not.
    #[error("degenerate diffusion: {0}")]
    Degenerate(String),

    /// A transform could not be certified as strictly monotone.
    #[error("transform construction failed: {0}")]
    Construction(String),

    /// An inverse was requested outside the reachable range.
    #[error("value {0} is outside the numerically reachable range of the transform")]
    Range(f64),

    /// A numerical certificate evaluated to a non-finite value.
    #[error("certification failed: {0}")]
    Certification(String),

    /// A solver produced a non-finite state.
    #[error("solver diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    /// A replication failed; carries the replication index for reproduction.
    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    /// An adaptive method did not stop within the query cap.
    #[error("adaptive method `{method}` did not stop within {cap} evaluations")]
    NonTermination { method: String, cap: usize },

    /// Too few usable samples or points for a statistic.
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn in_replication(self, replication: u64) -> Self {
        match self {
            e @ Error::Replication { .. } => e,
            e => Error::Replication {
                replication,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
