use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Input outside the domain of the operation (unknown node, empty
    /// projection target, query about a faulty server's view, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structural invariant of a constructed value does not hold.
    #[error("invalid structure: {0}")]
    Invalid(String),

    /// Exponential enumeration refused above the configured universe cap.
    #[error("capacity error: universe has {size} nodes, cap is {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A proven property failed to hold. Reaching this is a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("exploration budget exceeded after {states} states (frontier {frontier})")]
    StateBudget { states: usize, frontier: usize },

    #[error("scenario parse error: {0}")]
    Parse(String),
}
