use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The measure produces no events (all relevant rates vanish).
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    /// A mass partition with a zero coordinate was passed where a
    /// non-degenerate one is required.
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    /// Exact enumeration exceeded its state budget.
    #[error("capacity exceeded: {states} states > bound {bound}")]
    Capacity { states: usize, bound: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid measure specification: {0}")]
    Config(String),
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
