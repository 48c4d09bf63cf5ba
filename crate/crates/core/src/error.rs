use thiserror::Error;

/// Errors surfaced by the assortment-inventory toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition (bad index, length
    /// mismatch, out-of-range parameter, infeasible decision, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A stateful operation was called out of order (e.g. closing an
    /// epoch that is still open).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An observation contradicts the model state (e.g. a purchase of a
    /// product that was never stocked).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// A computation would exceed a configured budget. Callers can catch
    /// this and fall back to Monte Carlo evaluation.
    #[error("resource limit exceeded: {what} needs {required}, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        required: usize,
        budget: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit { .. })
    }
}
