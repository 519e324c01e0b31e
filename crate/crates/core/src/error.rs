use thiserror::Error;

pub type Result<T> = std::result::Result<T, HrfError>;

#[derive(Debug, Error)]
pub enum HrfError {
    /// An input is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A target or user index does not exist in the scenario.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// An iterative method failed to converge.
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// A derivative evaluated to NaN/inf for the named parameter.
    #[error("non-finite derivative for parameter {0}")]
    NonFiniteDerivative(String),

    /// The FIM is singular, so the parameter is not identifiable.
    #[error("unidentifiable parameter: FIM is singular (condition number {condition:.3e})")]
    Unidentifiable { condition: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HrfError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        HrfError::Domain(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        HrfError::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
