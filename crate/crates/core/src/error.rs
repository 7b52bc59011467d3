use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spline space: {0}")]
    InvalidSpace(String),

    #[error("derivative order {deriv} exceeds spline degree {degree}")]
    DerivativeTooHigh { deriv: usize, degree: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The curve (or a weight derived from it) degenerates at a quadrature node.
    #[error("curve is not regular at quadrature node {node} (value {value:e})")]
    NotRegular { node: usize, value: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// The constraint gradients are (numerically) linearly dependent.
    #[error("constraint gradients are linearly dependent (pivot {pivot:e}, scale {scale:e})")]
    LinearDependence { pivot: f64, scale: f64 },

    #[error("invalid flow problem: {0}")]
    InvalidProblem(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    /// A dissipation or conservation identity failed beyond round-off.
    #[error("structure violation: {0}")]
    StructureViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable upper-case identifier of the failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSpace(_) => "INVALID_SPACE",
            Error::DerivativeTooHigh { .. } => "DERIVATIVE_TOO_HIGH",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::NotRegular { .. } => "NOT_REGULAR",
            Error::Factorization(_) => "FACTORIZATION",
            Error::LinearDependence { .. } => "LINEAR_DEPENDENCE",
            Error::InvalidProblem(_) => "INVALID_PROBLEM",
            Error::NonConvergence { .. } => "NON_CONVERGENCE",
            Error::SingularJacobian { .. } => "SINGULAR_JACOBIAN",
            Error::StructureViolation(_) => "STRUCTURE_VIOLATION",
        }
    }
}
