use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is bound to a different grid")]
    BindingMismatch,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operator is not coercive (smallest eigenvalue {smallest:e})")]
    NotCoercive { smallest: f64 },
    #[error("singular operator (pivot {pivot:e} at row {row})")]
    SingularOperator { row: usize, pivot: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unknown nonlinearity `{0}`")]
    UnknownName(String),
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParamOutOfRange {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("no admissible growth bound: {0}")]
    GrowthBoundUnavailable(String),
    #[error("no epsilon in the halving ladder gave a verified subsolution")]
    EpsilonExhausted,
    #[error("monotone ordering violated at iteration {iteration} by {violation:e}")]
    OrderingViolated { iteration: usize, violation: f64 },
    #[error("iteration limit of {iterations} reached (last measure {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("singular Jacobian at lambda = {lambda}")]
    SingularJacobian { lambda: f64 },
    #[error("no fold on this branch")]
    NoFold,
    #[error("continuation step collapsed to {step:e} at lambda = {lambda}")]
    StepCollapse { lambda: f64, step: f64 },

    #[error("path maximum migrated to an endpoint")]
    PathCollapsed,
    #[error("no endpoint with negative energy: mountain-pass geometry absent")]
    NoMountainGeometry,
    #[error("second solution falls below the minimal one by {violation:e}")]
    OrderingFailed { violation: f64 },
}

impl Error {
    /// Stable identifier used in CLI diagnostics and failed summaries.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::BindingMismatch => "BindingMismatch",
            Error::InvalidField(_) => "InvalidField",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotCoercive { .. } => "NotCoercive",
            Error::SingularOperator { .. } => "SingularOperator",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::UnknownName(_) => "UnknownName",
            Error::ParamOutOfRange { .. } => "ParamOutOfRange",
            Error::GrowthBoundUnavailable(_) => "GrowthBoundUnavailable",
            Error::EpsilonExhausted => "EpsilonExhausted",
            Error::OrderingViolated { .. } => "OrderingViolated",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::SingularJacobian { .. } => "SingularJacobian",
            Error::NoFold => "NoFold",
            Error::StepCollapse { .. } => "StepCollapse",
            Error::PathCollapsed => "PathCollapsed",
            Error::NoMountainGeometry => "NoMountainGeometry",
            Error::OrderingFailed { .. } => "OrderingFailed",
        }
    }
}
