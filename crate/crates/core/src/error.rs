use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The angle of a zero vector was requested.
    #[error("angle is ill-defined for a zero-norm vector")]
    IllDefinedAngle,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// The integrated state became non-finite.
    #[error("integration diverged after t = {last_valid_time} s")]
    Diverged { last_valid_time: f64 },

    /// No ε makes both quadratic forms positive definite.
    #[error("infeasible analysis: {constraint}")]
    Infeasible { constraint: String },

    #[error("point outside the domain of {function}: {reason}")]
    Domain { function: String, reason: String },

    #[error("not an equilibrium: |rhs| = {residual:e} at delta = {delta}")]
    NotEquilibrium { delta: f64, residual: f64 },

    /// The linear ATAN error dynamics left the interval [-pi, pi).
    #[error("trajectory left the interval [-pi, pi) at t = {time} s")]
    IntervalExit { time: f64 },

    /// A failure inside one labelled run of a scenario.
    #[error("`{label}`: {source}")]
    Labeled {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    /// The requested power transfer exceeds the static power-angle limit.
    #[error("power transfer infeasible: arcsin argument {argument} outside [-1, 1]")]
    TransferInfeasible { argument: f64 },
}

impl Error {
    /// The error beneath any scenario labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Labeled { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
