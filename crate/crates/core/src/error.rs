use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A classical (unsmoothed) evaluation hit the collision set.
    #[error("singularity: {0}")]
    Singularity(String),

    /// `r` is not monotone along the orbit, so `r` cannot be used as time.
    #[error("turning point: cos(psi - alpha) = {cos:e}")]
    TurningPoint { cos: f64 },

    /// The adaptive step collapsed below the resolvable size.
    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64, state: Vec<f64> },

    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudget {
        t: f64,
        steps: usize,
        state: Vec<f64>,
    },

    /// The right-hand side kept failing inside a step.
    #[error("domain violation at t = {t}: {reason}")]
    DomainViolation {
        t: f64,
        reason: String,
        state: Vec<f64>,
    },

    /// Numerical eigenvalue signs disagree with the invariant-manifold table.
    #[error("classification conflict: {0}")]
    Classification(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
