use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("average growth rate r = {r} is not positive")]
    RInvalid { r: f64 },

    #[error("interaction matrix is numerically singular: |det A| = {det:e} <= {threshold:e}")]
    DegenerateMatrix { det: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },

    #[error("coordinate {component} went negative ({value:e}) at t = {t}")]
    Negativity { t: f64, component: usize, value: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("no return to the section within t = {t_max}")]
    NoReturn { t_max: f64 },

    #[error("orbit did not close: residual {residual:e} > {tol:e}")]
    NotClosed { residual: f64, tol: f64 },
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical procedure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::RInvalid { .. }
                | Error::DegenerateMatrix { .. }
                | Error::InvalidParameter(_)
                | Error::PreconditionFailed(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RInvalid { .. } => "r_invalid",
            Error::DegenerateMatrix { .. } => "degenerate_matrix",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::StepFailure { .. } => "step_failure",
            Error::Negativity { .. } => "negativity",
            Error::PreconditionFailed(_) => "precondition_failed",
            Error::NewtonDivergence(_) => "newton_divergence",
            Error::NoReturn { .. } => "no_return",
            Error::NotClosed { .. } => "not_closed",
        }
    }
}
