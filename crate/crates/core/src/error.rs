use thiserror::Error;

/// Errors raised by the fitting, region and testing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("weights sum to zero; barycenter is undefined")]
    DegenerateWeights,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sample covariance is singular or ill-conditioned (condition number {condition_number:e})")]
    SingularCovariance { condition_number: f64 },

    #[error("need more observations than predictors (n = {n}, p = {p})")]
    TooFewObservations { n: usize, p: usize },

    #[error("a reduced model needs at least two predictors (p = {p})")]
    NeedTwoPredictors { p: usize },

    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}
