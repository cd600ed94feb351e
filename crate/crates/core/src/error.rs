use thiserror::Error;

use crate::measure::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite integrand value {value} at node {index} ({point:?})")]
    NonFiniteIntegrand {
        index: usize,
        point: Point,
        value: f64,
    },

    #[error("function is not normalized: ||u||_2^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("zero L2 norm")]
    ZeroNorm,

    #[error("function vanishes on the admission hull: {0}")]
    NotPositive(String),

    #[error("inner Mehler rule did not converge at t = {t}: estimate {estimate:e} at order {order}")]
    InnerRuleNotConverged { t: f64, order: usize, estimate: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNotConverged,

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Capacity(_)
                | Error::InvalidParameter(_)
                | Error::NotPositive(_)
                | Error::Json(_)
        )
    }
}
