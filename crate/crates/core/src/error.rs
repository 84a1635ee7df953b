use thiserror::Error;

use crate::solver::{L1Report, PicardReport};

pub type Result<T> = std::result::Result<T, BsdeError>;

#[derive(Debug, Error)]
pub enum BsdeError {
    #[error("cannot bound tail: an infinite horizon needs registered coefficient functions")]
    CannotBoundTail,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at t = {t}")]
    NonFinite { t: f64, value: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("singular normal equations at step {step} (condition number {condition:e})")]
    SingularRegression { step: usize, condition: f64 },

    #[error("implicit step did not converge at step {step}, path {path}")]
    ImplicitStep { step: usize, path: usize },

    #[error("no contraction: Picard distances did not decrease after subdivision")]
    NoContraction(Box<PicardReport>),

    #[error("truncation ladder distances are not decreasing")]
    LadderNotDecreasing(Box<L1Report>),

    #[error("beta condition violated at t = {t}: beta = {beta}, required at least {required}")]
    BetaCondition { t: f64, beta: f64, required: f64 },

    #[error("empty field")]
    EmptyField,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
