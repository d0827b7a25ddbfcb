use thiserror::Error;

use crate::matfun::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside the domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("classical derivative requested at breakpoint t = {0}")]
    AtBreakpoint(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Expression(#[from] ExprError),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("fundamental solution is numerically singular at t = {t} (condition number {cond:e})")]
    SingularityDetected { t: f64, cond: f64 },

    #[error("matrix is not Hermitian at t = {t} (residual {residual:e})")]
    NotHermitian { t: f64, residual: f64 },

    #[error("matrix is not positive semidefinite at t = {t} (smallest eigenvalue {min_eig:e})")]
    NotPsd { t: f64, min_eig: f64 },

    #[error("candidate is not absolutely upper semicontinuous: {0}")]
    NotAuc(String),

    #[error("rank increases from {before} to {after} near t = {t}")]
    NonMonotoneRank { t: f64, before: usize, after: usize },

    #[error("kernel chain violated at t = {t}: residual {residual:e}")]
    ChainViolation { t: f64, residual: f64 },

    #[error("candidate is not a storage function of the closed system ({} monotonicity witnesses)", witnesses.len())]
    NotStorage {
        witnesses: Vec<crate::loewner::Witness>,
    },

    #[error("matrix is nearly singular at t = {t} (pivot {pivot:e})")]
    NearSingular { t: f64, pivot: f64 },

    #[error("quadratic program is ill-conditioned (stationarity residual {residual:e})")]
    IllConditioned { residual: f64 },

    #[error("sampler is not a quadratic form: {0}")]
    InconsistentSampler(String),

    #[error("problem too large: {vars} decision variables exceed the limit {limit}")]
    ProblemTooLarge { vars: usize, limit: usize },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
