use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max deviation {deviation:e} exceeds tolerance {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps (off-norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("moment power {0} out of range (allowed 0, 1, 2)")]
    PowerOutOfRange(usize),
    #[error("empty sample set")]
    EmptySample,
    #[error("inequality needs at least {needed} choices per party, table has ({m_a}, {m_b})")]
    NotEnoughChoices { needed: usize, m_a: usize, m_b: usize },
    #[error("second moment {value:e} is negative beyond tolerance in {context}")]
    NegativeSecondMoment { value: f64, context: &'static str },
    #[error("coefficient shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("null rate {0} outside (0, 1]")]
    RateOutOfRange(f64),
    #[error("phi {0} outside [0, pi/2)")]
    PhiOutOfRange(f64),
    #[error("conditional variance {0:e} negative beyond tolerance")]
    NegativeVariance(f64),
    #[error("Schmidt rank {0} must be at least 1 and fit in both local dimensions")]
    BadSchmidtRank(usize),
    #[error("record shape does not match scheme {0}")]
    SchemeMismatch(&'static str),
    #[error("invalid moment table: {0}")]
    InvalidTable(String),
    #[error("unknown inequality '{0}'")]
    UnknownInequality(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
