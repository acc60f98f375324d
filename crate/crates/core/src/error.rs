use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge")]
    EigenNoConvergence,

    #[error("layout is not strictly feasible: {0}")]
    Infeasible(String),

    #[error("degenerate covariance: asymptotic gain has no positive solution")]
    Degenerate,

    #[error("channel Gram matrix is numerically singular (condition number {0:e})")]
    RankDeficient(f64),

    #[error("{redraws} near-singular redraws over {samples} samples exceeds the 1% budget")]
    PersistentRankFailure { redraws: usize, samples: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the inputs' shape.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence
                | Error::Degenerate
                | Error::RankDeficient(_)
                | Error::PersistentRankFailure { .. }
                | Error::NotHermitian(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
