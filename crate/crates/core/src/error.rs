use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backtracking failed after {halvings} halvings (step size {step:e})")]
    BacktrackingFailed { halvings: usize, step: f64 },

    /// The inner solver never produced an acceptable certificate. `best` is
    /// the iterate with the lowest subproblem objective seen.
    #[error("inner budget of {budget} iterations exhausted without acceptance")]
    InnerBudgetExhausted { budget: usize, best: DVector<f64> },

    #[error("singular KKT system")]
    SingularKkt,

    #[error("no feasible active set found")]
    NoFeasibleCandidate,

    #[error("slope fit needs positive values (got {0})")]
    NonPositiveValue(f64),

    #[error("problem file: {0}")]
    ProblemFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
