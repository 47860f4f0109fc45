use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("response {value} at observation {index} is outside the family domain")]
    OutOfDomain { index: usize, value: f64 },

    #[error("weight {weight:e} at observation {index} is below the positivity floor")]
    DegenerateWeight { index: usize, weight: f64 },

    #[error("empty factor column")]
    EmptyFactor,

    #[error("regressor matrix is rank deficient at column `{column}`")]
    RankDeficient { column: String },

    #[error("regressor `{column}` is collinear with the fixed effects or other regressors")]
    Collinear { column: String },

    #[error("alternating projections did not converge after {sweeps} sweeps (last delta {delta:e}){}", column.as_ref().map(|c| alloc::format!(" for `{c}`")).unwrap_or_default())]
    ApNotConverged { sweeps: usize, delta: f64, column: Option<String> },

    #[error("newton-raphson did not converge after {iterations} iterations (last change {change:e})")]
    NewtonNotConverged { iterations: usize, change: f64 },

    #[error("step halving could not increase the log-likelihood")]
    StepHalvingFailed,

    #[error("fixed-effect solver did not converge after {sweeps} sweeps (last delta {delta:e})")]
    SolverNotConverged { sweeps: usize, delta: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dense design has {entries} entries, above the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("{source} (newton iteration {iteration})")]
    AtIteration { iteration: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: Box::new(self) }
    }

    /// Strips iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
