use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{matrix}({stage}) has shape {found:?}, expected {expected:?}")]
    Dimension {
        matrix: &'static str,
        stage: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{matrix} has {found} stages, expected {expected}")]
    StageCount {
        matrix: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("model failed validation: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("factorization of {what} failed at stage {stage}")]
    Factorization { what: &'static str, stage: usize },

    #[error("stage {stage} out of range 0..={max}")]
    StageOutOfRange { stage: usize, max: usize },

    #[error("exact value-of-information table supports n <= {max}, model has n = {n}; use the quadratic approximation")]
    TooManyDimensions { n: usize, max: usize },

    #[error("mismatch grid is not symmetric: {0}")]
    AsymmetricGrid(String),

    #[error("particle cloud degenerated at stage {stage}: no particle is consistent with the observed decision; use a larger cloud")]
    Degenerate { stage: usize },

    #[error("randomized scheduling is rejected: the global optimum is attained by deterministic policies, randomization does not improve performance")]
    Randomized,

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("{0}")]
    Config(String),

    #[error("brute-force budget exceeded: {evaluations} evaluations > {budget}")]
    Budget { evaluations: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
