use thiserror::Error;

/// Errors raised by the embedding pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MercatError {
    #[error("degenerate spherical triangle: {0}")]
    DegenerateTriangle(&'static str),

    /// Coincident points; carries `(anchor, j, k)` when known.
    #[error("degenerate triple {0:?}: coincident points")]
    DegenerateTriple(Option<(usize, usize, usize)>),

    #[error("requested rank {k} exceeds min(n, d) = {max}")]
    RankTooLarge { k: usize, max: usize },

    #[error("all singular values are zero")]
    AllZero,

    #[error("invalid dimensions: {0}")]
    BadDims(String),

    #[error("subsample size {m} exceeds the {available} available context points")]
    SubsampleTooLarge { m: usize, available: usize },

    #[error("batch contains no valid triples")]
    EmptyBatch,

    #[error("principal component {0} has zero spread")]
    DegenerateSpread(usize),

    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("input vector has zero variance")]
    ConstantVector,

    #[error("k = {k} must be smaller than n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("no valid angle triples were collected")]
    EmptyCollection,

    #[error("invalid dataset spec: {0}")]
    BadSpec(String),

    #[error("invalid sample count {n}: {reason}")]
    BadN { n: usize, reason: &'static str },

    #[error("row count mismatch: data has {data} rows, embedding has {embedding}")]
    RowMismatch { data: usize, embedding: usize },

    #[error("invalid config: {0}")]
    BadConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    /// `row` counts data rows from 1 (the header is row 0); `column` from 1.
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
}

impl MercatError {
    /// Process exit status: 2 for bad arguments, 3 for unusable data,
    /// 4 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        use MercatError::*;
        match self {
            RankTooLarge { .. }
            | BadDims(_)
            | SubsampleTooLarge { .. }
            | KTooLarge { .. }
            | BadSpec(_)
            | BadN { .. }
            | BadConfig(_) => 2,
            DegenerateTriple(_)
            | ConstantVector
            | EmptyCollection
            | RowMismatch { .. }
            | InvalidInput(_)
            | Io { .. }
            | Parse { .. } => 3,
            DegenerateTriangle(_)
            | AllZero
            | EmptyBatch
            | DegenerateSpread(_)
            | NonFiniteLoss { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, MercatError>;
