use thiserror::Error;

/// Errors produced across the estimation pipeline.
#[derive(Debug, Error)]
pub enum GomError {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("response out of range at subject {subject}, item {item}: got {value}, item has {categories} categories")]
    ResponseOutOfRange {
        subject: usize,
        item: usize,
        value: usize,
        categories: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank K={k} out of range for a {nrows}x{ncols} matrix")]
    RankOutOfRange { k: usize, nrows: usize, ncols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dense SVD oracle size guard exceeded: min dimension {0} > 500")]
    OracleSizeGuard(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("pure-subject submatrix is near-singular (condition number {0:.3e})")]
    NearSingularVertices(f64),

    #[error("degenerate item-parameter block (item {item}, profile {profile}): all mass clipped to zero")]
    DegenerateBlock { item: usize, profile: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl GomError {
    /// Process exit code for the CLI: 2 usage, 3 validation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            GomError::Config(_) => 2,
            GomError::Validation(_)
            | GomError::ResponseOutOfRange { .. }
            | GomError::DimensionMismatch(_)
            | GomError::RankOutOfRange { .. }
            | GomError::Io { .. }
            | GomError::Parse { .. } => 3,
            GomError::NonFinite
            | GomError::OracleSizeGuard(_)
            | GomError::Degenerate(_)
            | GomError::NearSingularVertices(_)
            | GomError::DegenerateBlock { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, GomError>;
