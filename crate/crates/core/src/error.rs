use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("chain component {component:?} has {size} nodes, more than the limit of {max}")]
    Capacity {
        component: Vec<usize>,
        size: usize,
        max: usize,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
