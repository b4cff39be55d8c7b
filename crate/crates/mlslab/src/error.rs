use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trivial class: {0}")]
    TrivialClass(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-positive-definite metric at ({0}, {1})")]
    MetricNotPositive(f64, f64),
    #[error("solver did not converge: {0}")]
    SolverFailure(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("fundamental-domain reduction exceeded {0} steps")]
    ReductionFailure(usize),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("gauge iteration diverged: {0}")]
    GaugeFailure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
