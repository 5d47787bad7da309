use thiserror::Error;

#[derive(Debug, Error)]
pub enum TfrError {
    #[error("invalid system: {0}")]
    InvalidSpec(String),
    #[error("heat sources {first} and {second} overlap at cell ({row}, {col})")]
    Overlap {
        first: usize,
        second: usize,
        row: usize,
        col: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("intensity {value} of source {index} outside [{min}, {max}] W/m^2")]
    Range {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("all boundary faces are adiabatic; the steady problem has no unique solution")]
    SingularSystem,
    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("direct factorization failed: {0}")]
    Factorization(String),
    #[error("sample {index} of set {set}: {source}")]
    Sample {
        set: String,
        index: usize,
        #[source]
        source: Box<TfrError>,
    },
    #[error("monitor placement failed: {0}")]
    Placement(String),
    #[error("no monitoring points available")]
    EmptyMonitors,
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("empty list")]
    EmptyList,
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TfrError>;
