use std::path::PathBuf;

use serde_json::json;
use tfr_core::TfrError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("mlp_vector needs a non-empty Train set in the dataset")]
    MissingTrainSet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("config hash mismatch: dataset {dataset}, {what} {found}")]
    ConfigHashMismatch {
        dataset: String,
        what: String,
        found: String,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: TfrError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) | HarnessError::ConfigFile { .. } => "config",
            HarnessError::MissingTrainSet => "missing_train_set",
            HarnessError::ShapeMismatch(_) => "shape_mismatch",
            HarnessError::ConfigHashMismatch { .. } => "config_hash_mismatch",
            HarnessError::Core { .. } => "runtime",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv(_) => "csv",
            HarnessError::Json(_) => "json",
        }
    }

    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::ConfigFile { .. } => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, TfrError> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| HarnessError::Core {
            context: what.into(),
            source,
        })
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
