use std::path::PathBuf;

use dndf_core::preprocess::Stage;

pub type Result<T, E = RunError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] dndf_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersion { found: u64, expected: u64 },
    #[error("model file digest mismatch: stored {stored}, computed {computed}")]
    ModelDigest { stored: String, computed: String },
    #[error("stage {stage}: {source}")]
    Stage { stage: Stage, source: Box<RunError> },
    #[error("self-check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunError {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }

    /// 1 for bad input (config, data, files), 2 for runtime and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
            RunError::Stage { source, .. } => source.exit_code(),
            RunError::Io { .. } | RunError::Check(_) => 2,
            RunError::Csv { .. }
            | RunError::Config(_)
            | RunError::ModelFormat(_)
            | RunError::ModelVersion { .. }
            | RunError::ModelDigest { .. }
            | RunError::Json(_) => 1,
        }
    }
}
