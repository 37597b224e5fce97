use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] nls_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// 2 for configuration problems, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> LabError {
    LabError::Config(e.to_string())
}
