use thiserror::Error;

pub type Result<T> = std::result::Result<T, AimError>;

#[derive(Debug, Error)]
pub enum AimError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter `{0}`; step rejected")]
    NonFinite(String),

    #[error("batch normalization needs at least 2 instances in train mode, got {0}")]
    BatchTooSmall(usize),

    #[error("AUC is undefined: labels contain a single class")]
    UndefinedAuc,

    #[error("search collapsed: every embedding dimension was pruned; lower c")]
    SearchCollapsed,

    #[error("forward cache does not match the current model state")]
    StaleCache,

    #[error("config error: {0}")]
    Config(String),

    #[error("no instances")]
    Empty,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AimError {
    /// True for errors caused by user input rather than by the run itself.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            AimError::Parse { .. }
                | AimError::Validation(_)
                | AimError::Config(_)
                | AimError::Empty
                | AimError::Io(_)
                | AimError::Json(_)
                | AimError::UndefinedAuc
        )
    }
}
