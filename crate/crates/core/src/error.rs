use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget exceeded: {what} requires {required}, limit is {limit}; {hint}")]
    BudgetExceeded {
        what: String,
        required: u128,
        limit: u128,
        hint: String,
    },

    #[error("graph is disconnected ({} components); {hint}", components.len())]
    Disconnected {
        components: Vec<Vec<usize>>,
        hint: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl MmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MmError::InvalidArgument(msg.into())
    }
}

impl From<serde_json::Error> for MmError {
    fn from(e: serde_json::Error) -> Self {
        MmError::Parse(e.to_string())
    }
}

impl From<csv::Error> for MmError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => return MmError::Io(io),
                other => return MmError::Parse(format!("{other:?}")),
            }
        }
        MmError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MmError>;
