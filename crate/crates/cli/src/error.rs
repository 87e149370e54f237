use std::fmt;

use gradnap_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<String>,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            stage: None,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            stage: None,
            message: message.into(),
        }
    }

    pub fn in_stage(mut self, stage: &str) -> Self {
        self.stage.get_or_insert_with(|| stage.to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage {
            Some(stage) => write!(f, "[{stage}] {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match e {
            CoreError::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        };
        CliError {
            kind,
            stage: None,
            message: e.to_string(),
        }
    }
}

/// Attaches a stage name to core errors.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T, E: Into<CliError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| e.into().in_stage(stage))
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}
