//! Error kinds and their process exit codes.
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 1    | usage: bad flags, bad config, invalid setting name   |
//! | 2    | data: unreadable, malformed or inconsistent input    |
//! | 3    | numeric: a computation had no well-defined result    |

use biexciton_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }

    /// Prefixes the message with the file or stage it came from.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        CliError {
            kind: self.kind,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::InvalidParameter { .. } => ErrorKind::Usage,
            CoreError::Parse { .. }
            | CoreError::Io(_)
            | CoreError::Json(_)
            | CoreError::Tomography(_) => ErrorKind::Data,
            CoreError::NotHermitian(_)
            | CoreError::BadTrace(_)
            | CoreError::NotPositive(_)
            | CoreError::Normalization(_)
            | CoreError::ZeroCoincidences => ErrorKind::Numeric,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}
