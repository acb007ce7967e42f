//! CLI error taxonomy and its mapping to exit codes and the machine-readable
//! error object printed on stderr.

use std::fmt;

/// Any failure the CLI can hit, classified for exit-code mapping.
#[derive(Debug)]
pub enum CliError {
    /// The config file is unreadable, unparsable, or semantically invalid.
    /// `path` names the offending config location when one is known.
    Config {
        path: Option<String>,
        message: String,
    },
    /// Command-line usage problem: bad verb, flag, or flag combination.
    Usage(String),
    /// Output could not be written.
    Io(String),
    /// A computation error propagated from the core library.
    Core(estimand_core::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: Some(path.into()),
            message: message.into(),
        }
    }

    pub fn config_file(message: impl Into<String>) -> Self {
        CliError::Config {
            path: None,
            message: message.into(),
        }
    }

    /// Exit code: 0 is success, 1 a validation error, 2 a numerical or
    /// runtime error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Core(e) => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Stable snake_case tag identifying the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
        }
    }

    /// The config path the error points at, when one is known.
    pub fn path(&self) -> Option<&str> {
        match self {
            CliError::Config { path, .. } => path.as_deref(),
            _ => None,
        }
    }

    /// One-line JSON error object for stderr.
    pub fn to_json(&self) -> String {
        let mut object = serde_json::Map::new();
        object.insert("kind".into(), self.kind().into());
        object.insert("message".into(), self.to_string().into());
        if let Some(path) = self.path() {
            object.insert("path".into(), path.into());
        }
        serde_json::json!({ "error": object }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config {
                path: Some(path),
                message,
            } => write!(f, "{path}: {message}"),
            CliError::Config {
                path: None,
                message,
            } => write!(f, "{message}"),
            CliError::Usage(message) => write!(f, "{message}"),
            CliError::Io(message) => write!(f, "{message}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<estimand_core::Error> for CliError {
    fn from(e: estimand_core::Error) -> Self {
        CliError::Core(e)
    }
}
