use std::fmt::Display;
use std::path::Path;

use surfelgrad_core::Error as CoreError;

/// Failure of a subcommand, mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// A check ran to completion and reported failure.
    CheckFailed(String),
    Config(String),
    Numerical(String),
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, err: impl Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::CheckFailed(_) => "check_failed",
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::CheckFailed(m) | CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }

    /// Single-line JSON record written to stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.message(),
        })
        .to_string()
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let message = err.to_string();
        match err {
            CoreError::Diverged { .. }
            | CoreError::NonFiniteOutput { .. }
            | CoreError::LightAtSurfel { .. }
            | CoreError::NoHit { .. } => CliError::Numerical(message),
            CoreError::Io(_) | CoreError::Image(_) | CoreError::Format(_) => CliError::Io(message),
            _ => CliError::Config(message),
        }
    }
}
