//! Command-line error surface: every failure exits nonzero and prints one
//! machine-readable JSON line to stderr.

use std::fmt;

use parkcast_core::Error as CoreError;

/// Failures the binary reports to its caller.
#[derive(Debug)]
pub enum CliError {
    /// The effective configuration (file plus flag overrides) violates one
    /// or more constraints; every violation is listed.
    ConfigInvalid { violations: Vec<String> },
    /// A pipeline stage failed. `code` is a stable machine-readable
    /// identifier, `message` the human-readable detail.
    Pipeline { code: &'static str, message: String },
}

impl CliError {
    pub fn invalid(violations: Vec<String>) -> Self {
        CliError::ConfigInvalid { violations }
    }

    pub fn one_violation(message: impl Into<String>) -> Self {
        CliError::ConfigInvalid {
            violations: vec![message.into()],
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } => 2,
            CliError::Pipeline { .. } => 1,
        }
    }

    /// One-line JSON for stderr: `{"error": code, "message": ...,
    /// "violations": [...]}` (violations only for `ConfigInvalid`).
    pub fn to_json(&self) -> String {
        match self {
            CliError::ConfigInvalid { violations } => serde_json::json!({
                "error": "ConfigInvalid",
                "message": format!(
                    "configuration invalid: {} constraint(s) violated",
                    violations.len()
                ),
                "violations": violations,
            })
            .to_string(),
            CliError::Pipeline { code, message } => serde_json::json!({
                "error": code,
                "message": message,
            })
            .to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::ConfigInvalid { violations } => {
                write!(f, "configuration invalid: {}", violations.join("; "))
            }
            CliError::Pipeline { code, message } => write!(f, "{code}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Stable identifier for each library error variant.
fn core_code(err: &CoreError) -> &'static str {
    match err {
        CoreError::OccupancyOutOfBounds { .. } => "OccupancyOutOfBounds",
        CoreError::EmptyGrid => "EmptyGrid",
        CoreError::GridMismatch { .. } => "GridMismatch",
        CoreError::TooFewRows { .. } => "TooFewRows",
        CoreError::InvalidStay { .. } => "InvalidStay",
        CoreError::FileUnreadable { .. } => "FileUnreadable",
        CoreError::SchemaMismatch { .. } => "SchemaMismatch",
        CoreError::InvalidConfig(_) => "InvalidConfig",
        CoreError::InvalidCutoff { .. } => "InvalidCutoff",
        CoreError::UnsupportedOrder { .. } => "UnsupportedOrder",
        CoreError::WindowUncovered { .. } => "WindowUncovered",
        CoreError::IncompleteRow { .. } => "IncompleteRow",
        CoreError::UnknownCategory(_) => "UnknownCategory",
        CoreError::EmptyResult(_) => "EmptyResult",
        CoreError::ShapeMismatch { .. } => "ShapeMismatch",
        CoreError::Divergence { .. } => "Divergence",
        CoreError::DigestMismatch { .. } => "DigestMismatch",
        CoreError::CorruptArtifact { .. } => "CorruptArtifact",
        CoreError::EmptyInput(_) => "EmptyInput",
        CoreError::NaiveZero { .. } => "NaiveZero",
        CoreError::InsufficientHistory { .. } => "InsufficientHistory",
        CoreError::StaleFeed { .. } => "StaleFeed",
        CoreError::IncompleteState(_) => "IncompleteState",
        CoreError::CoverageGap { .. } => "CoverageGap",
        CoreError::Io(_) => "Io",
        CoreError::Csv(_) => "Csv",
        CoreError::Json(_) => "Json",
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::Pipeline {
            code: core_code(&err),
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Pipeline {
            code: "Io",
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Pipeline {
            code: "Json",
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
