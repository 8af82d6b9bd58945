//! Front-end error types.

use thiserror::Error;

/// One named configuration problem.
#[derive(Debug, Clone)]
pub struct ValidationIssue {
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("invalid configuration:\n{}", format_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot header mismatch: {0}")]
    HeaderMismatch(String),

    #[error(transparent)]
    Core(#[from] msflux_core::CoreError),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}
