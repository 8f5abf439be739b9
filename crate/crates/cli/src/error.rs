use thiserror::Error;

use chanprob_core::simulator::RebalanceError;
use chanprob_core::{AnalyticsError, GraphError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; `field` is the dotted path of the offending entry.
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("input data error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl ToString) -> Self {
        CliError::Config { field: field.into(), reason: reason.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Input(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RebalanceError> for CliError {
    fn from(e: RebalanceError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
