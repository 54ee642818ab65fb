use std::fmt;

use lexaudit_core::dataset::DatasetError;
use lexaudit_core::metrics::MetricsError;
use lexaudit_core::predictions::PredictionError;
use lexaudit_core::report::ReportError;
use lexaudit_gateway::GatewayError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_AUTH: u8 = 3;
pub const EXIT_UNREACHABLE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<PredictionError> for CliError {
    fn from(e: PredictionError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Options(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        let code = match &e {
            GatewayError::Auth { .. } => EXIT_AUTH,
            GatewayError::Unreachable { .. } => EXIT_UNREACHABLE,
            GatewayError::Io { .. } => EXIT_DATA,
            GatewayError::Config(_) | GatewayError::Template(_) | GatewayError::MissingApiKey(_) => {
                EXIT_USAGE
            }
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
