//! Exit-code taxonomy: configuration problems, data/I-O problems, and
//! numerical failures exit with distinct codes (usage errors exit 2 via
//! clap).

use icebox_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCategory {
    /// Bad or missing configuration (exit 3).
    Config,
    /// Dataset, report, or filesystem problems (exit 4).
    Data,
    /// Numerical or estimation failure (exit 5).
    Numerical,
}

impl ExitCategory {
    pub fn code(self) -> i32 {
        match self {
            ExitCategory::Config => 3,
            ExitCategory::Data => 4,
            ExitCategory::Numerical => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: ExitCategory,
    pub message: String,
}

impl CliError {
    pub fn new(category: ExitCategory, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let category = match &e {
            CoreError::InvalidParams(_) | CoreError::InvalidConfig(_) => ExitCategory::Config,
            CoreError::InvalidInput { .. }
            | CoreError::Data { .. }
            | CoreError::Report(_)
            | CoreError::Io(_) => ExitCategory::Data,
            CoreError::SimulationUnstable { .. }
            | CoreError::Numerical { .. }
            | CoreError::EstimationFailed(_)
            | CoreError::Diagnostics(_) => ExitCategory::Numerical,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitCategory::Data, e.to_string())
    }
}
