use std::fmt;

use cavfb_core::ErrorCategory;

/// Failure class of a CLI run; each maps onto a fixed exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Config,
    Numeric,
    Fit,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::Config => 3,
            Kind::Numeric => 4,
            Kind::Fit => 5,
            Kind::Io => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Config => "config",
            Kind::Numeric => "numeric-instability",
            Kind::Fit => "fit-nonconvergence",
            Kind::Io => "io",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    /// Individual problems, e.g. every config violation found.
    pub details: Vec<String>,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Kind::Usage, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(Kind::Io, message)
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind.as_str(),
            "code": self.kind.exit_code(),
            "message": self.message,
            "details": self.details,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cavfb_core::Error> for CliError {
    fn from(e: cavfb_core::Error) -> Self {
        let kind = match e.category() {
            ErrorCategory::Config => Kind::Config,
            ErrorCategory::NumericInstability => Kind::Numeric,
            ErrorCategory::FitNonConvergence => Kind::Fit,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
