use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, stable across releases so callers can map errors
/// onto exit codes or retry policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Config,
    NumericInstability,
    FitNonConvergence,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::NumericInstability => "numeric-instability",
            ErrorCategory::FitNonConvergence => "fit-nonconvergence",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("feedback loop unstable at omega = {omega:e} rad/s: |1 - chi_fb| = {margin:e}")]
    LoopInstability { omega: f64, margin: f64 },

    #[error("effective linewidth is non-positive ({kappa_eff:e} rad/s)")]
    NonPositiveLinewidth { kappa_eff: f64 },

    #[error("steady-state root at n_c = {n_c:e} not polished: relative residual {residual:e} > {tolerance:e}")]
    RootPolishing {
        n_c: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("singular linear system at omega = {omega:e} rad/s (condition number {condition:e})")]
    SingularSystem { omega: f64, condition: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit did not converge: {0}")]
    FitFailed(String),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter { .. } | Error::Unsupported(_) => ErrorCategory::Config,
            Error::LoopInstability { .. }
            | Error::NonPositiveLinewidth { .. }
            | Error::RootPolishing { .. }
            | Error::SingularSystem { .. } => ErrorCategory::NumericInstability,
            Error::Degenerate(_) | Error::InsufficientData(_) | Error::FitFailed(_) => {
                ErrorCategory::FitNonConvergence
            }
        }
    }
}
