use std::fmt;

/// Errors raised across the toolkit. Each failure class has its own variant so
/// callers (and the CLI exit codes) can tell them apart.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} values, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("trailing data after {expected} payload values")]
    TrailingData { expected: usize },

    #[error("negative entry {value} at flat index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no decoder width assignment fits the parameter budget {target}")]
    InfeasibleBudget { target: usize },

    #[error("loss diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        /// Loss values up to the last finite one.
        trace: Vec<f64>,
        /// Last iterate with a finite loss; absent for the unfactored baseline.
        last_finite: Option<Box<crate::solver::FitState>>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    /// Short stable identifier, used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MalformedHeader(_) => "malformed-header",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::TrailingData { .. } => "trailing-data",
            Error::NegativeEntry { .. } => "negative-entry",
            Error::Domain(_) => "domain",
            Error::InfeasibleBudget { .. } => "infeasible-budget",
            Error::Diverged { .. } => "diverged",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
