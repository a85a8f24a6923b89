use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by simulators, oracles, checks and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("interval out of order: start {start} > end {end}")]
    Ordering { start: f64, end: f64 },

    #[error("level {level} is never reached: cumulative rate is bounded by {sup}")]
    Unreachable { level: f64, sup: f64 },

    #[error("tempered acceptance probability {acceptance:e} is below 1e-6 for dt = {dt}; use a smaller step")]
    Acceptance { dt: f64, acceptance: f64 },

    #[error("driver path does not exceed level {level}: {context}")]
    InsufficientPath { level: f64, context: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("probe configuration: {0}")]
    Probe(String),

    #[error("need at least {needed} samples, got {got}")]
    Sizing { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path of a validation error, e.g. `alpha` becomes
    /// `process.time_change.alpha`.
    pub(crate) fn within(self, prefix: &str) -> Self {
        match self {
            Error::Invalid { field, message } => Error::Invalid {
                field: format!("{prefix}.{field}"),
                message,
            },
            other => other,
        }
    }
}

pub(crate) fn check_domain(ok: bool, what: &'static str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
