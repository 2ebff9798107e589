use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {time:.6e} s: {reason}")]
    Integration { time: f64, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("undefined SNR: {0}")]
    UndefinedSnr(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { path: path.into(), reason: reason.into() }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Integration { .. } | Error::Calibration(_) => 3,
            Error::Fit(_) | Error::Degenerate(_) | Error::UndefinedSnr(_) => 4,
            Error::Domain(_) | Error::Format(_) => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Reject NaN and negative values with a named domain error.
pub(crate) fn ensure_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::domain(format!("{name} must be >= 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn ensure_unit_interval(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}
