//! Experiment harness, file formats, and CLI for the squared-range robust
//! localization estimators.
//!
//! [`harness`] runs seeded Monte Carlo campaigns over the built-in scenarios
//! (or custom JSON specs) and aggregates RMSE/bias/iteration statistics with
//! CRLB reference bounds. [`io`] reads measurement CSV files and writes the
//! campaign CSV/JSON outputs. [`cli`] is the `srloc` command-line front end.

pub mod cli;
pub mod harness;
pub mod io;

use std::path::PathBuf;

/// Errors of the harness and IO layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The experiment spec failed validation; `pointer` locates the offending
    /// field JSON-pointer style.
    #[error("invalid experiment spec at {pointer}: {message}")]
    Spec { pointer: String, message: String },
    /// A measurement or geometry CSV could not be parsed.
    #[error("{path}:{line}: {message}")]
    CsvFormat { path: PathBuf, line: usize, message: String },
    /// A single trial exhausted its degenerate-geometry redraw budget.
    #[error("trial {trial_index} at sweep point {sweep_index} exhausted {redraws} redraws")]
    TrialExhausted { sweep_index: usize, trial_index: usize, redraws: usize },
    /// Systemic failure: more than 10% of trials needed redraws.
    #[error("campaign degenerate: {redraws} redraws across {trials} trials")]
    TooManyRedraws { redraws: usize, trials: usize },
    #[error(transparent)]
    Core(#[from] srloc_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    fn spec(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec { pointer: pointer.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
