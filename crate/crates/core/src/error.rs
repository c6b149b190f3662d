use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::model::MlpModel;
use crate::trainer::TrainLog;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone)]
pub enum Error {
    /// Input data contains non-finite values or is otherwise unusable.
    InvalidData(String),
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// Shapes or lengths of arguments do not agree.
    InvalidInput(String),
    /// A computation produced a non-finite value or failed to converge.
    Numerical(String),
    /// Training diverged; carries the last good checkpoint.
    Diverged(Box<Divergence>),
    /// No penalty weight in the grid satisfied the plateau bound.
    SearchFailed(Box<crate::gamma_search::SearchReport>),
}

/// State captured when training hits a non-finite value.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub iteration: usize,
    pub reason: String,
    /// Parameters at the most recent epoch boundary (the initial model if
    /// the first epoch never completed).
    pub last_good: MlpModel,
    pub log: TrainLog,
}

impl Error {
    /// Whether the error signals numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Diverged(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Diverged(d) => write!(
                f,
                "training diverged at iteration {}: {}",
                d.iteration, d.reason
            ),
            Error::SearchFailed(report) => write!(
                f,
                "no penalty weight kept L_orth within the plateau bound {:.6e} ({} probes)",
                report.bound,
                report.probes.len()
            ),
        }
    }
}

impl core::error::Error for Error {}
