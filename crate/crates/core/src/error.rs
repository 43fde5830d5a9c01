use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamError {
    pub field: &'static str,
    pub message: &'static str,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    Validation(Vec<ParamError>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("step size underflow at t = {t:e} (last good sigma2 = {sigma2:e})")]
    StepUnderflow { t: f64, sigma2: f64 },

    #[error(
        "density stayed negative after {halvings} step halvings at t = {t:e} \
         (min P = {min_value:e} at index {index})"
    )]
    Negativity {
        t: f64,
        halvings: u32,
        min_value: f64,
        index: usize,
    },

    #[error(
        "density reached the domain boundary at t = {t:e} \
         (edge/peak = {ratio:e}); widen the grid"
    )]
    BoundaryLeak { t: f64, ratio: f64 },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Config(_) | Error::Io { .. }
        )
    }
}

fn join(errors: &[ParamError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
