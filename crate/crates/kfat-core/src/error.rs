//! Error type shared across the crate.

use std::fmt;

/// Errors raised by model construction, filtering, simulation and tuning.
#[derive(Debug, Clone)]
pub enum Error {
    /// Matrix or vector dimensions are inconsistent.
    Dimension(String),
    /// A scalar or matrix value is outside its admissible range.
    InvalidValue(String),
    /// A matrix that must be positive definite failed its Cholesky factorization.
    NotPositiveDefinite(String),
    /// A degenerate statistic (e.g. zero mean NEES) made a cost undefined.
    Degenerate(String),
    /// Configuration file could not be read or parsed.
    Config(String),
    /// A covariance recursion grew without bound.
    Diverged { iterations: usize, norm: f64 },
    /// Filter failure at a specific step.
    FilterStep { step: usize, source: Box<Error> },
    /// Monte Carlo failure in a specific run.
    MonteCarloRun { run: usize, source: Box<Error> },
    /// Objective evaluation failure at a specific sample time.
    CostEval { dt: f64, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::InvalidValue(msg) => write!(f, "invalid value: {msg}"),
            Error::NotPositiveDefinite(msg) => {
                write!(f, "matrix not positive definite: {msg}")
            }
            Error::Degenerate(msg) => write!(f, "degenerate statistic: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Diverged { iterations, norm } => write!(
                f,
                "covariance recursion diverged after {iterations} iterations (norm {norm:.3e})"
            ),
            Error::FilterStep { step, source } => {
                write!(f, "filter failed at step {step}: {source}")
            }
            Error::MonteCarloRun { run, source } => {
                write!(f, "Monte Carlo run {run} failed: {source}")
            }
            Error::CostEval { dt, source } => {
                write!(f, "cost evaluation at dt={dt} failed: {source}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::FilterStep { source, .. }
            | Error::MonteCarloRun { source, .. }
            | Error::CostEval { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl Error {
    pub fn at_step(self, step: usize) -> Error {
        Error::FilterStep {
            step,
            source: Box::new(self),
        }
    }

    pub fn in_run(self, run: usize) -> Error {
        Error::MonteCarloRun {
            run,
            source: Box::new(self),
        }
    }

    pub fn at_dt(self, dt: f64) -> Error {
        Error::CostEval {
            dt,
            source: Box::new(self),
        }
    }
}
