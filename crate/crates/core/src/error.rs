use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field of length {got} is not aligned to a grid of {expected} points")]
    Alignment { expected: usize, got: usize },

    #[error("position {x} lies outside the domain [{x_min}, {x_max}]")]
    OutOfDomain { x: f64, x_min: f64, x_max: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("bandwidth {bandwidth} is smaller than the grid spacing {spacing}")]
    InvalidBandwidth { bandwidth: f64, spacing: f64 },

    #[error("{cells} coarse cells do not divide {n_points} grid points")]
    CoarseCells { cells: usize, n_points: usize },

    #[error("records share the timestamp {0}; cannot difference")]
    IdenticalTimestamps(f64),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("numerical abort at step {step} (t = {time}): {reason}")]
    NumericalAbort {
        step: usize,
        time: f64,
        reason: String,
    },
}

impl Error {
    pub fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
