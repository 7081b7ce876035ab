use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate slit: wall margin {margin:e} m leaves no opening in a {width:e} m slit")]
    DegenerateSlit { margin: f64, width: f64 },

    #[error("aliasing: requested order {n_max} needs more than {sample_count} samples")]
    Aliasing { n_max: usize, sample_count: usize },

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("calibration infeasible: target {target} outside attainable range [{min}, {max}]")]
    CalibrationInfeasible { target: f64, min: f64, max: f64 },

    #[error("velocity grid does not cover the spectrum: truncated tail mass {tail:e}")]
    Coverage { tail: f64 },

    #[error("no beam: the slit geometry blocks every velocity on the grid")]
    NoBeam,

    #[error("degenerate pattern: mean signal is {0}")]
    DegeneratePattern(f64),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("mixed periods: {0}")]
    MixedPeriod(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
