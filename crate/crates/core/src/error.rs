use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite at t = {time}")]
    Explosion { time: f64 },

    #[error("test function returned a non-finite value at {state}")]
    NonFiniteEvaluation { state: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error {error_estimate}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("root bracket expansion diverged after {doublings} doublings (target {target})")]
    BracketDivergence { doublings: usize, target: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("chain is reducible: invariant vector not unique (null space dimension {dimension})")]
    Reducible { dimension: usize },

    #[error("exponential moment is infinite: alpha = {alpha} is not below the abscissa {abscissa}")]
    MomentDivergence { alpha: f64, abscissa: f64 },

    #[error("grid resolution {spacing} too coarse for jump support {support}")]
    Resolution { spacing: f64, support: f64 },

    #[error("hitting-time table diverges at node {node}")]
    NodeDivergence { node: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
