use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("degenerate volume (pivot ratio {ratio:e})")]
    DegenerateVolume { ratio: f64 },
    #[error("point is off the hypersurface (|F - c| = {residual:e}); project first")]
    OffSurface { residual: f64 },
    #[error("projection onto the hypersurface failed after {iterations} iterations (residual {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },
    #[error("contact condition violated: {0}")]
    ContactViolation(String),
    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String, last_point: Vec<f64> },
    #[error("return to section not reached within time {0}")]
    Escape(f64),
    #[error("no orbit: {0}")]
    NoOrbit(String),
    #[error("polar-degenerate point: {0}; use the Cartesian chart")]
    PolarDegenerate(String),
    #[error("constructive failure: {0}")]
    Constructive(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
