use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coordinate {axis} = {value} lies outside the unit domain")]
    Domain { axis: usize, value: f64 },

    #[error("data row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("density {value:e} at quadrature node {node} is too small for the Fisher metric")]
    SingularMetric { node: usize, value: f64 },

    #[error("function does not satisfy its constraint: {0}")]
    Constraint(String),

    #[error("truncated vector has zero norm")]
    DegenerateTruncation,

    #[error("square-root density vanishes at observation {index}; gradient is singular")]
    GradientSingularity { index: usize },

    #[error("optimization failed after {iterations} iterations: {message}")]
    Optimization {
        message: String,
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of numerical origin (as opposed to configuration or I/O).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFinite(_)
            | Error::SingularMetric { .. }
            | Error::DegenerateTruncation
            | Error::GradientSingularity { .. }
            | Error::Optimization { .. } => true,
            Error::Row { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
