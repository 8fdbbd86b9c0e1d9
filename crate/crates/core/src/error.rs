use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature {feature} is constant; scaling is degenerate")]
    ScaleDegenerate { feature: usize },
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("matrix is singular or rank deficient")]
    SingularMatrix,
    #[error("model has not been fitted")]
    NotFitted,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("every grid combination failed; first failure: {0}")]
    GridExhausted(Box<Error>),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("state trace {trace:.6} fell below {threshold} at epoch {epoch}")]
    TraceCollapse {
        epoch: usize,
        trace: f64,
        threshold: f64,
    },
    #[error("Fock truncation leaked {leak:.3e} of the norm (tolerance {tolerance:.1e})")]
    Truncation { leak: f64, tolerance: f64 },
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parameter outside its domain: {0}")]
    Domain(String),
    #[error("solver did not converge at V = {voltage} V")]
    NonConvergence { voltage: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("no complete ON/OFF cycle found in trace")]
    NoCycles,
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Json(_) => true,
            Error::Fold { source, .. } | Error::Layer { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
