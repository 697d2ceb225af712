use thiserror::Error;

/// Errors produced by the thresholding, training and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// Per-class percentile ordering violated after clamping.
    #[error("configuration error: {}", format_class_errors(.0))]
    ClassConfig(Vec<ClassConfigError>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "non-finite loss at iteration {iteration}: supervised={supervised}, unlabeled={unlabeled}"
    )]
    NonFiniteLoss {
        iteration: u64,
        supervised: f64,
        unlabeled: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable kind string.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::ClassConfig(_) | Error::Config(_) => "configuration",
            Error::NonFiniteLoss { .. } => "non-finite-loss",
            Error::Parse { .. } => "parse",
            Error::TraceMismatch(_) => "trace-mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfigError {
    pub class: usize,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub negative_ratio: f64,
}

fn format_class_errors(errs: &[ClassConfigError]) -> String {
    errs.iter()
        .map(|e| {
            format!(
                "class {}: kappa_minus={} >= kappa_plus={} (negative ratio {})",
                e.class, e.kappa_minus, e.kappa_plus, e.negative_ratio
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
