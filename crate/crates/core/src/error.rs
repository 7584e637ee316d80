use thiserror::Error;

/// Errors produced by estimation, optimisation and backtesting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("spectrum is not conjugate-symmetric (max residual {residual:e})")]
    SymmetryViolation { residual: f64 },

    #[error("degenerate spectral mean (norm {norm:e}): no return direction to optimise")]
    DegenerateMean { norm: f64 },

    #[error("covariance is singular ({detail}); retry with a positive ridge")]
    Singular { detail: String },

    #[error("covariance is not positive semi-definite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemiDefinite { eigenvalue: f64 },

    #[error("{path}: row {row}: {message}")]
    Ingest {
        path: String,
        row: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Wrap an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by bad input data or configuration rather
    /// than by the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::EmptyInput(_)
            | Error::Ingest { .. }
            | Error::Io { .. } => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
