use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants fall into four families that map onto process exit codes:
/// usage/config problems, data problems, numerical failures, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("schema error in {path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("data error in {path} line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("constant feature `{0}` cannot be normalized")]
    ConstantFeature(String),

    #[error("missing covariate `{0}`")]
    MissingCovariate(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("no events in data")]
    NoEvents,

    #[error(
        "Cox fit did not converge: coefficient norm {norm:.3} exceeded bound {bound} \
         (monotone likelihood); use a positive penalizer"
    )]
    Divergence { norm: f64, bound: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no valid comparable pairs")]
    NoValidPairs,

    #[error("statistic undefined on {failed} of {total} bootstrap resamples")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("all grid configurations failed: {0}")]
    GridFailed(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::MissingColumn { .. }
            | Error::Row { .. }
            | Error::Data(_)
            | Error::ConstantFeature(_)
            | Error::MissingCovariate(_)
            | Error::UnknownFeature(_)
            | Error::NoEvents
            | Error::NoValidPairs
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Divergence { .. }
            | Error::Numerical(_)
            | Error::BootstrapFailures { .. }
            | Error::GridFailed(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
