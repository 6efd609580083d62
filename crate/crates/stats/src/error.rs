use momenta_core::CoreError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("sample for landmark {landmark} ({group}) is degenerate: {axis} column has zero variance")]
    DegenerateSample {
        landmark: usize,
        group: String,
        axis: &'static str,
    },

    #[error("model fitting needs at least {need} rows, got {got}")]
    TooFewRows { got: usize, need: usize },

    #[error("contour estimation needs at least {need} draws, got {got}")]
    TooFewDraws { got: usize, need: usize },

    #[error("group averaging did not converge within {iterations} outer iterations")]
    AveragingNotConverged { iterations: usize },

    #[error("log map for case member {member} did not converge (miss-fit {missfit:.3e}, tol {tol:.3e})")]
    CaseLogMap {
        member: usize,
        missfit: f64,
        tol: f64,
    },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl StatsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StatsError::Io {
            path: path.into(),
            source,
        }
    }
}
