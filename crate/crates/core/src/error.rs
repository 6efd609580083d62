//! Error type shared by the geometry, matching and IO modules.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Kernel parameters violate their invariants.
    #[error("invalid kernel parameter: {0}")]
    KernelParameter(String),

    /// The Bessel evaluation is not representable at this radius.
    #[error("kernel evaluation failed at r={r} (a={a}): argument out of range")]
    KernelEvaluation { r: f64, a: f64 },

    /// Radius at or below the degeneracy cutoff; the interaction direction
    /// is undefined and the caller must zero the pairwise term.
    #[error("degenerate radius {r} <= cutoff {r_cutoff}")]
    DegenerateRadius { r: f64, r_cutoff: f64 },

    /// Mismatched landmark counts between paired inputs.
    #[error("{context}: expected {expected} landmarks, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The particle integrator produced a non-finite state.
    #[error("particle system diverged at t={time}")]
    Divergence { time: f64 },

    /// Two landmarks coincide, so the Gram matrix is singular and momentum
    /// is not identifiable.
    #[error("landmarks {i} and {j} coincide (distance {distance:.3e}); momentum conversion is singular")]
    CoincidentLandmarks { i: usize, j: usize, distance: f64 },

    /// The Gram factorization failed even after the maximum diagonal jitter.
    #[error("gram matrix not positive definite after maximal jitter (condition estimate {condition:.3e})")]
    GramConditioning { condition: f64 },

    /// An inner Log-map solve inside the averaging loop failed to converge.
    #[error("log map for group member {member} did not converge (final miss-fit {missfit:.3e}, tol {tol:.3e})")]
    AveragingMember {
        member: usize,
        missfit: f64,
        tol: f64,
    },

    #[error("ingestion error in {path}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Ingestion {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn ingest(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        CoreError::Ingestion {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
