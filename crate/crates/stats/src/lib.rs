//! Detection statistics over residual landmark momenta.
//!
//! Given per-landmark samples of 2-D observations (momentum coordinates by
//! default, raw positions in comparison mode), the crate provides:
//!
//! * [`sample`] — per-landmark sample matrices and mean-momentum norms,
//! * [`model`] / [`mcmc`] — a hierarchical bivariate-normal model per
//!   landmark–group cell, fitted by Metropolis-within-Gibbs,
//! * [`predictive`] — posterior-predictive draws and central marginal
//!   intervals,
//! * [`kde`] / [`contour`] — gridded kernel density estimates and 95%
//!   highest-density-region contour polygons,
//! * [`overlap`] — interval-box overlap ratios and predictor selection,
//! * [`detect`](mod@detect) — the end-to-end two-group detection pipeline,
//! * [`export`] — JSON report and CSV contour/scatter writers.

pub mod contour;
pub mod detect;
pub mod error;
pub mod export;
pub mod kde;
pub mod mcmc;
pub mod model;
pub mod overlap;
pub mod predictive;
pub mod sample;

pub use detect::{detect, DetectOptions, DetectionOutput, DetectionReport};
pub use error::StatsError;
pub use mcmc::{fit_posterior, McmcOptions, PosteriorDraws};
pub use model::{HyperConfig, ModelParameters};
pub use sample::{mean_momentum_norm, GroupTag, LandmarkSampleMatrix};
