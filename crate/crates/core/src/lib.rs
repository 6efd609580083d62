//! Geodesic landmark matching and momentum-space averaging.
//!
//! The crate works on ordered 2-D landmark templates. Deformations between
//! templates are geodesics of a diffeomorphism group, reduced to a finite
//! particle system in position/momentum variables `(q, p)`:
//!
//! * [`kernel`] — Green's functions of `(I − a²Δ)^b` and their Gram matrices,
//! * [`geodesic`] — forward integration of the particle system (the Exp map),
//!   velocity/momentum conversion and energy quantities,
//! * [`shooting`] — the inverse problem (the Log map) solved by
//!   prediction–correction shooting,
//! * [`averaging`] — iterative weighted averaging on the momentum field,
//!   producing a group average plus per-member residual momenta,
//! * [`io`] — CSV/JSON ingestion and synthetic shape generators,
//! * [`seed`] — deterministic stream derivation for all randomness.

pub mod averaging;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod kernel;
pub mod seed;
pub mod shooting;

mod bessel;

pub use error::CoreError;
pub use geodesic::{GeodesicTrajectory, LandmarkTemplate, MomentumField};
pub use kernel::KernelSpec;

/// 2-D point, displacement, velocity or momentum component.
pub type Vec2 = nalgebra::Vector2<f64>;
