//! The Log map: prediction–correction shooting for the initial momentum that
//! carries a reference template onto a target.
//!
//! Each iteration integrates the particle system from the current guess,
//! measures the landmark miss-fit against the target, and corrects the nodal
//! velocity field by `u ← u + h·(target − endpoint)`, converting to momentum
//! through the Gram system of the reference. The correction step `h` is held
//! constant while the miss-fit decreases and halved whenever a trial makes it
//! worse.

use crate::error::CoreError;
use crate::geodesic::{
    evolve, GramSolver, LandmarkTemplate, MomentumField,
};
use crate::kernel::KernelSpec;
use crate::Vec2;
use serde::{Deserialize, Serialize};

/// Smallest correction step before the search is declared stuck.
const H_FLOOR: f64 = 1e-4;

/// Controls for the prediction–correction search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Initial correction step.
    pub h0: f64,
    /// Step-shrink factor applied when a trial increases the miss-fit.
    pub shrink: f64,
    /// Landmark-RMS miss-fit tolerance (length units).
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Integrator grid resolution.
    pub steps: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            h0: 0.5,
            shrink: 0.5,
            tol: 1e-6,
            max_iter: 500,
            steps: 20,
        }
    }
}

impl ShootingOptions {
    /// Default options with the tolerance scaled to a template's diameter
    /// (`10⁻⁶·diameter`, floored for degenerate templates).
    pub fn scaled_to(template: &LandmarkTemplate) -> Self {
        ShootingOptions {
            tol: 1e-6 * template.diameter().max(1e-3),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "shooting tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.shrink.is_nan() || self.shrink <= 0.0 || self.shrink >= 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "shrink factor must lie in (0,1), got {}",
                self.shrink
            )));
        }
        if self.max_iter == 0 || self.steps == 0 {
            return Err(CoreError::InvalidArgument(
                "max_iter and steps must be >= 1".into(),
            ));
        }
        if self.h0.is_nan() || self.h0 <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "initial correction step must be positive, got {}",
                self.h0
            )));
        }
        Ok(())
    }
}

/// Outcome of a Log-map search.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// Initial momentum on the reference template.
    pub momentum: MomentumField,
    /// Number of correction iterations performed.
    pub iterations: usize,
    /// RMS landmark discrepancy of the accepted state.
    pub final_missfit: f64,
    pub converged: bool,
    /// Accepted miss-fit after each iteration; non-increasing.
    pub missfit_history: Vec<f64>,
}

impl ShootingResult {
    /// Squared Sobolev norm of the recovered tangent vector, `‖u₀₁‖²_L`.
    pub fn sobolev_norm_sq(&self, spec: &KernelSpec) -> Result<f64, CoreError> {
        crate::geodesic::sobolev_norm_sq(
            self.momentum.base().points(),
            self.momentum.momenta(),
            spec,
        )
    }
}

/// Computes `Log_reference(target)`: the initial momentum whose Exp map
/// reproduces the target, starting the search from the zero velocity field.
pub fn log_map(
    reference: &LandmarkTemplate,
    target: &LandmarkTemplate,
    spec: &KernelSpec,
    opts: &ShootingOptions,
) -> Result<ShootingResult, CoreError> {
    log_map_from(reference, target, None, spec, opts)
}

/// `log_map` with an explicit initial guess for the nodal velocity field.
/// Passing the converged field from a nearby problem (e.g. the previous outer
/// iteration of an averaging loop) cuts the iteration count substantially;
/// `None` starts from zero.
pub fn log_map_from(
    reference: &LandmarkTemplate,
    target: &LandmarkTemplate,
    initial_velocity: Option<&[Vec2]>,
    spec: &KernelSpec,
    opts: &ShootingOptions,
) -> Result<ShootingResult, CoreError> {
    opts.validate()?;
    let n = reference.len();
    if target.len() != n {
        return Err(CoreError::ShapeMismatch {
            context: "log_map",
            expected: n,
            got: target.len(),
        });
    }
    if let Some(u) = initial_velocity {
        if u.len() != n {
            return Err(CoreError::ShapeMismatch {
                context: "log_map initial velocity",
                expected: n,
                got: u.len(),
            });
        }
    }

    let solver = GramSolver::new(reference.points(), spec)?;
    let mut u: Vec<Vec2> = initial_velocity
        .map(|u| u.to_vec())
        .unwrap_or_else(|| vec![Vec2::zeros(); n]);

    // Evaluates one guess: momentum, endpoint residual and RMS miss-fit.
    let eval = |u: &[Vec2]| -> Result<(Vec<Vec2>, Vec<Vec2>, f64), CoreError> {
        let p = solver.to_momentum(u)?;
        let traj = evolve(reference.points(), &p, spec, opts.steps)?;
        let endpoint = &traj.endpoint().q;
        let residual: Vec<Vec2> = target
            .points()
            .iter()
            .zip(endpoint)
            .map(|(t, e)| t - e)
            .collect();
        let missfit =
            (residual.iter().map(|r| r.norm_squared()).sum::<f64>() / n as f64).sqrt();
        Ok((p, residual, missfit))
    };

    let (mut best_p, mut residual, mut best_missfit) = eval(&u)?;
    let mut history = Vec::new();
    let mut h = opts.h0;
    let mut iterations = 0;
    let mut converged = best_missfit <= opts.tol;

    while !converged && iterations < opts.max_iter {
        let trial_u: Vec<Vec2> = u
            .iter()
            .zip(&residual)
            .map(|(ui, ri)| ui + ri * h)
            .collect();
        let (trial_p, trial_res, trial_missfit) = eval(&trial_u)?;
        iterations += 1;

        if trial_missfit < best_missfit {
            u = trial_u;
            best_p = trial_p;
            residual = trial_res;
            best_missfit = trial_missfit;
            if best_missfit <= opts.tol {
                converged = true;
            }
        } else {
            // revert and shrink the correction step
            h *= opts.shrink;
            if h < H_FLOOR {
                history.push(best_missfit);
                break;
            }
        }
        history.push(best_missfit);
    }

    Ok(ShootingResult {
        momentum: MomentumField::new(best_p, reference.clone())?,
        iterations,
        final_missfit: best_missfit,
        converged,
        missfit_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::exp_map;
    use approx::assert_relative_eq;

    fn square() -> LandmarkTemplate {
        LandmarkTemplate::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn identity_target_gives_exact_zero_momentum() {
        let spec = KernelSpec::conic();
        let reference = square();
        let res = log_map(&reference, &reference, &spec, &ShootingOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.final_missfit, 0.0);
        assert!(res.missfit_history.is_empty());
        assert!(res.momentum.momenta().iter().all(|p| p.x == 0.0 && p.y == 0.0));
    }

    #[test]
    fn translated_square_round_trip() {
        let spec = KernelSpec::conic();
        let reference = square();
        let target = LandmarkTemplate::new(
            reference
                .points()
                .iter()
                .map(|p| p + Vec2::new(0.05, 0.0))
                .collect(),
        )
        .unwrap();
        let opts = ShootingOptions {
            tol: 1e-6,
            ..Default::default()
        };
        let res = log_map(&reference, &target, &spec, &opts).unwrap();
        assert!(res.converged, "missfit {}", res.final_missfit);
        let reproduced = exp_map(&reference, &res.momentum, &spec, opts.steps).unwrap();
        assert!(reproduced.rms_distance(&target).unwrap() <= 1e-6);
        let d = crate::geodesic::distance_estimate(res.sobolev_norm_sq(&spec).unwrap());
        assert!(d > 0.0);
        // history never increases
        for w in res.missfit_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn forward_and_backward_norms_agree_for_small_deformation() {
        let spec = KernelSpec::conic();
        let reference = square();
        let target = LandmarkTemplate::new(
            reference
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| p + Vec2::new(0.02 * (i as f64 + 1.0), -0.01))
                .collect(),
        )
        .unwrap();
        let opts = ShootingOptions {
            tol: 1e-9,
            ..Default::default()
        };
        let fwd = log_map(&reference, &target, &spec, &opts).unwrap();
        let bwd = log_map(&target, &reference, &spec, &opts).unwrap();
        let nf = fwd.sobolev_norm_sq(&spec).unwrap().sqrt();
        let nb = bwd.sobolev_norm_sq(&spec).unwrap().sqrt();
        assert_relative_eq!(nf, nb, max_relative = 1e-3);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let spec = KernelSpec::conic();
        let reference = square();
        let target = LandmarkTemplate::new(
            reference
                .points()
                .iter()
                .map(|p| p + Vec2::new(0.3, 0.1))
                .collect(),
        )
        .unwrap();
        let opts = ShootingOptions {
            max_iter: 2,
            tol: 1e-12,
            ..Default::default()
        };
        let res = log_map(&reference, &target, &spec, &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert_eq!(res.missfit_history.len(), 2);
    }
}
