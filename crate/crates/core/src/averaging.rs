//! Weighted group averaging on the momentum field.
//!
//! Starting from a guess that is not itself a group member, each outer
//! iteration Log-maps the current average to every member, converts the
//! tangent vectors to momenta, forms their weighted mean, and Exp-maps the
//! average forward along it. At convergence the final per-member momenta are
//! the *residual momentum* representation of the group — the feature vectors
//! consumed by the detection statistics.
//!
//! Two weight choices are supported: equal weights (minimizing the sum of
//! squared geodesic distances, a Karcher/Fréchet mean) and inverse-distance
//! weights (minimizing the sum of distances, a geometric median in the spirit
//! of Weiszfeld's algorithm, robust to outlying members).

use crate::error::CoreError;
use crate::geodesic::{
    distance_estimate, evolve, momentum_to_velocity, sobolev_norm_sq, LandmarkTemplate,
    MomentumField,
};
use crate::kernel::KernelSpec;
use crate::shooting::{log_map_from, ShootingOptions};
use crate::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative slack allowed before an objective increase counts as an ascent.
const DESCENT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `ωᵢ = 1/m`: every member contributes equally.
    Equal,
    /// `ωᵢ ∝ 1/dᵢ`: members far from the current average are down-weighted.
    Robust,
}

/// Weighting rule for the momentum average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: WeightKind,
    /// Floor applied to distances in the robust rule, guarding members that
    /// coincide with the current average.
    pub epsilon_d: f64,
}

impl WeightScheme {
    pub fn equal() -> Self {
        WeightScheme {
            kind: WeightKind::Equal,
            epsilon_d: 1e-9,
        }
    }

    pub fn robust() -> Self {
        WeightScheme {
            kind: WeightKind::Robust,
            epsilon_d: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.epsilon_d.is_nan() || self.epsilon_d <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "epsilon_d must be positive, got {}",
                self.epsilon_d
            )));
        }
        Ok(())
    }
}

/// Normalized member weights for a set of tangent norms.
pub fn compute_weights(scheme: &WeightScheme, norms: &[f64]) -> Result<Vec<f64>, CoreError> {
    scheme.validate()?;
    if norms.is_empty() {
        return Err(CoreError::InvalidArgument(
            "weights need at least one member".into(),
        ));
    }
    if norms.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(CoreError::InvalidArgument(
            "tangent norms must be nonnegative".into(),
        ));
    }
    let m = norms.len();
    match scheme.kind {
        WeightKind::Equal => Ok(vec![1.0 / m as f64; m]),
        WeightKind::Robust => {
            let inv: Vec<f64> = norms
                .iter()
                .map(|d| 1.0 / d.max(scheme.epsilon_d))
                .collect();
            let total: f64 = inv.iter().sum();
            Ok(inv.into_iter().map(|w| w / total).collect())
        }
    }
}

/// Controls for the outer averaging loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageOptions {
    /// Stopping threshold on the stacked momentum average; `None` selects
    /// `10⁻⁶·√N`.
    pub epsilon: Option<f64>,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Options for the inner Log-map solves.
    pub shooting: ShootingOptions,
}

impl Default for AverageOptions {
    fn default() -> Self {
        // The inner solves must sit well below the outer stopping threshold:
        // a landmark miss-fit of `tol` turns into momentum noise of roughly
        // `‖G⁻¹‖·tol`, and the stationarity check on the weighted momentum
        // sum has to be able to see through it.
        AverageOptions {
            epsilon: None,
            max_outer: 100,
            shooting: ShootingOptions {
                tol: 1e-10,
                ..Default::default()
            },
        }
    }
}

/// Converged average and the residual momentum coordinates of every member.
#[derive(Debug, Clone)]
pub struct AverageResult {
    pub average: LandmarkTemplate,
    /// Per-member initial momenta from the average to each member, based at
    /// `average`.
    pub residual_momenta: Vec<MomentumField>,
    /// Weights in effect at the final iteration.
    pub final_weights: Vec<f64>,
    /// Objective value (Σd² for equal weights, Σd for robust) per accepted
    /// outer iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct MemberFit {
    momentum: Vec<Vec2>,
    velocity: Vec<Vec2>,
    norm: f64,
}

/// Log-maps `average → member` for every member, with optional warm starts.
fn fit_members(
    average: &LandmarkTemplate,
    group: &[LandmarkTemplate],
    warm: Option<&[Vec<Vec2>]>,
    spec: &KernelSpec,
    opts: &ShootingOptions,
) -> Result<Vec<MemberFit>, CoreError> {
    group
        .par_iter()
        .enumerate()
        .map(|(i, member)| {
            let initial = warm.map(|w| w[i].as_slice());
            let shot = log_map_from(average, member, initial, spec, opts)?;
            if !shot.converged {
                return Err(CoreError::AveragingMember {
                    member: i,
                    missfit: shot.final_missfit,
                    tol: opts.tol,
                });
            }
            let momentum = shot.momentum.momenta().to_vec();
            let velocity = momentum_to_velocity(average.points(), &momentum, spec)?;
            let norm =
                distance_estimate(sobolev_norm_sq(average.points(), &momentum, spec)?);
            Ok(MemberFit {
                momentum,
                velocity,
                norm,
            })
        })
        .collect()
}

fn objective_value(kind: WeightKind, norms: &[f64]) -> f64 {
    match kind {
        WeightKind::Equal => norms.iter().map(|d| d * d).sum(),
        WeightKind::Robust => norms.iter().sum(),
    }
}

/// Matching objective of a candidate average against a group:
/// sum of squared geodesic distance estimates under equal weights, sum of
/// distance estimates under robust weights.
pub fn objective(
    group: &[LandmarkTemplate],
    candidate: &LandmarkTemplate,
    scheme: &WeightScheme,
    spec: &KernelSpec,
    opts: &ShootingOptions,
) -> Result<f64, CoreError> {
    let fits = fit_members(candidate, group, None, spec, opts)?;
    let norms: Vec<f64> = fits.iter().map(|f| f.norm).collect();
    Ok(objective_value(scheme.kind, &norms))
}

/// Coordinate-wise Euclidean mean of the group, displaced deterministically
/// if it coincides with a member (the iteration is undefined when started on
/// a member).
fn initial_guess(group: &[LandmarkTemplate]) -> LandmarkTemplate {
    let n = group[0].len();
    let m = group.len() as f64;
    let mut mean = vec![Vec2::zeros(); n];
    for member in group {
        for (acc, p) in mean.iter_mut().zip(member.points()) {
            *acc += p / m;
        }
    }
    let diameter = LandmarkTemplate::new(mean.clone())
        .map(|t| t.diameter())
        .unwrap_or(0.0)
        .max(1e-3);
    let coincidence_tol = 1e-9 * diameter;
    let mut shift = 1e-3 * diameter;
    loop {
        let candidate = LandmarkTemplate::new(mean.clone()).expect("mean of valid templates");
        let coincides = group.iter().any(|member| {
            candidate
                .rms_distance(member)
                .map(|d| d <= coincidence_tol)
                .unwrap_or(false)
        });
        if !coincides {
            return candidate;
        }
        let offset = Vec2::new(shift, shift) / std::f64::consts::SQRT_2;
        for p in &mut mean {
            *p += offset;
        }
        shift *= 2.0;
    }
}

/// Iteratively averages a group on the momentum field.
pub fn group_average(
    group: &[LandmarkTemplate],
    scheme: &WeightScheme,
    spec: &KernelSpec,
    opts: &AverageOptions,
) -> Result<AverageResult, CoreError> {
    scheme.validate()?;
    if group.is_empty() {
        return Err(CoreError::InvalidArgument(
            "group averaging needs at least one member".into(),
        ));
    }
    let n = group[0].len();
    for (i, member) in group.iter().enumerate() {
        if member.len() != n {
            return Err(CoreError::ShapeMismatch {
                context: "group_average member",
                expected: n,
                got: group[i].len(),
            });
        }
    }
    if opts.max_outer == 0 {
        return Err(CoreError::InvalidArgument("max_outer must be >= 1".into()));
    }
    let epsilon = opts
        .epsilon
        .unwrap_or_else(|| 1e-6 * (n as f64).sqrt());

    let mut average = initial_guess(group);
    let mut warm: Option<Vec<Vec<Vec2>>> = None;
    let mut prev_pbar = vec![Vec2::zeros(); n];
    let mut history: Vec<f64> = Vec::new();

    // Last accepted state, for reverting if the objective ever ascends.
    let mut accepted: Option<(LandmarkTemplate, Vec<MemberFit>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        let fits = fit_members(&average, group, warm.as_deref(), spec, &opts.shooting)?;
        let norms: Vec<f64> = fits.iter().map(|f| f.norm).collect();
        let weights = compute_weights(scheme, &norms)?;
        let obj = objective_value(scheme.kind, &norms);

        if let Some(prev_obj) = history.last() {
            if obj > prev_obj * (1.0 + DESCENT_SLACK) + f64::EPSILON {
                // Ascent beyond solver noise: keep the previous state and
                // stop rather than leave the descent region.
                converged = false;
                break;
            }
        }
        iterations += 1;
        history.push(obj);

        let mut pbar = vec![Vec2::zeros(); n];
        for (fit, w) in fits.iter().zip(&weights) {
            for (acc, p) in pbar.iter_mut().zip(&fit.momentum) {
                *acc += p * *w;
            }
        }
        let change = pbar
            .iter()
            .zip(&prev_pbar)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let pbar_norm = pbar.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();

        let velocities: Vec<Vec<Vec2>> = fits.iter().map(|f| f.velocity.clone()).collect();
        accepted = Some((average.clone(), fits, weights));

        if change <= epsilon && pbar_norm <= epsilon {
            converged = true;
            break;
        }

        // Ī ← Exp_Ī(ū) with ū = Convert(p̄); the particle system takes the
        // momentum directly.
        let traj = evolve(average.points(), &pbar, spec, opts.shooting.steps)?;
        average = LandmarkTemplate::new(traj.endpoint().q.clone())?;
        warm = Some(velocities);
        prev_pbar = pbar;
    }

    let (average, fits, weights) = accepted.ok_or_else(|| {
        CoreError::InvalidArgument("averaging made no accepted iteration".into())
    })?;
    let residual_momenta = fits
        .iter()
        .map(|f| MomentumField::new(f.momentum.clone(), average.clone()))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(AverageResult {
        average,
        residual_momenta,
        final_weights: weights,
        objective_history: history,
        iterations,
        converged,
    })
}
