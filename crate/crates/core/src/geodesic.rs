//! Landmark particle dynamics: forward geodesic integration (the Exp map),
//! velocity/momentum conversion, and energy quantities.
//!
//! A configuration of `N` landmarks carries positions `qᵢ` and momenta `pᵢ`
//! evolving under
//!
//! ```text
//! dqᵢ/dt =  Σⱼ G(|qᵢ−qⱼ|) pⱼ
//! dpᵢ/dt = −Σ_{j≠i} (pᵢ·pⱼ) G'(|qᵢ−qⱼ|) (qᵢ−qⱼ)/|qᵢ−qⱼ|
//! ```
//!
//! integrated on `t ∈ [0, 1]` with classical RK4. The Hamiltonian
//! `H = ½ Σᵢⱼ (pᵢ·pⱼ) G(|qᵢ−qⱼ|)` is conserved along exact trajectories and
//! is recorded at every grid time as an integration diagnostic.

use crate::error::CoreError;
use crate::kernel::{gram_matrix, KernelSpec};
use crate::Vec2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Absolute floor used when normalizing Hamiltonian drift for systems with
/// `H(0) ≈ 0`.
pub const HAMILTONIAN_FLOOR: f64 = 1e-12;

/// An ordered set of labeled 2-D landmarks; index is the correspondence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTemplate {
    points: Vec<Vec2>,
    label: Option<String>,
}

impl LandmarkTemplate {
    pub fn new(points: Vec<Vec2>) -> Result<Self, CoreError> {
        if points.is_empty() {
            return Err(CoreError::InvalidArgument(
                "a template needs at least one landmark".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "non-finite landmark coordinate ({}, {})",
                p.x, p.y
            )));
        }
        Ok(LandmarkTemplate {
            points,
            label: None,
        })
    }

    pub fn with_label(points: Vec<Vec2>, label: impl Into<String>) -> Result<Self, CoreError> {
        let mut t = Self::new(points)?;
        t.label = Some(label.into());
        Ok(t)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = Some(label.into());
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest pairwise landmark distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                d = d.max((self.points[i] - self.points[j]).norm());
            }
        }
        d
    }

    /// Root-mean-square landmark discrepancy against a corresponding template.
    pub fn rms_distance(&self, other: &LandmarkTemplate) -> Result<f64, CoreError> {
        if self.len() != other.len() {
            return Err(CoreError::ShapeMismatch {
                context: "rms_distance",
                expected: self.len(),
                got: other.len(),
            });
        }
        let sum: f64 = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        Ok((sum / self.len() as f64).sqrt())
    }
}

/// Momentum covectors attached to the landmarks of a base template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumField {
    momenta: Vec<Vec2>,
    base: LandmarkTemplate,
}

impl MomentumField {
    pub fn new(momenta: Vec<Vec2>, base: LandmarkTemplate) -> Result<Self, CoreError> {
        if momenta.len() != base.len() {
            return Err(CoreError::ShapeMismatch {
                context: "momentum field",
                expected: base.len(),
                got: momenta.len(),
            });
        }
        if momenta.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "non-finite momentum component".into(),
            ));
        }
        Ok(MomentumField { momenta, base })
    }

    pub fn zero(base: LandmarkTemplate) -> Self {
        MomentumField {
            momenta: vec![Vec2::zeros(); base.len()],
            base,
        }
    }

    pub fn momenta(&self) -> &[Vec2] {
        &self.momenta
    }

    pub fn base(&self) -> &LandmarkTemplate {
        &self.base
    }

    /// Euclidean norm of the stacked momentum vector.
    pub fn stacked_norm(&self) -> f64 {
        self.momenta
            .iter()
            .map(|p| p.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Phase-space sample of the particle system at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<Vec2>,
    pub p: Vec<Vec2>,
}

/// Time-discretized geodesic with per-time Hamiltonian samples.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    times: Vec<f64>,
    states: Vec<PhaseState>,
    hamiltonians: Vec<f64>,
}

impl GeodesicTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PhaseState] {
        &self.states
    }

    pub fn hamiltonians(&self) -> &[f64] {
        &self.hamiltonians
    }

    pub fn initial(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn endpoint(&self) -> &PhaseState {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Maximum relative Hamiltonian drift over the trajectory,
    /// `max_t |H(t) − H(0)| / max(|H(0)|, floor)`.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonians[0];
        let denom = h0.abs().max(HAMILTONIAN_FLOOR);
        self.hamiltonians
            .iter()
            .map(|h| (h - h0).abs() / denom)
            .fold(0.0, f64::max)
    }
}

/// Pairwise force accumulation for `dq/dt` and `dp/dt`.
///
/// Interactions at radii `≤ r_cutoff` are dropped: the conic kernel is
/// non-smooth at the origin and the direction `(qᵢ−qⱼ)/r` is undefined, and
/// dropping the pair keeps the force antisymmetric.
fn derivative(
    q: &[Vec2],
    p: &[Vec2],
    spec: &KernelSpec,
    dq: &mut [Vec2],
    dp: &mut [Vec2],
) -> Result<(), CoreError> {
    let n = q.len();
    let g0 = spec.value(0.0)?;
    for i in 0..n {
        dq[i] = p[i] * g0;
        dp[i] = Vec2::zeros();
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = q[i] - q[j];
            let r = diff.norm();
            if r <= spec.r_cutoff() {
                continue;
            }
            let g = spec.value(r)?;
            dq[i] += p[j] * g;
            dq[j] += p[i] * g;
            let gp = spec.derivative(r)?;
            let force = diff * ((p[i].dot(&p[j])) * gp / r);
            dp[i] -= force;
            dp[j] += force;
        }
    }
    Ok(())
}

/// Integrates the particle system from `t = 0` to `t = 1` with classical RK4
/// on a uniform grid of `steps` intervals, recording `H` at every grid time.
pub fn evolve(
    q0: &[Vec2],
    p0: &[Vec2],
    spec: &KernelSpec,
    steps: usize,
) -> Result<GeodesicTrajectory, CoreError> {
    if steps == 0 {
        return Err(CoreError::InvalidArgument("steps must be >= 1".into()));
    }
    if q0.len() != p0.len() {
        return Err(CoreError::ShapeMismatch {
            context: "evolve",
            expected: q0.len(),
            got: p0.len(),
        });
    }
    let n = q0.len();
    let h = 1.0 / steps as f64;

    let mut q = q0.to_vec();
    let mut p = p0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut hams = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(PhaseState {
        q: q.clone(),
        p: p.clone(),
    });
    hams.push(hamiltonian(&q, &p, spec)?);

    let mut k1 = (vec![Vec2::zeros(); n], vec![Vec2::zeros(); n]);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut qt = vec![Vec2::zeros(); n];
    let mut pt = vec![Vec2::zeros(); n];

    let finite = |q: &[Vec2], p: &[Vec2]| {
        q.iter()
            .chain(p.iter())
            .all(|v| v.x.is_finite() && v.y.is_finite())
    };

    for step in 0..steps {
        let t = (step + 1) as f64 * h;
        derivative(&q, &p, spec, &mut k1.0, &mut k1.1)?;

        for i in 0..n {
            qt[i] = q[i] + k1.0[i] * (0.5 * h);
            pt[i] = p[i] + k1.1[i] * (0.5 * h);
        }
        if !finite(&qt, &pt) {
            return Err(CoreError::Divergence { time: t });
        }
        derivative(&qt, &pt, spec, &mut k2.0, &mut k2.1)?;

        for i in 0..n {
            qt[i] = q[i] + k2.0[i] * (0.5 * h);
            pt[i] = p[i] + k2.1[i] * (0.5 * h);
        }
        if !finite(&qt, &pt) {
            return Err(CoreError::Divergence { time: t });
        }
        derivative(&qt, &pt, spec, &mut k3.0, &mut k3.1)?;

        for i in 0..n {
            qt[i] = q[i] + k3.0[i] * h;
            pt[i] = p[i] + k3.1[i] * h;
        }
        if !finite(&qt, &pt) {
            return Err(CoreError::Divergence { time: t });
        }
        derivative(&qt, &pt, spec, &mut k4.0, &mut k4.1)?;

        for i in 0..n {
            q[i] += (k1.0[i] + (k2.0[i] + k3.0[i]) * 2.0 + k4.0[i]) * (h / 6.0);
            p[i] += (k1.1[i] + (k2.1[i] + k3.1[i]) * 2.0 + k4.1[i]) * (h / 6.0);
        }
        if !finite(&q, &p) {
            return Err(CoreError::Divergence { time: t });
        }
        times.push(t);
        states.push(PhaseState {
            q: q.clone(),
            p: p.clone(),
        });
        hams.push(hamiltonian(&q, &p, spec)?);
    }

    Ok(GeodesicTrajectory {
        times,
        states,
        hamiltonians: hams,
    })
}

/// The Exp map: carries a template along the geodesic generated by an
/// initial momentum field and returns the deformed template at `t = 1`.
pub fn exp_map(
    base: &LandmarkTemplate,
    momentum: &MomentumField,
    spec: &KernelSpec,
    steps: usize,
) -> Result<LandmarkTemplate, CoreError> {
    if momentum.base().points() != base.points() {
        return Err(CoreError::InvalidArgument(
            "momentum field is not based at the given template".into(),
        ));
    }
    let traj = evolve(base.points(), momentum.momenta(), spec, steps)?;
    let mut out = LandmarkTemplate::new(traj.endpoint().q.clone())?;
    if let Some(label) = base.label() {
        out.set_label(label);
    }
    Ok(out)
}

/// Velocity field `u(x) = Σⱼ G(|x−qⱼ|) pⱼ` induced by a particle state.
pub fn velocity_field(
    q: &[Vec2],
    p: &[Vec2],
    x: Vec2,
    spec: &KernelSpec,
) -> Result<Vec2, CoreError> {
    let mut u = Vec2::zeros();
    for (qj, pj) in q.iter().zip(p) {
        u += pj * spec.value((x - qj).norm())?;
    }
    Ok(u)
}

/// Nodal velocities `uᵢ = Σⱼ Gᵢⱼ pⱼ`.
pub fn momentum_to_velocity(
    q: &[Vec2],
    p: &[Vec2],
    spec: &KernelSpec,
) -> Result<Vec<Vec2>, CoreError> {
    if q.len() != p.len() {
        return Err(CoreError::ShapeMismatch {
            context: "momentum_to_velocity",
            expected: q.len(),
            got: p.len(),
        });
    }
    (0..q.len())
        .map(|i| velocity_field(q, p, q[i], spec))
        .collect()
}

/// Solves `G p = u` for the momenta given nodal velocities.
pub fn velocity_to_momentum(
    q: &[Vec2],
    u: &[Vec2],
    spec: &KernelSpec,
) -> Result<Vec<Vec2>, CoreError> {
    GramSolver::new(q, spec)?.to_momentum(u)
}

/// Hamiltonian `H = ½ Σᵢⱼ (pᵢ·pⱼ) G(|qᵢ−qⱼ|)`, including the `i = j` terms.
pub fn hamiltonian(q: &[Vec2], p: &[Vec2], spec: &KernelSpec) -> Result<f64, CoreError> {
    Ok(0.5 * sobolev_norm_sq(q, p, spec)?)
}

/// Squared Sobolev norm of the velocity field induced by `(q, p)`:
/// `‖u‖²_L = Σᵢⱼ (pᵢ·pⱼ) Gᵢⱼ = 2H`.
pub fn sobolev_norm_sq(q: &[Vec2], p: &[Vec2], spec: &KernelSpec) -> Result<f64, CoreError> {
    if q.len() != p.len() {
        return Err(CoreError::ShapeMismatch {
            context: "sobolev_norm_sq",
            expected: q.len(),
            got: p.len(),
        });
    }
    let g0 = spec.value(0.0)?;
    let mut total = 0.0;
    for i in 0..q.len() {
        total += p[i].norm_squared() * g0;
        for j in (i + 1)..q.len() {
            total += 2.0 * p[i].dot(&p[j]) * spec.value((q[i] - q[j]).norm())?;
        }
    }
    Ok(total)
}

/// First-order geodesic distance estimate from a squared tangent norm:
/// `d(I₀, I₁) ≈ ‖u₀₁‖_L`.
pub fn distance_estimate(sobolev_norm_sq: f64) -> f64 {
    sobolev_norm_sq.max(0.0).sqrt()
}

/// Cholesky factorization of a kernel Gram matrix, with progressive diagonal
/// jitter `10⁻¹²·G(0)·2^k`, `k ≤ 8`, for near-degenerate configurations.
///
/// Shared by every momentum conversion at a fixed base configuration.
pub struct GramSolver {
    gram: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GramSolver {
    pub fn new(points: &[Vec2], spec: &KernelSpec) -> Result<Self, CoreError> {
        // Exactly coincident landmarks make the system singular no matter the
        // jitter; report them instead of solving nonsense.
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d = (points[i] - points[j]).norm();
                if d <= spec.r_cutoff() {
                    return Err(CoreError::CoincidentLandmarks { i, j, distance: d });
                }
            }
        }
        let gram = gram_matrix(points, spec)?;
        let g0 = spec.value(0.0)?;
        if let Some(chol) = gram.clone().cholesky() {
            return Ok(GramSolver { gram, chol });
        }
        for k in 0..=8u32 {
            let jitter = 1e-12 * g0 * f64::powi(2.0, k as i32);
            let mut jittered = gram.clone();
            for i in 0..points.len() {
                jittered[(i, i)] += jitter;
            }
            if let Some(chol) = jittered.cholesky() {
                return Ok(GramSolver { gram, chol });
            }
        }
        let eigen = gram.symmetric_eigenvalues();
        let max = eigen.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.iter().cloned().fold(f64::MAX, f64::min);
        Err(CoreError::GramConditioning {
            condition: max / min.abs().max(f64::MIN_POSITIVE),
        })
    }

    /// Solves `G p = u` column-blockwise for both coordinates.
    pub fn to_momentum(&self, u: &[Vec2]) -> Result<Vec<Vec2>, CoreError> {
        if u.len() != self.gram.nrows() {
            return Err(CoreError::ShapeMismatch {
                context: "velocity_to_momentum",
                expected: self.gram.nrows(),
                got: u.len(),
            });
        }
        let rhs_x = DVector::from_iterator(u.len(), u.iter().map(|v| v.x));
        let rhs_y = DVector::from_iterator(u.len(), u.iter().map(|v| v.y));
        let px = self.chol.solve(&rhs_x);
        let py = self.chol.solve(&rhs_y);
        Ok((0..u.len()).map(|i| Vec2::new(px[i], py[i])).collect())
    }

    /// Applies the Gram matrix: `uᵢ = Σⱼ Gᵢⱼ pⱼ`.
    pub fn to_velocity(&self, p: &[Vec2]) -> Result<Vec<Vec2>, CoreError> {
        if p.len() != self.gram.nrows() {
            return Err(CoreError::ShapeMismatch {
                context: "momentum_to_velocity",
                expected: self.gram.nrows(),
                got: p.len(),
            });
        }
        let mut out = vec![Vec2::zeros(); p.len()];
        for (i, u) in out.iter_mut().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                *u += pj * self.gram[(i, j)];
            }
        }
        Ok(out)
    }
}
