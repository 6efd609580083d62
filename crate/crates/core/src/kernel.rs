//! Green's kernels of the operator `L = (I − a²Δ)^b` in the plane, their
//! radial derivatives, and Gram matrices over landmark configurations.
//!
//! The general kernel is
//!
//! ```text
//! G(r) = 2^{n/2−b} / ((2πa)^{n/2} a^b Γ(b)) · r^{b−n/2} K_{b−n/2}(r/a),   n = 2,
//! ```
//!
//! with `K` the modified Bessel function of the second kind. The special case
//! `b = 3/2` collapses to the conic kernel `G(r) = e^{−r/a} / (2πa²)`, which is
//! evaluated in closed form and is the default for all matching work.

use crate::bessel;
use crate::error::CoreError;
use crate::Vec2;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest admissible `r_cutoff` as a fraction of the length scale `a`.
const MAX_CUTOFF_FRACTION: f64 = 1e-3;

/// Parameters of the Green's kernel of `(I − a²Δ)^b` in 2-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    a: f64,
    b: f64,
    n: u8,
    r_cutoff: f64,
}

impl KernelSpec {
    /// Builds a kernel with length scale `a` and smoothness order `b`,
    /// with the default degenerate-radius cutoff `10⁻⁹·a`.
    pub fn new(a: f64, b: f64) -> Result<Self, CoreError> {
        Self::with_cutoff(a, b, 1e-9 * a)
    }

    /// Builds a kernel with an explicit degenerate-radius cutoff.
    pub fn with_cutoff(a: f64, b: f64, r_cutoff: f64) -> Result<Self, CoreError> {
        let spec = KernelSpec {
            a,
            b,
            n: 2,
            r_cutoff,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The conic kernel `e^{−r} / 2π`: `a = 1`, `b = 3/2`.
    pub fn conic() -> Self {
        Self::new(1.0, 1.5).expect("conic parameters are valid")
    }

    /// Conic kernel at length scale `a`: `G(r) = e^{−r/a} / (2πa²)`.
    pub fn conic_scaled(a: f64) -> Result<Self, CoreError> {
        Self::new(a, 1.5)
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.a.is_nan() || self.a <= 0.0 || !self.a.is_finite() {
            return Err(CoreError::KernelParameter(format!(
                "length scale a must be positive and finite, got {}",
                self.a
            )));
        }
        if self.b.is_nan() || self.b < 1.0 || !self.b.is_finite() {
            return Err(CoreError::KernelParameter(format!(
                "smoothness order b must be >= 1, got {}",
                self.b
            )));
        }
        if self.n != 2 {
            return Err(CoreError::KernelParameter(format!(
                "spatial dimension must be 2, got {}",
                self.n
            )));
        }
        if self.r_cutoff.is_nan() || self.r_cutoff < 0.0 || self.r_cutoff >= self.a * MAX_CUTOFF_FRACTION {
            return Err(CoreError::KernelParameter(format!(
                "r_cutoff must satisfy 0 <= r_cutoff < {:.3e}, got {:.3e}",
                self.a * MAX_CUTOFF_FRACTION,
                self.r_cutoff
            )));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Radius below which a pairwise interaction direction is degenerate.
    pub fn r_cutoff(&self) -> f64 {
        self.r_cutoff
    }

    fn is_conic(&self) -> bool {
        self.b == 1.5
    }

    /// Bessel order `ν = b − n/2 = b − 1`.
    fn order(&self) -> f64 {
        self.b - 1.0
    }

    /// Normalization `2^{1−b} / (2π a^{b+1} Γ(b))`.
    fn coefficient(&self) -> f64 {
        let b = self.b;
        (1.0 - b).exp2() / (2.0 * std::f64::consts::PI * self.a.powf(b + 1.0) * bessel::gamma(b))
    }

    /// Kernel value `G(r)` at radius `r ≥ 0`.
    pub fn value(&self, r: f64) -> Result<f64, CoreError> {
        if r.is_nan() || r < 0.0 {
            return Err(CoreError::KernelParameter(format!(
                "radius must be nonnegative, got {r}"
            )));
        }
        if self.is_conic() {
            return Ok((-r / self.a).exp() / (2.0 * std::f64::consts::PI * self.a * self.a));
        }
        let x = r / self.a;
        if x <= 1e-8 {
            return Ok(self.value_at_zero());
        }
        let nu = self.order();
        match bessel::bessel_k(nu, x) {
            Some(k) => Ok(self.coefficient() * (r.powf(nu)) * k),
            None => Err(CoreError::KernelEvaluation { r, a: self.a }),
        }
    }

    /// Analytic limit of `G(r)` as `r → 0`: `1 / (4πa²(b−1))` for `b > 1`,
    /// divergent (`+∞`) at `b = 1`.
    fn value_at_zero(&self) -> f64 {
        if self.b > 1.0 {
            1.0 / (4.0 * std::f64::consts::PI * self.a * self.a * (self.b - 1.0))
        } else {
            f64::INFINITY
        }
    }

    /// Radial derivative `dG/dr` at `r > r_cutoff`.
    ///
    /// Uses `d/dx [x^ν K_ν(x)] = −x^ν K_{ν−1}(x)`, so
    /// `G'(r) = −(C/a) r^ν K_{ν−1}(r/a)` with `K_{−μ} = K_μ`.
    pub fn derivative(&self, r: f64) -> Result<f64, CoreError> {
        if r <= self.r_cutoff {
            return Err(CoreError::DegenerateRadius {
                r,
                r_cutoff: self.r_cutoff,
            });
        }
        if self.is_conic() {
            let a = self.a;
            return Ok(-(-r / a).exp() / (2.0 * std::f64::consts::PI * a * a * a));
        }
        let nu = self.order();
        let x = r / self.a;
        match bessel::bessel_k((nu - 1.0).abs(), x) {
            Some(k) => Ok(-self.coefficient() / self.a * r.powf(nu) * k),
            None => Err(CoreError::KernelEvaluation { r, a: self.a }),
        }
    }
}

/// Kernel Gram matrix `Gᵢⱼ = G(|qᵢ − qⱼ|)` over a landmark configuration.
///
/// Exactly symmetric by construction; positive definite whenever the points
/// are pairwise distinct.
pub fn gram_matrix(points: &[Vec2], spec: &KernelSpec) -> Result<DMatrix<f64>, CoreError> {
    let n = points.len();
    if n == 0 {
        return Err(CoreError::KernelParameter(
            "gram matrix requires at least one point".into(),
        ));
    }
    let mut gram = DMatrix::zeros(n, n);
    let diag = spec.value(0.0)?;
    for i in 0..n {
        gram[(i, i)] = diag;
        for j in (i + 1)..n {
            let g = spec.value((points[i] - points[j]).norm())?;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    Ok(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = std::f64::consts::TAU;

    #[test]
    fn conic_closed_form_values() {
        let spec = KernelSpec::conic();
        assert_relative_eq!(spec.value(0.0).unwrap(), 1.0 / TWO_PI, max_relative = 1e-15);
        assert_relative_eq!(
            spec.value(1.0).unwrap(),
            (-1.0f64).exp() / TWO_PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            spec.derivative(1.0).unwrap(),
            -(-1.0f64).exp() / TWO_PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            spec.derivative(0.5).unwrap(),
            -(-0.5f64).exp() / TWO_PI,
            max_relative = 1e-15
        );
    }

    #[test]
    fn scaled_conic_closed_form() {
        // G(r) = e^{−r/a} / (2πa²) = e^{−r/2} / 8π at a = 2
        let spec = KernelSpec::conic_scaled(2.0).unwrap();
        assert_relative_eq!(spec.value(0.0).unwrap(), 0.25 / TWO_PI, max_relative = 1e-15);
        assert_relative_eq!(
            spec.value(1.0).unwrap(),
            (-0.5f64).exp() * 0.25 / TWO_PI,
            max_relative = 1e-15
        );
    }

    #[test]
    fn bessel_value_at_unit_radius() {
        // b = 2: G(r) = r K₁(r/a) / (4π a³); tabulated K₁(1) = 0.6019072…
        let spec = KernelSpec::new(1.0, 2.0).unwrap();
        let k1 = 0.601_907_230_197_235;
        assert_relative_eq!(
            spec.value(1.0).unwrap(),
            k1 / (4.0 * std::f64::consts::PI),
            max_relative = 1e-10
        );
    }

    #[test]
    fn bessel_route_agrees_with_conic_closed_form() {
        // b = 3/2 short-circuits to the closed form; the general Bessel
        // route must produce the same kernel
        for &a in &[0.5, 1.0, 2.0] {
            let spec = KernelSpec::new(a, 1.5).unwrap();
            let nu = spec.order();
            for &r in &[0.05f64, 0.3, 1.0, 4.0] {
                let bessel_route = spec.coefficient()
                    * r.powf(nu)
                    * crate::bessel::bessel_k(nu, r / a).unwrap();
                assert_relative_eq!(
                    spec.value(r).unwrap(),
                    bessel_route,
                    max_relative = 1e-12
                );
            }
            // continuity in b across the special case
            let near = KernelSpec::new(a, 1.5 + 1e-9).unwrap();
            assert_relative_eq!(
                near.value(1.0).unwrap(),
                spec.value(1.0).unwrap(),
                max_relative = 1e-7
            );
        }
    }

    #[test]
    fn bessel_limit_at_zero_radius() {
        // G(0) = 1 / (4πa²(b−1))
        for &(a, b) in &[(1.0, 2.0), (0.7, 2.5), (2.0, 1.5)] {
            let spec = KernelSpec::new(a, b).unwrap();
            assert_relative_eq!(
                spec.value(0.0).unwrap(),
                1.0 / (4.0 * std::f64::consts::PI * a * a * (b - 1.0)),
                max_relative = 1e-12
            );
        }
        // approach from above must agree with the limit
        let spec = KernelSpec::new(1.0, 2.0).unwrap();
        let lim = spec.value(0.0).unwrap();
        assert_relative_eq!(spec.value(1e-7).unwrap(), lim, max_relative = 1e-5);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // both families, r in [0.01, 10]·a, relative 1e-6
        let h = 1e-5;
        for &(a, b) in &[(1.0, 1.5), (1.0, 2.0), (0.5, 2.5), (2.0, 3.0)] {
            let spec = KernelSpec::new(a, b).unwrap();
            for k in 0..40 {
                let r = a * (0.01 + (10.0 - 0.01) * k as f64 / 39.0);
                let fd =
                    (spec.value(r + h).unwrap() - spec.value(r - h).unwrap()) / (2.0 * h);
                let d = spec.derivative(r).unwrap();
                assert_relative_eq!(d, fd, max_relative = 1e-6, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn derivative_signals_degenerate_radius() {
        let spec = KernelSpec::conic();
        assert!(matches!(
            spec.derivative(0.0),
            Err(CoreError::DegenerateRadius { .. })
        ));
        assert!(matches!(
            spec.derivative(1e-10),
            Err(CoreError::DegenerateRadius { .. })
        ));
        assert!(spec.derivative(1e-8).is_ok());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(KernelSpec::new(0.0, 1.5).is_err());
        assert!(KernelSpec::new(-1.0, 1.5).is_err());
        assert!(KernelSpec::new(1.0, 0.5).is_err());
        assert!(KernelSpec::with_cutoff(1.0, 1.5, 1e-2).is_err());
        assert!(KernelSpec::with_cutoff(1.0, 1.5, -1.0).is_err());
    }

    #[test]
    fn gram_matrix_basics() {
        let spec = KernelSpec::conic();
        let one = gram_matrix(&[Vec2::new(0.5, -0.25)], &spec).unwrap();
        assert_eq!(one.nrows(), 1);
        assert_relative_eq!(one[(0, 0)], 1.0 / TWO_PI, max_relative = 1e-15);

        // coincident pair: rank-1, all entries G(0)
        let pair = gram_matrix(&[Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)], &spec).unwrap();
        for v in pair.iter() {
            assert_relative_eq!(*v, 1.0 / TWO_PI, max_relative = 1e-15);
        }

        let two = gram_matrix(&[Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0)], &spec).unwrap();
        assert_relative_eq!(two[(0, 1)], (-2.0f64).exp() / TWO_PI, max_relative = 1e-15);
        assert_relative_eq!(two[(0, 0)], 0.159_154_943_091_895_3, max_relative = 1e-12);
    }

    #[test]
    fn gram_matrix_symmetric_and_positive_definite() {
        let spec = KernelSpec::conic();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(1..=20);
            let mut pts = Vec::with_capacity(n);
            while pts.len() < n {
                let cand = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                if pts.iter().all(|p: &Vec2| (p - cand).norm() > 1e-6) {
                    pts.push(cand);
                }
            }
            let g = gram_matrix(&pts, &spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g[(i, j)], g[(j, i)]);
                }
            }
            assert!(
                g.clone().cholesky().is_some(),
                "gram matrix must be positive definite for distinct points"
            );
        }
    }

    #[test]
    fn shrinking_scale_increases_diagonal_dominance() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.3),
            Vec2::new(-0.4, 0.9),
            Vec2::new(0.7, -0.8),
        ];
        for &b in &[1.5, 2.0] {
            let mut last_ratio = 0.0;
            for &a in &[1.0, 0.5, 0.25, 0.125] {
                let spec = KernelSpec::new(a, b).unwrap();
                let g = gram_matrix(&pts, &spec).unwrap();
                let diag = g[(0, 0)];
                let mut max_off = 0.0f64;
                for i in 0..pts.len() {
                    for j in 0..pts.len() {
                        if i != j {
                            max_off = max_off.max(g[(i, j)]);
                        }
                    }
                }
                let ratio = diag / max_off;
                assert!(
                    ratio > last_ratio,
                    "ratio must strictly increase as a shrinks (a={a}, b={b})"
                );
                last_ratio = ratio;
            }
        }
    }
}
