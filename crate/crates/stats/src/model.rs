//! The hierarchical bivariate-normal model fitted per landmark–group cell.
//!
//! Rows of a cell are conditionally i.i.d. bivariate normal given the cell
//! parameters θ = (μx, μy, σx, σy, ρ), with the density factored as the
//! marginal of `x` times the conditional of `y | x` so every parameter is a
//! scalar with its own prior:
//!
//! * `μx ~ N(m_x, 1/p_x)`, `μy ~ N(m_y, 1/p_y)` with hyper-priors
//!   `m ~ N(0, 10)` and precision `p ~ U(0, 1)`,
//! * `σx ~ Gamma(a_x, b_x)`, `σy ~ Gamma(a_y, b_y)` (shape–rate) with
//!   `a ~ U(0, 0.5)`, `b ~ U(0, 1)`,
//! * `ρ ~ N(m_ρ, 1/p_ρ)` truncated to (−1, 1), with `m_ρ ~ N(0, 2)` and
//!   `p_ρ ~ U(0, 1)`.
//!
//! The second argument of each `N(·,·)` above is a variance by default; the
//! precision reading of the same notation is available behind
//! [`PriorScaleMode`].

use serde::{Deserialize, Serialize};

/// Bivariate-normal parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl ModelParameters {
    pub fn is_valid(&self) -> bool {
        self.sigma_x > 0.0 && self.sigma_y > 0.0 && self.rho.abs() < 1.0
    }
}

/// Latent hyper-parameters η of one cell's priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParameters {
    pub mu_x0: f64,
    pub sigma_x0: f64,
    pub mu_y0: f64,
    pub sigma_y0: f64,
    pub a_x: f64,
    pub b_x: f64,
    pub a_y: f64,
    pub b_y: f64,
    pub mu_rho: f64,
    pub sigma_rho: f64,
}

/// How the second argument of the `N(0, s)` prior notations is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScaleMode {
    /// `N(0, s)` has variance `s` ("fairly diffuse"); the default.
    Variance,
    /// `N(0, s)` has precision `s` (the convention of some samplers).
    Precision,
}

/// Fixed constants of the hyper-prior layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub scale_mode: PriorScaleMode,
    /// Scale of the `N(0, ·)` hyper-prior on the mean hyper-means.
    pub mu_scale: f64,
    /// Scale of the `N(0, ·)` hyper-prior on the correlation hyper-mean.
    pub rho_scale: f64,
    /// Support of the uniform prior on the gamma shapes.
    pub shape_max: f64,
    /// Support of the uniform prior on the gamma rates.
    pub rate_max: f64,
    /// Support of the uniform priors on precisions.
    pub precision_max: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            scale_mode: PriorScaleMode::Variance,
            mu_scale: 10.0,
            rho_scale: 2.0,
            shape_max: 0.5,
            rate_max: 1.0,
            precision_max: 1.0,
        }
    }
}

impl HyperConfig {
    /// Variance of the hyper-prior on mean hyper-means.
    pub fn mu_variance(&self) -> f64 {
        match self.scale_mode {
            PriorScaleMode::Variance => self.mu_scale,
            PriorScaleMode::Precision => 1.0 / self.mu_scale,
        }
    }

    /// Variance of the hyper-prior on the correlation hyper-mean.
    pub fn rho_variance(&self) -> f64 {
        match self.scale_mode {
            PriorScaleMode::Variance => self.rho_scale,
            PriorScaleMode::Precision => 1.0 / self.rho_scale,
        }
    }
}

pub(crate) fn ln_normal(v: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * ((v - mean) * (v - mean) / variance + variance.ln() + LN_TWO_PI)
}

pub(crate) const LN_TWO_PI: f64 = 1.837_877_066_409_345_5;

/// Log density of Gamma(shape, rate) at `v > 0`.
pub(crate) fn ln_gamma_pdf(v: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - libm::lgamma(shape) + (shape - 1.0) * v.ln() - rate * v
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Log normalizer of a normal truncated to (−1, 1).
pub(crate) fn ln_truncation_mass(mean: f64, precision: f64) -> f64 {
    let sd = 1.0 / precision.sqrt();
    let mass = normal_cdf((1.0 - mean) / sd) - normal_cdf((-1.0 - mean) / sd);
    mass.max(f64::MIN_POSITIVE).ln()
}

/// Log likelihood of the rows under θ, using the marginal–conditional
/// factorization.
pub(crate) fn log_likelihood(rows: &[[f64; 2]], theta: &ModelParameters) -> f64 {
    if !theta.is_valid() {
        return f64::NEG_INFINITY;
    }
    let var_x = theta.sigma_x * theta.sigma_x;
    let resid_var = theta.sigma_y * theta.sigma_y * (1.0 - theta.rho * theta.rho);
    let slope = theta.rho * theta.sigma_y / theta.sigma_x;
    let mut ll = 0.0;
    for row in rows {
        ll += ln_normal(row[0], theta.mu_x, var_x);
        let cond_mean = theta.mu_y + slope * (row[0] - theta.mu_x);
        ll += ln_normal(row[1], cond_mean, resid_var);
    }
    ll
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn likelihood_matches_direct_bivariate_density() {
        // the factored form must equal the joint BVN density
        let theta = ModelParameters {
            mu_x: 0.3,
            mu_y: -0.7,
            sigma_x: 1.2,
            sigma_y: 0.8,
            rho: 0.55,
        };
        let rows = vec![[0.0, 0.0], [1.0, -1.0], [0.3, -0.4]];
        let got = log_likelihood(&rows, &theta);

        let det = theta.sigma_x.powi(2) * theta.sigma_y.powi(2) * (1.0 - theta.rho.powi(2));
        let mut want = 0.0;
        for r in &rows {
            let dx = (r[0] - theta.mu_x) / theta.sigma_x;
            let dy = (r[1] - theta.mu_y) / theta.sigma_y;
            let quad = (dx * dx - 2.0 * theta.rho * dx * dy + dy * dy)
                / (1.0 - theta.rho * theta.rho);
            want += -0.5 * (quad + det.ln() + 2.0 * LN_TWO_PI);
        }
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-14);
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, max_relative = 1e-9);
        assert!(normal_cdf(-8.0) < 1e-14);
    }

    #[test]
    fn truncation_mass_is_sane() {
        // wide prior: most mass outside (−1,1)
        let narrow = ln_truncation_mass(0.0, 100.0); // sd = 0.1, mass ≈ 1
        assert!(narrow.abs() < 1e-10);
        let wide = ln_truncation_mass(0.0, 0.25); // sd = 2
        assert!(wide < -0.5);
    }
}
