//! Posterior-predictive draws and central marginal intervals.

use crate::error::StatsError;
use crate::mcmc::PosteriorDraws;
use momenta_core::seed;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Closed interval with ordered endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Axis-aligned box, the product of two marginal intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub x: Interval,
    pub y: Interval,
}

impl Box2 {
    pub fn area(&self) -> f64 {
        self.x.width() * self.y.width()
    }
}

/// Predictive sample of one cell with its derived summaries.
#[derive(Debug, Clone)]
pub struct PredictiveSummary {
    pub draws: Vec<[f64; 2]>,
    pub x_interval: Interval,
    pub y_interval: Interval,
    /// 95% highest-density-region polygon, when requested.
    pub contour: Option<Vec<[f64; 2]>>,
}

impl PredictiveSummary {
    pub fn interval_box(&self) -> Box2 {
        Box2 {
            x: self.x_interval,
            y: self.y_interval,
        }
    }
}

/// Draws `count` new observations from the posterior predictive: each draw
/// picks a retained posterior θ (cycling in order) and samples one bivariate
/// normal variate with those parameters.
pub fn predictive_draws(
    posterior: &PosteriorDraws,
    count: usize,
    seed_value: u64,
) -> Vec<[f64; 2]> {
    let thetas: Vec<_> = posterior.draws().collect();
    if thetas.is_empty() || count == 0 {
        return Vec::new();
    }
    let mut rng = seed::stream(seed_value, &[0x9d1c7]);
    (0..count)
        .map(|k| {
            let t = thetas[k % thetas.len()];
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let x = t.mu_x + t.sigma_x * z1;
            let y = t.mu_y
                + t.sigma_y * (t.rho * z1 + (1.0 - t.rho * t.rho).sqrt() * z2);
            [x, y]
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics
/// (inclusive endpoints).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Central interval of one coordinate of a draw sample, e.g. the (2.5%, 97.5%)
/// quantiles at `level = 0.95`.
pub fn marginal_interval(draws: &[f64], level: f64) -> Result<Interval, StatsError> {
    if draws.is_empty() {
        return Err(StatsError::TooFewDraws { got: 0, need: 1 });
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(StatsError::InvalidOption(format!(
            "interval level must lie in (0,1), got {level}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let tail = 0.5 * (1.0 - level);
    Ok(Interval {
        lo: quantile(&sorted, tail),
        hi: quantile(&sorted, 1.0 - tail),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_of_1_to_100() {
        let draws: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let iv = marginal_interval(&draws, 0.95).unwrap();
        // within one order statistic of (3, 98)
        assert!((iv.lo - 3.0).abs() <= 1.0, "lo {}", iv.lo);
        assert!((iv.hi - 98.0).abs() <= 1.0, "hi {}", iv.hi);
    }

    #[test]
    fn constant_draws_give_zero_width() {
        let iv = marginal_interval(&[2.5; 40], 0.95).unwrap();
        assert_eq!(iv.width(), 0.0);
        assert_eq!(iv.lo, 2.5);
    }

    #[test]
    fn symmetric_draws_give_symmetric_interval() {
        let mut draws = Vec::new();
        for k in 1..=500 {
            draws.push(k as f64 / 100.0);
            draws.push(-(k as f64) / 100.0);
        }
        let iv = marginal_interval(&draws, 0.9).unwrap();
        assert_relative_eq!(iv.lo, -iv.hi, max_relative = 1e-12);
    }
}
