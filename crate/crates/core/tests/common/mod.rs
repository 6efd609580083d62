//! Shared generators for seeded property tests.
#![allow(dead_code)] // each test target uses its own subset

use momenta_core::geodesic::sobolev_norm_sq;
use momenta_core::{KernelSpec, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Well-separated random configuration in [-2, 2]²; separation keeps the
/// Gram system well conditioned and particle encounters far from the conic
/// kernel's non-smooth origin.
pub fn random_configuration(rng: &mut ChaCha8Rng, n: usize, min_separation: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(n);
    while pts.len() < n {
        let cand = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if pts.iter().all(|p| (p - cand).norm() >= min_separation) {
            pts.push(cand);
        }
    }
    pts
}

/// Random momenta rescaled so the induced velocity field has Sobolev norm
/// `target_norm`.
pub fn random_momentum_with_norm(
    rng: &mut ChaCha8Rng,
    q: &[Vec2],
    spec: &KernelSpec,
    target_norm: f64,
) -> Vec<Vec2> {
    loop {
        let p: Vec<Vec2> = (0..q.len())
            .map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = sobolev_norm_sq(q, &p, spec).unwrap().sqrt();
        if norm > 1e-9 {
            let scale = target_norm / norm;
            return p.into_iter().map(|v| v * scale).collect();
        }
    }
}

/// Random momenta rescaled so the stacked Euclidean norm is `target`.
pub fn random_momentum_stacked(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Vec<Vec2> {
    loop {
        let p: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = p.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return p.into_iter().map(|v| v * (target / norm)).collect();
        }
    }
}

pub fn stacked_rms(a: &[Vec2], b: &[Vec2]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (sum / a.len() as f64).sqrt()
}
