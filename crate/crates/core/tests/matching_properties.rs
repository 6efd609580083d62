//! Exp∘Log consistency of the shooting solver and descent of the averaging
//! loop on seeded random problems.

mod common;

use common::{random_configuration, random_momentum_with_norm, stacked_rms};
use momenta_core::averaging::{group_average, AverageOptions, WeightScheme};
use momenta_core::geodesic::{evolve, exp_map};
use momenta_core::shooting::{log_map, ShootingOptions};
use momenta_core::{KernelSpec, LandmarkTemplate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn log_map_recovers_generating_momentum() {
    let spec = KernelSpec::conic();
    let mut rng = ChaCha8Rng::seed_from_u64(4711);
    let opts = ShootingOptions {
        tol: 1e-8,
        ..Default::default()
    };
    for _ in 0..40 {
        let n = rng.random_range(2..=20);
        let q = random_configuration(&mut rng, n, 0.35);
        let reference = LandmarkTemplate::new(q.clone()).unwrap();
        let norm = rng.random_range(0.05..0.5);
        let p_true = random_momentum_with_norm(&mut rng, &q, &spec, norm);
        let target = LandmarkTemplate::new(
            evolve(&q, &p_true, &spec, opts.steps).unwrap().endpoint().q.clone(),
        )
        .unwrap();

        let shot = log_map(&reference, &target, &spec, &opts).unwrap();
        assert!(shot.converged, "missfit {}", shot.final_missfit);

        let reproduced = exp_map(&reference, &shot.momentum, &spec, opts.steps).unwrap();
        assert!(reproduced.rms_distance(&target).unwrap() < 1e-5);
        assert!(
            stacked_rms(shot.momentum.momenta(), &p_true) < 1e-3,
            "momentum mismatch {}",
            stacked_rms(shot.momentum.momenta(), &p_true)
        );
    }
}

#[test]
fn averaging_objective_descends_on_random_groups() {
    let spec = KernelSpec::conic();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = AverageOptions::default();
    let mut converged_runs = 0;
    let total = 20;
    for trial in 0..total {
        let n = rng.random_range(3..=15);
        let m = rng.random_range(2..=10);
        let base_points = random_configuration(&mut rng, n, 0.4);
        let group: Vec<LandmarkTemplate> = (0..m)
            .map(|_| {
                let norm = rng.random_range(0.02..0.3);
                let p = random_momentum_with_norm(&mut rng, &base_points, &spec, norm);
                LandmarkTemplate::new(
                    evolve(&base_points, &p, &spec, 20).unwrap().endpoint().q.clone(),
                )
                .unwrap()
            })
            .collect();

        for scheme in [WeightScheme::equal(), WeightScheme::robust()] {
            let res = group_average(&group, &scheme, &spec, &opts).unwrap();
            for w in res.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-8) + f64::EPSILON,
                    "objective ascended on trial {trial}: {} -> {}",
                    w[0],
                    w[1]
                );
            }
            if res.converged {
                converged_runs += 1;
            }
        }
    }
    assert!(
        converged_runs * 100 >= 2 * total * 95,
        "only {converged_runs}/{} runs converged",
        2 * total
    );
}
