//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N PASS` line with its measurements (visible with
//! `cargo test --test acceptance -- --nocapture`).

use momenta_core::averaging::{group_average, AverageOptions, WeightScheme};
use momenta_core::geodesic::{evolve, exp_map, sobolev_norm_sq};
use momenta_core::io::{
    default_axis_sd, synth_group, synth_planted_pair, write_group, GroupRole, DEFAULT_AXIS_MEAN,
};
use momenta_core::seed;
use momenta_core::shooting::{log_map, ShootingOptions};
use momenta_core::{KernelSpec, LandmarkTemplate, Vec2};
use momenta_stats::contour::hpd_contour;
use momenta_stats::kde::KdeOptions;
use momenta_stats::mcmc::psrf;
use momenta_stats::overlap::overlap_ratio_boxes;
use momenta_stats::predictive::{marginal_interval, predictive_draws, Box2, Interval};
use momenta_stats::{
    detect, fit_posterior, DetectOptions, GroupTag, HyperConfig, LandmarkSampleMatrix,
    McmcOptions,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn random_configuration(rng: &mut ChaCha8Rng, n: usize, min_separation: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(n);
    while pts.len() < n {
        let cand = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if pts.iter().all(|p| (p - cand).norm() >= min_separation) {
            pts.push(cand);
        }
    }
    pts
}

fn random_momentum_stacked(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Vec<Vec2> {
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

fn random_momentum_with_norm(
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

fn stacked_rms(a: &[Vec2], b: &[Vec2]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (sum / a.len() as f64).sqrt()
}

fn gaussian_rows(
    n: usize,
    mean: (f64, f64),
    sd: (f64, f64),
    rho: f64,
    seed_value: u64,
) -> Vec<[f64; 2]> {
    let mut rng = seed::stream(seed_value, &[0xda7a]);
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            [
                mean.0 + sd.0 * z1,
                mean.1 + sd.1 * (rho * z1 + (1.0 - rho * rho).sqrt() * z2),
            ]
        })
        .collect()
}

#[test]
fn criterion_1_hamiltonian_conservation() {
    let start = Instant::now();
    let spec = KernelSpec::conic();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=20);
        let q = random_configuration(&mut rng, n, 0.3);
        let target = rng.random_range(0.1..2.0);
        let p = random_momentum_stacked(&mut rng, n, target);
        let traj = evolve(&q, &p, &spec, 100).unwrap();
        worst = worst.max(traj.hamiltonian_drift());
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-6, "worst drift {worst}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:.2?}");
    println!("criterion 1 PASS: max relative H drift {worst:.3e} over 500 systems in {elapsed:.2?}");
}

#[test]
fn criterion_2_exp_log_round_trip() {
    let start = Instant::now();
    let spec = KernelSpec::conic();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let opts = ShootingOptions {
        tol: 1e-8,
        ..Default::default()
    };
    let mut worst_target = 0.0f64;
    let mut worst_momentum = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let q = random_configuration(&mut rng, n, 0.35);
        let reference = LandmarkTemplate::new(q.clone()).unwrap();
        let norm = rng.random_range(0.05..0.5);
        let p_true = random_momentum_with_norm(&mut rng, &q, &spec, norm);
        let target = LandmarkTemplate::new(
            evolve(&q, &p_true, &spec, opts.steps)
                .unwrap()
                .endpoint()
                .q
                .clone(),
        )
        .unwrap();

        let shot = log_map(&reference, &target, &spec, &opts).unwrap();
        assert!(shot.converged, "missfit {}", shot.final_missfit);
        let reproduced = exp_map(&reference, &shot.momentum, &spec, opts.steps).unwrap();
        worst_target = worst_target.max(reproduced.rms_distance(&target).unwrap());
        worst_momentum = worst_momentum.max(stacked_rms(shot.momentum.momenta(), &p_true));
    }
    let elapsed = start.elapsed();
    assert!(worst_target < 1e-5, "worst target RMS {worst_target}");
    assert!(worst_momentum < 1e-3, "worst momentum RMS {worst_momentum}");
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:.2?}");
    println!(
        "criterion 2 PASS: 200 round trips, target RMS <= {worst_target:.3e}, momentum RMS <= {worst_momentum:.3e}, {elapsed:.2?}"
    );
}

#[test]
fn criterion_3_descent_and_convergence() {
    let spec = KernelSpec::conic();
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let opts = AverageOptions::default();
    let mut converged_runs = 0usize;
    let mut total_runs = 0usize;
    for _ in 0..100 {
        let n = rng.random_range(3..=15);
        let m = rng.random_range(2..=10);
        let base = random_configuration(&mut rng, n, 0.4);
        let group: Vec<LandmarkTemplate> = (0..m)
            .map(|_| {
                let norm = rng.random_range(0.02..0.3);
                let p = random_momentum_with_norm(&mut rng, &base, &spec, norm);
                LandmarkTemplate::new(evolve(&base, &p, &spec, 20).unwrap().endpoint().q.clone())
                    .unwrap()
            })
            .collect();
        for scheme in [WeightScheme::equal(), WeightScheme::robust()] {
            let res = group_average(&group, &scheme, &spec, &opts).unwrap();
            total_runs += 1;
            for w in res.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-8) + f64::EPSILON,
                    "objective ascended: {} -> {}",
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
        converged_runs * 100 >= total_runs * 95,
        "{converged_runs}/{total_runs} converged"
    );
    println!(
        "criterion 3 PASS: no objective ascent; {converged_runs}/{total_runs} runs converged within 100 outer iterations"
    );
}

fn ellipse_subgroup_mean(group: &[LandmarkTemplate]) -> LandmarkTemplate {
    let ellipses: Vec<&LandmarkTemplate> = group
        .iter()
        .filter(|t| t.label().map(|l| l.starts_with("ellipse")).unwrap_or(false))
        .collect();
    let n = ellipses[0].len();
    let mut mean = vec![Vec2::zeros(); n];
    for t in &ellipses {
        for (m, p) in mean.iter_mut().zip(t.points()) {
            *m += p / ellipses.len() as f64;
        }
    }
    LandmarkTemplate::new(mean).unwrap()
}

#[test]
fn criterion_4_outlier_experiment() {
    let start = Instant::now();
    let spec = KernelSpec::conic();
    let opts = AverageOptions {
        shooting: ShootingOptions {
            tol: 1e-8,
            max_iter: 2000,
            steps: 10,
            ..Default::default()
        },
        ..Default::default()
    };
    let alphas = [0.1, 0.2, 0.3, 0.4];
    for seed_value in 1..=5u64 {
        let mut equal_dist = Vec::new();
        let mut robust_dist = Vec::new();
        for &alpha in &alphas {
            let group =
                synth_group(alpha, 20, 20, DEFAULT_AXIS_MEAN, default_axis_sd(), seed_value)
                    .unwrap();
            let reference = ellipse_subgroup_mean(&group);
            let equal = group_average(&group, &WeightScheme::equal(), &spec, &opts).unwrap();
            let robust = group_average(&group, &WeightScheme::robust(), &spec, &opts).unwrap();
            assert!(equal.converged && robust.converged, "alpha {alpha} seed {seed_value}");
            equal_dist.push(equal.average.rms_distance(&reference).unwrap());
            robust_dist.push(robust.average.rms_distance(&reference).unwrap());

            // the robust scheme must assign the outliers strictly less total
            // weight than their share of the group
            let outliers = (alpha * 20.0).round() as usize;
            let outlier_weight: f64 =
                robust.final_weights[20 - outliers..].iter().sum();
            assert!(
                outlier_weight < alpha,
                "outlier weight {outlier_weight:.4} >= alpha {alpha} (seed {seed_value})"
            );
        }
        // equal-weight distance is monotone increasing in alpha (Spearman
        // rho = 1 over the four values, allowing one tie)
        let mut ties = 0;
        for w in equal_dist.windows(2) {
            let rel = (w[1] - w[0]) / w[0].max(1e-12);
            if rel.abs() <= 1e-9 {
                ties += 1;
            } else {
                assert!(
                    w[1] > w[0],
                    "equal-weight distance not increasing (seed {seed_value}): {equal_dist:?}"
                );
            }
        }
        assert!(ties <= 1, "too many ties (seed {seed_value}): {equal_dist:?}");
        // robust average stays closer to the ellipse mean for alpha >= 0.2
        for (i, &alpha) in alphas.iter().enumerate() {
            if alpha >= 0.2 {
                assert!(
                    robust_dist[i] < equal_dist[i],
                    "robust {:.4} !< equal {:.4} at alpha {alpha} seed {seed_value}",
                    robust_dist[i],
                    equal_dist[i]
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:.2?}");
    println!(
        "criterion 4 PASS: equal-weight deviation monotone in alpha and robust closer for alpha >= 0.2 on 5 seeds, {elapsed:.2?}"
    );
}

#[test]
fn criterion_5_overlap_algebra_and_hdr_radius() {
    let boxed = |x0: f64, x1: f64, y0: f64, y1: f64| Box2 {
        x: Interval { lo: x0, hi: x1 },
        y: Interval { lo: y0, hi: y1 },
    };
    let b = boxed(-1.0, 2.0, 0.5, 3.5);
    assert!((overlap_ratio_boxes(&b, &b) - 1.0).abs() < 1e-12);
    let a = boxed(0.0, 1.0, 0.0, 1.0);
    let c = boxed(2.0, 3.0, 2.0, 3.0);
    assert!(overlap_ratio_boxes(&a, &c).abs() < 1e-12);
    let d = boxed(0.0, 2.0, 0.0, 2.0);
    let e = boxed(1.0, 3.0, 1.0, 3.0);
    assert!((overlap_ratio_boxes(&d, &e) - 1.0 / 7.0).abs() < 1e-12);

    let mut rng = seed::stream(5005, &[1]);
    let samples: Vec<[f64; 2]> = (0..100_000)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let polygon = hpd_contour(&samples, 0.95, &KdeOptions::default()).unwrap();
    let expected = 2.4477f64;
    let mut worst = 0.0f64;
    for v in &polygon {
        let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
        worst = worst.max((r - expected).abs() / expected);
    }
    assert!(worst < 0.05, "worst radius deviation {worst}");
    println!(
        "criterion 5 PASS: box ratios exact; HDR radius within {:.2}% of {expected}",
        worst * 100.0
    );
}

#[test]
fn criterion_6_mcmc_calibration() {
    let start = Instant::now();
    let hyper = HyperConfig::default();
    let defaults = McmcOptions::default();

    // posterior means against a known generator
    let rows = gaussian_rows(200, (1.0, 2.0), (1.0, 1.0), 0.0, 6);
    let cell = LandmarkSampleMatrix::new(GroupTag::Control, 1, rows).unwrap();
    let post = fit_posterior(&cell, &hyper, &defaults, 61).unwrap();
    let n = post.len() as f64;
    let mean_mu_x: f64 = post.draws().map(|t| t.mu_x).sum::<f64>() / n;
    let mean_mu_y: f64 = post.draws().map(|t| t.mu_y).sum::<f64>() / n;
    let mean_rho: f64 = post.draws().map(|t| t.rho).sum::<f64>() / n;
    assert!((mean_mu_x - 1.0).abs() < 0.15, "mu_x {mean_mu_x}");
    assert!((mean_mu_y - 2.0).abs() < 0.15, "mu_y {mean_mu_y}");
    assert!(mean_rho.abs() < 0.1, "rho {mean_rho}");

    // correlated cell
    let rows = gaussian_rows(500, (0.0, 0.0), (1.0, 2.0), 0.8, 15);
    let cell_rho = LandmarkSampleMatrix::new(GroupTag::Case, 2, rows).unwrap();
    let post_rho = fit_posterior(&cell_rho, &hyper, &defaults, 62).unwrap();
    let mean_rho8: f64 =
        post_rho.draws().map(|t| t.rho).sum::<f64>() / post_rho.len() as f64;
    assert!((mean_rho8 - 0.8).abs() < 0.08, "rho {mean_rho8}");

    // two default fits with different seeds must mix to PSRF < 1.1
    let rows = gaussian_rows(60, (0.5, -0.5), (1.0, 1.0), 0.3, 25);
    let cell_psrf = LandmarkSampleMatrix::new(GroupTag::Control, 3, rows).unwrap();
    let fit_a = fit_posterior(&cell_psrf, &hyper, &defaults, 63).unwrap();
    let fit_b = fit_posterior(&cell_psrf, &hyper, &defaults, 64).unwrap();
    for extract in [
        (|t: &momenta_stats::ModelParameters| t.mu_x) as fn(&momenta_stats::ModelParameters) -> f64,
        |t| t.mu_y,
        |t| t.sigma_x,
        |t| t.sigma_y,
        |t| t.rho,
    ] {
        let chains: Vec<Vec<f64>> = fit_a
            .chains()
            .iter()
            .chain(fit_b.chains())
            .map(|c| c.iter().map(extract).collect())
            .collect();
        let r = psrf(&chains);
        assert!(r < 1.1, "psrf {r}");
    }

    // predictive intervals cover ~95% of fresh generator draws per axis
    let draws = predictive_draws(&post, defaults.draws, 65);
    let xs: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let ys: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    let ix = marginal_interval(&xs, 0.95).unwrap();
    let iy = marginal_interval(&ys, 0.95).unwrap();
    let fresh = gaussian_rows(100_000, (1.0, 2.0), (1.0, 1.0), 0.0, 1234);
    let cover_x =
        fresh.iter().filter(|d| ix.contains(d[0])).count() as f64 / fresh.len() as f64;
    let cover_y =
        fresh.iter().filter(|d| iy.contains(d[1])).count() as f64 / fresh.len() as f64;
    assert!((cover_x - 0.95).abs() <= 0.015, "x coverage {cover_x}");
    assert!((cover_y - 0.95).abs() <= 0.015, "y coverage {cover_y}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "took {elapsed:.2?}");
    println!(
        "criterion 6 PASS: means ({mean_mu_x:.3}, {mean_mu_y:.3}), rho {mean_rho8:.3}, coverage ({cover_x:.3}, {cover_y:.3}), {elapsed:.2?}"
    );
}

#[test]
fn criterion_7_planted_shift_detection() {
    // the public 28-template dataset is not bundled, so the planted-truth
    // oracle applies: a 3σ single-landmark displacement must be flagged by
    // both methods in at least 19 of 20 seeds
    let spec = KernelSpec::conic();
    let opts = DetectOptions {
        mcmc: McmcOptions {
            chains: 2,
            burn_in: 1_000,
            draws: 4_000,
            thin: 1,
        },
        contours: false,
        position_mode: false,
        ..Default::default()
    };
    let mut hits = 0usize;
    for seed_value in 0..20u64 {
        let planted = (seed_value as usize) % 13;
        let (controls, cases) =
            synth_planted_pair(14, 13, 0.1, 3.0, planted, 7000 + seed_value).unwrap();
        let out = detect(
            &controls,
            &cases,
            &spec,
            &WeightScheme::equal(),
            &opts,
            9000 + seed_value,
        )
        .unwrap();
        let id = planted + 1;
        let m1 = out.report.method1.flagged.contains(&id);
        let m2 = out.report.method2_momentum.predictor.contains(&id);
        if m1 && m2 {
            hits += 1;
        }
    }
    assert!(hits >= 19, "planted landmark detected in only {hits}/20 seeds");
    println!("criterion 7 PASS: planted 3-sigma shift detected by both methods in {hits}/20 seeds");
}

#[test]
fn criterion_8_detect_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (controls, cases) = synth_planted_pair(8, 6, 0.08, 2.0, 2, 31).unwrap();
    let controls_manifest = dir.path().join("controls.json");
    let cases_manifest = dir.path().join("cases.json");
    write_group(&controls_manifest, "controls", GroupRole::Control, &controls, None).unwrap();
    write_group(&cases_manifest, "cases", GroupRole::Case, &cases, None).unwrap();

    let run = |out: &str, threads: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_momenta"))
            .args([
                "detect",
                controls_manifest.to_str().unwrap(),
                cases_manifest.to_str().unwrap(),
                "--seed",
                "7",
                "--chains",
                "2",
                "--burn-in",
                "500",
                "--draws",
                "1500",
                "--threads",
                threads,
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(out_dir.join("report.json")).unwrap(),
            std::fs::read(out_dir.join("contours.csv")).unwrap(),
        )
    };
    let (report_a, contours_a) = run("a", "0");
    let (report_b, contours_b) = run("b", "2");
    assert_eq!(report_a, report_b, "reports differ between identical runs");
    assert_eq!(contours_a, contours_b, "contour exports differ");
    println!(
        "criterion 8 PASS: repeated detect runs produced byte-identical reports ({} bytes)",
        report_a.len()
    );
}
