//! End-to-end detection pipeline checks on synthetic groups.

use momenta_core::averaging::WeightScheme;
use momenta_core::io::synth_planted_pair;
use momenta_core::{KernelSpec, LandmarkTemplate};
use momenta_stats::detect::DataSource;
use momenta_stats::export::report_json;
use momenta_stats::{detect, DetectOptions, McmcOptions};

fn planted_groups(
    seed_value: u64,
    members: usize,
    landmarks: usize,
    sigma: f64,
    shift_sigmas: f64,
    planted: usize,
) -> (Vec<LandmarkTemplate>, Vec<LandmarkTemplate>) {
    synth_planted_pair(members, landmarks, sigma, shift_sigmas, planted, seed_value).unwrap()
}

fn quick_opts() -> DetectOptions {
    DetectOptions {
        mcmc: McmcOptions {
            chains: 2,
            burn_in: 1_000,
            draws: 4_000,
            thin: 1,
        },
        contours: false,
        ..Default::default()
    }
}

#[test]
fn identical_groups_produce_no_predictor() {
    let (controls, _) = planted_groups(5, 10, 8, 0.08, 0.0, 0);
    let spec = KernelSpec::conic();
    let out = detect(
        &controls,
        &controls,
        &spec,
        &WeightScheme::equal(),
        &quick_opts(),
        77,
    )
    .unwrap();

    // case momenta are recomputed from the same templates: norms must agree
    for (c, s) in out
        .report
        .method1
        .control_norms
        .iter()
        .zip(&out.report.method1.case_norms)
    {
        assert!((c - s).abs() < 1e-6, "norms {c} vs {s}");
    }
    assert!(out.report.method2_momentum.predictor.is_empty());
    for l in &out.report.method2_momentum.per_landmark {
        assert!(l.ratio > 0.8, "self-overlap ratio {}", l.ratio);
    }
}

#[test]
fn planted_shift_is_detected_by_both_methods() {
    let planted = 3usize; // 0-based; landmark id 4
    let (controls, cases) = planted_groups(11, 14, 13, 0.1, 3.0, planted);
    let spec = KernelSpec::conic();
    let out = detect(
        &controls,
        &cases,
        &spec,
        &WeightScheme::equal(),
        &quick_opts(),
        2024,
    )
    .unwrap();

    let id = planted + 1;
    assert!(
        out.report.method1.flagged.contains(&id),
        "method 1 flags {:?}",
        out.report.method1.flagged
    );
    assert!(
        out.report.method2_momentum.predictor.contains(&id),
        "method 2 predictor {:?} (ratios {:?})",
        out.report.method2_momentum.predictor,
        out.report
            .method2_momentum
            .per_landmark
            .iter()
            .map(|l| l.ratio)
            .collect::<Vec<_>>()
    );
    assert!(out.report.predictor_union.contains(&id));
}

#[test]
fn momentum_cells_carry_contours_when_requested() {
    let (controls, cases) = planted_groups(21, 8, 6, 0.08, 2.0, 1);
    let spec = KernelSpec::conic();
    let opts = DetectOptions {
        contours: true,
        ..quick_opts()
    };
    let out = detect(&controls, &cases, &spec, &WeightScheme::equal(), &opts, 5).unwrap();
    for cell in &out.cells {
        match cell.source {
            DataSource::Momentum => {
                let contour = cell.summary.contour.as_ref().expect("momentum contour");
                assert!(contour.len() >= 3);
            }
            DataSource::Position => assert!(cell.summary.contour.is_none()),
        }
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let (controls, cases) = planted_groups(31, 6, 5, 0.06, 1.0, 2);
    let spec = KernelSpec::conic();
    let opts = quick_opts();
    let a = detect(&controls, &cases, &spec, &WeightScheme::robust(), &opts, 99).unwrap();
    let b = detect(&controls, &cases, &spec, &WeightScheme::robust(), &opts, 99).unwrap();
    assert_eq!(report_json(&a.report), report_json(&b.report));

    let c = detect(&controls, &cases, &spec, &WeightScheme::robust(), &opts, 100).unwrap();
    assert_ne!(report_json(&a.report), report_json(&c.report));
}
