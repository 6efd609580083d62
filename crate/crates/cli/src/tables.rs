//! Human-readable tables rendered from a detection report. Pure views: every
//! number comes straight out of the JSON report.

use momenta_stats::detect::{DetectionReport, Method2Report};
use std::fmt::Write;

fn norm_table(out: &mut String, title: &str, norms: &[f64], flagged: &[usize]) {
    writeln!(out, "{title}").unwrap();
    writeln!(out, "{:<10} {:>12}", "landmark", "norm").unwrap();
    for (i, v) in norms.iter().enumerate() {
        let mark = if flagged.contains(&(i + 1)) { " *" } else { "" };
        writeln!(out, "{:<10} {:>12.4e}{mark}", i + 1, v).unwrap();
    }
    writeln!(out).unwrap();
}

fn ratio_table(out: &mut String, title: &str, report: &Method2Report) {
    writeln!(out, "{title}").unwrap();
    writeln!(out, "{:<10} {:>10}", "landmark", "ratio").unwrap();
    for l in &report.per_landmark {
        let mark = if report.predictor.contains(&l.landmark) {
            " *"
        } else {
            ""
        };
        writeln!(out, "{:<10} {:>10.4}{mark}", l.landmark, l.ratio).unwrap();
    }
    writeln!(
        out,
        "predictor (ratio < {}): {}",
        report.threshold,
        fmt_set(&report.predictor)
    )
    .unwrap();
    writeln!(out).unwrap();
}

fn fmt_set(set: &[usize]) -> String {
    if set.is_empty() {
        "none".to_owned()
    } else {
        set.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn render(report: &DetectionReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "detection report: {} landmarks, {} controls, {} cases (seed {})",
        report.landmark_count, report.control_count, report.case_count, report.config.seed
    )
    .unwrap();
    writeln!(
        out,
        "control average: converged={} after {} outer iterations",
        report.averaging.converged, report.averaging.iterations
    )
    .unwrap();
    writeln!(out).unwrap();

    norm_table(
        &mut out,
        "norm of mean momentum, control group",
        &report.method1.control_norms,
        &[],
    );
    norm_table(
        &mut out,
        "norm of mean momentum, case group",
        &report.method1.case_norms,
        &report.method1.flagged,
    );
    writeln!(
        out,
        "mean-momentum predictor (norm > {} x median): {}",
        report.method1.factor,
        fmt_set(&report.method1.flagged)
    )
    .unwrap();
    writeln!(out).unwrap();

    ratio_table(
        &mut out,
        "predictive-interval overlap ratios, momentum data",
        &report.method2_momentum,
    );
    if let Some(position) = &report.method2_position {
        ratio_table(
            &mut out,
            "predictive-interval overlap ratios, position data",
            position,
        );
    }

    writeln!(out, "predictor summary").unwrap();
    writeln!(
        out,
        "  mean momentum:          {}",
        fmt_set(&report.method1.flagged)
    )
    .unwrap();
    writeln!(
        out,
        "  predictive contours:    {}",
        fmt_set(&report.method2_momentum.predictor)
    )
    .unwrap();
    writeln!(
        out,
        "  union:                  {}",
        fmt_set(&report.predictor_union)
    )
    .unwrap();
    if !report.mcmc.warnings.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "mcmc warnings:").unwrap();
        for w in &report.mcmc.warnings {
            writeln!(out, "  {w}").unwrap();
        }
    }
    out
}
