//! The end-to-end two-group abnormality detection pipeline.
//!
//! 1. Average the control group on the momentum field; keep the per-member
//!    residual momenta.
//! 2. Log-map the control average to every case member.
//! 3. Assemble per-landmark sample matrices (row `i` of member `i`'s momentum
//!    matrix at landmark `j`).
//! 4. Method 1: norms of the mean momentum per landmark and group.
//! 5. Method 2: per-cell posterior fits, predictive draws, central 95%
//!    interval boxes, and box overlap ratios; optionally repeated with raw
//!    landmark positions in place of momenta for comparison.
//! 6. Predictor sets per method and their union.
//!
//! Every stochastic step draws from a stream derived from the master seed and
//! the cell's identity, so reports are byte-reproducible.

use crate::contour::hpd_contour;
use crate::error::StatsError;
use crate::kde::KdeOptions;
use crate::mcmc::{fit_posterior, McmcOptions};
use crate::model::HyperConfig;
use crate::overlap::{overlap_ratio_boxes, select_predictor};
use crate::predictive::{marginal_interval, predictive_draws, Box2, PredictiveSummary};
use crate::sample::{flag_mean_momentum, mean_momentum_norm, GroupTag, LandmarkSampleMatrix};
use momenta_core::averaging::{group_average, AverageOptions, WeightScheme};
use momenta_core::geodesic::{LandmarkTemplate, MomentumField};
use momenta_core::kernel::KernelSpec;
use momenta_core::seed;
use momenta_core::shooting::log_map;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Momentum,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub averaging: AverageOptions,
    pub mcmc: McmcOptions,
    pub hyper: HyperConfig,
    /// Predictive draws per cell; `None` matches the kept posterior draws.
    pub predictive_count: Option<usize>,
    pub interval_level: f64,
    pub ratio_threshold: f64,
    /// Mean-momentum flag factor: a landmark is flagged when its case-group
    /// norm exceeds `factor` times the median case-group norm.
    pub method1_factor: f64,
    /// Also run Method 2 on raw landmark positions for comparison.
    pub position_mode: bool,
    /// Compute HDR contour polygons for the momentum cells.
    pub contours: bool,
    pub kde: KdeOptions,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            averaging: AverageOptions::default(),
            mcmc: McmcOptions::default(),
            hyper: HyperConfig::default(),
            predictive_count: None,
            interval_level: 0.95,
            ratio_threshold: 0.5,
            method1_factor: 1.5,
            position_mode: true,
            contours: true,
            kde: KdeOptions::default(),
        }
    }
}

/// The effective run configuration echoed into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub seed: u64,
    pub kernel: KernelSpec,
    pub scheme: WeightScheme,
    pub averaging: AverageOptions,
    pub mcmc: McmcOptions,
    pub hyper: HyperConfig,
    pub predictive_count: usize,
    pub interval_level: f64,
    pub ratio_threshold: f64,
    pub method1_factor: f64,
    pub position_mode: bool,
    pub contours: bool,
    pub kde: KdeOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingSummary {
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Method1Report {
    pub control_norms: Vec<f64>,
    pub case_norms: Vec<f64>,
    /// Landmarks flagged by the mean-momentum rule (1-based).
    pub flagged: Vec<usize>,
    pub factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkOverlap {
    pub landmark: usize,
    pub control_box: Box2,
    pub case_box: Box2,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Method2Report {
    pub per_landmark: Vec<LandmarkOverlap>,
    /// Landmarks with ratio strictly below the threshold (1-based).
    pub predictor: Vec<usize>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcSummary {
    pub chains: usize,
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    pub warnings: Vec<String>,
}

/// Machine-readable detection report (the JSON export).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub config: EffectiveConfig,
    pub landmark_count: usize,
    pub control_count: usize,
    pub case_count: usize,
    pub averaging: AveragingSummary,
    pub method1: Method1Report,
    pub method2_momentum: Method2Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method2_position: Option<Method2Report>,
    /// Union of the per-method predictors, ascending.
    pub predictor_union: Vec<usize>,
    pub mcmc: McmcSummary,
}

/// Per-cell predictive summary kept alongside the report for CSV export.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub landmark: usize,
    pub group: GroupTag,
    pub source: DataSource,
    pub summary: PredictiveSummary,
}

/// Full output of a detection run.
#[derive(Debug, Clone)]
pub struct DetectionOutput {
    pub report: DetectionReport,
    pub cells: Vec<CellSummary>,
    pub control_average: LandmarkTemplate,
    pub control_momenta: Vec<MomentumField>,
    pub case_momenta: Vec<MomentumField>,
}

fn source_tag(source: DataSource) -> u64 {
    match source {
        DataSource::Momentum => 1,
        DataSource::Position => 2,
    }
}

fn group_tag(group: GroupTag) -> u64 {
    match group {
        GroupTag::Control => 1,
        GroupTag::Case => 2,
    }
}

/// Runs the full pipeline.
pub fn detect(
    controls: &[LandmarkTemplate],
    cases: &[LandmarkTemplate],
    spec: &KernelSpec,
    scheme: &WeightScheme,
    opts: &DetectOptions,
    master_seed: u64,
) -> Result<DetectionOutput, StatsError> {
    if controls.is_empty() || cases.is_empty() {
        return Err(StatsError::InvalidOption(
            "both groups need at least one member".into(),
        ));
    }
    let landmarks = controls[0].len();
    for t in controls.iter().chain(cases) {
        if t.len() != landmarks {
            return Err(StatsError::InvalidOption(format!(
                "landmark counts differ: {} vs {}",
                landmarks,
                t.len()
            )));
        }
    }

    // 1. control-group average and residual momenta
    let average = group_average(controls, scheme, spec, &opts.averaging)?;
    if !average.converged {
        return Err(StatsError::AveragingNotConverged {
            iterations: average.iterations,
        });
    }

    // 2. momentum coordinates of the cases, based at the control average
    let case_momenta: Vec<MomentumField> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let shot = log_map(&average.average, case, spec, &opts.averaging.shooting)
                .map_err(StatsError::Core)?;
            if !shot.converged {
                return Err(StatsError::CaseLogMap {
                    member: i,
                    missfit: shot.final_missfit,
                    tol: opts.averaging.shooting.tol,
                });
            }
            Ok(shot.momentum)
        })
        .collect::<Result<_, _>>()?;

    // 3. per-landmark sample matrices: row i is member i's 2-vector at
    // landmark j ("collect the j-th row")
    let momentum_rows = |fields: &[MomentumField], group: GroupTag| -> Vec<LandmarkSampleMatrix> {
        (0..landmarks)
            .map(|j| {
                let rows = fields
                    .iter()
                    .map(|f| {
                        let p = f.momenta()[j];
                        [p.x, p.y]
                    })
                    .collect();
                LandmarkSampleMatrix::new(group, j + 1, rows).expect("momenta are finite")
            })
            .collect()
    };
    let position_rows = |group_templates: &[LandmarkTemplate],
                         group: GroupTag|
     -> Vec<LandmarkSampleMatrix> {
        (0..landmarks)
            .map(|j| {
                let rows = group_templates
                    .iter()
                    .map(|t| {
                        let p = t.points()[j];
                        [p.x, p.y]
                    })
                    .collect();
                LandmarkSampleMatrix::new(group, j + 1, rows).expect("coordinates are finite")
            })
            .collect()
    };

    let control_samples = momentum_rows(&average.residual_momenta, GroupTag::Control);
    let case_samples = momentum_rows(&case_momenta, GroupTag::Case);

    // 4. Method 1
    let control_norms: Vec<f64> = control_samples.iter().map(mean_momentum_norm).collect();
    let case_norms: Vec<f64> = case_samples.iter().map(mean_momentum_norm).collect();
    let flagged = flag_mean_momentum(&case_norms, opts.method1_factor);

    // 5. Method 2 cells
    let predictive_count = opts.predictive_count.unwrap_or(opts.mcmc.draws);
    let mut plan: Vec<(DataSource, usize, GroupTag, LandmarkSampleMatrix)> = Vec::new();
    for j in 0..landmarks {
        plan.push((
            DataSource::Momentum,
            j,
            GroupTag::Control,
            control_samples[j].clone(),
        ));
        plan.push((DataSource::Momentum, j, GroupTag::Case, case_samples[j].clone()));
    }
    if opts.position_mode {
        let pos_control = position_rows(controls, GroupTag::Control);
        let pos_case = position_rows(cases, GroupTag::Case);
        for j in 0..landmarks {
            plan.push((DataSource::Position, j, GroupTag::Control, pos_control[j].clone()));
            plan.push((DataSource::Position, j, GroupTag::Case, pos_case[j].clone()));
        }
    }

    let fitted: Vec<(CellSummary, Vec<String>)> = plan
        .par_iter()
        .map(|(source, j, group, sample)| {
            let tags = [source_tag(*source), *j as u64 + 1, group_tag(*group)];
            let fit_seed = seed::derive(master_seed, &tags);
            let posterior = fit_posterior(sample, &opts.hyper, &opts.mcmc, fit_seed)?;
            let draw_seed = seed::derive(master_seed, &[tags[0], tags[1], tags[2], 0x4d]);
            let draws = predictive_draws(&posterior, predictive_count, draw_seed);
            let xs: Vec<f64> = draws.iter().map(|d| d[0]).collect();
            let ys: Vec<f64> = draws.iter().map(|d| d[1]).collect();
            let x_interval = marginal_interval(&xs, opts.interval_level)?;
            let y_interval = marginal_interval(&ys, opts.interval_level)?;
            let contour = if opts.contours && *source == DataSource::Momentum {
                Some(hpd_contour(&draws, opts.interval_level, &opts.kde)?)
            } else {
                None
            };
            let label = match source {
                DataSource::Momentum => "momentum",
                DataSource::Position => "position",
            };
            let warnings = posterior
                .meta
                .warnings
                .iter()
                .map(|w| format!("{label} landmark {} {group}: {w}", j + 1))
                .collect();
            Ok((
                CellSummary {
                    landmark: j + 1,
                    group: *group,
                    source: *source,
                    summary: PredictiveSummary {
                        draws,
                        x_interval,
                        y_interval,
                        contour,
                    },
                },
                warnings,
            ))
        })
        .collect::<Result<_, StatsError>>()?;

    let mut cells = Vec::with_capacity(fitted.len());
    let mut warnings = Vec::new();
    for (cell, mut warns) in fitted {
        warnings.append(&mut warns);
        cells.push(cell);
    }

    let ratios_for = |source: DataSource| -> Method2Report {
        let mut per_landmark = Vec::with_capacity(landmarks);
        for j in 0..landmarks {
            let find = |group: GroupTag| -> Box2 {
                cells
                    .iter()
                    .find(|c| c.source == source && c.group == group && c.landmark == j + 1)
                    .expect("cell fitted above")
                    .summary
                    .interval_box()
            };
            let control_box = find(GroupTag::Control);
            let case_box = find(GroupTag::Case);
            per_landmark.push(LandmarkOverlap {
                landmark: j + 1,
                control_box,
                case_box,
                ratio: overlap_ratio_boxes(&control_box, &case_box),
            });
        }
        let ratios: Vec<f64> = per_landmark.iter().map(|l| l.ratio).collect();
        Method2Report {
            per_landmark,
            predictor: select_predictor(&ratios, opts.ratio_threshold),
            threshold: opts.ratio_threshold,
        }
    };

    let method2_momentum = ratios_for(DataSource::Momentum);
    let method2_position = opts.position_mode.then(|| ratios_for(DataSource::Position));

    // 6. predictor union (Method 1 ∪ Method 2 on momenta)
    let mut predictor_union: Vec<usize> = flagged
        .iter()
        .chain(&method2_momentum.predictor)
        .cloned()
        .collect();
    predictor_union.sort_unstable();
    predictor_union.dedup();

    let report = DetectionReport {
        config: EffectiveConfig {
            seed: master_seed,
            kernel: *spec,
            scheme: *scheme,
            averaging: opts.averaging,
            mcmc: opts.mcmc,
            hyper: opts.hyper,
            predictive_count,
            interval_level: opts.interval_level,
            ratio_threshold: opts.ratio_threshold,
            method1_factor: opts.method1_factor,
            position_mode: opts.position_mode,
            contours: opts.contours,
            kde: opts.kde,
        },
        landmark_count: landmarks,
        control_count: controls.len(),
        case_count: cases.len(),
        averaging: AveragingSummary {
            iterations: average.iterations,
            converged: average.converged,
            objective_history: average.objective_history.clone(),
        },
        method1: Method1Report {
            control_norms,
            case_norms,
            flagged,
            factor: opts.method1_factor,
        },
        method2_momentum,
        method2_position,
        predictor_union,
        mcmc: McmcSummary {
            chains: opts.mcmc.chains,
            burn_in: opts.mcmc.burn_in,
            draws: opts.mcmc.draws,
            thin: opts.mcmc.thin,
            warnings,
        },
    };

    Ok(DetectionOutput {
        report,
        cells,
        control_average: average.average,
        control_momenta: average.residual_momenta,
        case_momenta,
    })
}
