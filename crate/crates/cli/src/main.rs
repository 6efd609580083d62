//! `momenta` — geodesic landmark matching, momentum averaging and two-group
//! abnormality detection from the command line.
//!
//! Exit codes: 0 success, 1 usage/IO error, 2 numerical non-convergence,
//! 3 statistical-fit failure.

mod tables;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use momenta_core::averaging::{group_average, AverageOptions, WeightScheme};
use momenta_core::geodesic::{exp_map, MomentumField};
use momenta_core::io as core_io;
use momenta_core::shooting::{log_map, ShootingOptions};
use momenta_core::{CoreError, KernelSpec, LandmarkTemplate};
use momenta_stats::export;
use momenta_stats::{detect, DetectOptions, McmcOptions, StatsError};
use serde::Serialize;
use std::path::{Path, PathBuf};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_NON_CONVERGENCE: i32 = 2;
const EXIT_STAT_FAILURE: i32 = 3;

#[derive(Parser)]
#[command(name = "momenta", version, about = "Landmark momentum analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot a geodesic from a reference template onto a target (Log map).
    Match(MatchArgs),
    /// Carry a template along a momentum field (Exp map).
    Exp(ExpArgs),
    /// Average a group on the momentum field and emit residual momenta.
    Average(AverageArgs),
    /// Run the full two-group abnormality detection pipeline.
    Detect(DetectArgs),
    /// Generate a synthetic ellipse group with heart-curve outliers.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Kernel length scale a.
    #[arg(long = "kernel-a", value_name = "A", default_value_t = 1.0)]
    kernel_a: f64,
    /// Kernel smoothness order b (3/2 selects the conic closed form).
    #[arg(long = "kernel-b", value_name = "B", default_value_t = 1.5)]
    kernel_b: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec, CliError> {
        Ok(KernelSpec::new(self.kernel_a, self.kernel_b)?)
    }
}

#[derive(Args, Clone)]
struct ShootArgs {
    /// Landmark-RMS miss-fit tolerance; defaults to 1e-6 x template diameter.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for the shooting loop.
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    /// Integrator grid resolution.
    #[arg(long, default_value_t = 20)]
    steps: usize,
}

impl ShootArgs {
    fn options(&self, reference: &LandmarkTemplate) -> ShootingOptions {
        let mut opts = ShootingOptions::scaled_to(reference);
        if let Some(tol) = self.tol {
            opts.tol = tol;
        }
        opts.max_iter = self.max_iter;
        opts.steps = self.steps;
        opts
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    Equal,
    Robust,
}

impl WeightsArg {
    fn scheme(self) -> WeightScheme {
        match self {
            WeightsArg::Equal => WeightScheme::equal(),
            WeightsArg::Robust => WeightScheme::robust(),
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// Reference template CSV.
    reference: PathBuf,
    /// Target template CSV.
    target: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    shoot: ShootArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExpArgs {
    /// Base template CSV.
    template: PathBuf,
    /// Momentum CSV (same column schema, components in place of coordinates).
    momentum: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AverageArgs {
    /// Group manifest JSON.
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "equal")]
    weights: WeightsArg,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    shoot: ShootArgs,
    /// Worker thread cap (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Control-group manifest JSON.
    controls: PathBuf,
    /// Case-group manifest JSON.
    cases: PathBuf,
    #[arg(long, value_enum, default_value = "equal")]
    weights: WeightsArg,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    shoot: ShootArgs,
    /// Master seed recorded in every output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long = "burn-in", default_value_t = 5000)]
    burn_in: usize,
    /// Total kept posterior draws across chains.
    #[arg(long, default_value_t = 20000)]
    draws: usize,
    /// Overlap-ratio predictor threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Worker thread cap (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Outlier fraction in [0, 1].
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Group size.
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Landmarks per shape.
    #[arg(long, default_value_t = 20)]
    landmarks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::Divergence { .. }
            | CoreError::AveragingMember { .. }
            | CoreError::GramConditioning { .. }
            | CoreError::CoincidentLandmarks { .. }
            | CoreError::DegenerateRadius { .. } => EXIT_NON_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        CliError {
            message: err.to_string(),
            code,
        }
    }
}

impl From<StatsError> for CliError {
    fn from(err: StatsError) -> Self {
        let code = match &err {
            StatsError::Core(core) => return CliError::from_core_ref(core, err.to_string()),
            StatsError::DegenerateSample { .. }
            | StatsError::TooFewRows { .. }
            | StatsError::TooFewDraws { .. } => EXIT_STAT_FAILURE,
            StatsError::AveragingNotConverged { .. } | StatsError::CaseLogMap { .. } => {
                EXIT_NON_CONVERGENCE
            }
            StatsError::InvalidOption(_) | StatsError::Io { .. } => EXIT_USAGE,
        };
        CliError {
            message: err.to_string(),
            code,
        }
    }
}

impl CliError {
    fn from_core_ref(err: &CoreError, message: String) -> Self {
        let code = match err {
            CoreError::Divergence { .. }
            | CoreError::AveragingMember { .. }
            | CoreError::GramConditioning { .. }
            | CoreError::CoincidentLandmarks { .. }
            | CoreError::DegenerateRadius { .. } => EXIT_NON_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        CliError { message, code }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let kind = err.kind();
            let _ = err.print();
            return if kind == ErrorKind::DisplayHelp || kind == ErrorKind::DisplayVersion {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
        }
    };
    let outcome = match cli.command {
        Command::Match(args) => cmd_match(args),
        Command::Exp(args) => cmd_exp(args),
        Command::Average(args) => cmd_average(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.code
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::usage(format!("cannot create output directory {dir:?}: {e}")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {path:?}: {e}")))
}

fn read_single_template(path: &Path) -> Result<LandmarkTemplate, CliError> {
    let templates = core_io::read_templates_csv(path)?;
    match <[LandmarkTemplate; 1]>::try_from(templates) {
        Ok([t]) => Ok(t),
        Err(ts) => Err(CliError::usage(format!(
            "{path:?} holds {} templates, expected exactly one",
            ts.len()
        ))),
    }
}

#[derive(Serialize)]
struct MatchConfig {
    command: &'static str,
    seed: u64,
    kernel: KernelSpec,
    shooting: ShootingOptions,
    reference: String,
    target: String,
}

#[derive(Serialize)]
struct MatchReport {
    config: MatchConfig,
    converged: bool,
    iterations: usize,
    final_missfit: f64,
    missfit_history: Vec<f64>,
    sobolev_norm: f64,
    distance_estimate: f64,
}

fn cmd_match(args: MatchArgs) -> Result<i32, CliError> {
    let spec = args.kernel.spec()?;
    let reference = read_single_template(&args.reference)?;
    let target = read_single_template(&args.target)?;
    let opts = args.shoot.options(&reference);
    ensure_out_dir(&args.out)?;

    let shot = log_map(&reference, &target, &spec, &opts)?;
    let norm_sq = shot.sobolev_norm_sq(&spec)?;
    let label = reference.label().unwrap_or("reference").to_owned();
    core_io::write_vector_sets_csv(
        args.out.join("momentum.csv"),
        &[(label, shot.momentum.momenta().to_vec())],
    )?;
    let report = MatchReport {
        config: MatchConfig {
            command: "match",
            seed: 0,
            kernel: spec,
            shooting: opts,
            reference: args.reference.display().to_string(),
            target: args.target.display().to_string(),
        },
        converged: shot.converged,
        iterations: shot.iterations,
        final_missfit: shot.final_missfit,
        missfit_history: shot.missfit_history.clone(),
        sobolev_norm: norm_sq.sqrt(),
        distance_estimate: norm_sq.sqrt(),
    };
    write_json(&args.out.join("match.json"), &report)?;
    println!(
        "match: converged={} iterations={} missfit={:.3e} distance={:.6}",
        shot.converged,
        shot.iterations,
        shot.final_missfit,
        norm_sq.sqrt()
    );
    Ok(if shot.converged {
        EXIT_OK
    } else {
        EXIT_NON_CONVERGENCE
    })
}

#[derive(Serialize)]
struct ExpConfig {
    command: &'static str,
    seed: u64,
    kernel: KernelSpec,
    steps: usize,
    template: String,
    momentum: String,
}

fn cmd_exp(args: ExpArgs) -> Result<i32, CliError> {
    let spec = args.kernel.spec()?;
    let base = read_single_template(&args.template)?;
    let momentum_sets = core_io::read_templates_csv(&args.momentum)?;
    let momenta = match <[LandmarkTemplate; 1]>::try_from(momentum_sets) {
        Ok([m]) => m.points().to_vec(),
        Err(ms) => {
            return Err(CliError::usage(format!(
                "{:?} holds {} momentum sets, expected exactly one",
                args.momentum,
                ms.len()
            )))
        }
    };
    let field = MomentumField::new(momenta, base.clone())?;
    ensure_out_dir(&args.out)?;

    let deformed = exp_map(&base, &field, &spec, args.steps)?;
    core_io::write_templates_csv(args.out.join("deformed.csv"), &[deformed])?;
    write_json(
        &args.out.join("exp.json"),
        &ExpConfig {
            command: "exp",
            seed: 0,
            kernel: spec,
            steps: args.steps,
            template: args.template.display().to_string(),
            momentum: args.momentum.display().to_string(),
        },
    )?;
    println!("exp: wrote {:?}", args.out.join("deformed.csv"));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AverageConfig {
    command: &'static str,
    seed: u64,
    kernel: KernelSpec,
    scheme: WeightScheme,
    options: AverageOptions,
    manifest: String,
}

#[derive(Serialize)]
struct AverageReport {
    config: AverageConfig,
    converged: bool,
    iterations: usize,
    objective_history: Vec<f64>,
    final_weights: Vec<f64>,
}

fn cmd_average(args: AverageArgs) -> Result<i32, CliError> {
    if args.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global();
    }
    let spec = args.kernel.spec()?;
    let (_, group) = core_io::read_group(&args.manifest)?;
    let scheme = args.weights.scheme();
    let mut opts = AverageOptions::default();
    opts.shooting.max_iter = args.shoot.max_iter;
    opts.shooting.steps = args.shoot.steps;
    if let Some(tol) = args.shoot.tol {
        opts.shooting.tol = tol;
    }
    ensure_out_dir(&args.out)?;

    if args.shoot.tol.is_none() {
        // scale the inner tolerance to the data
        let diameter = group
            .iter()
            .map(LandmarkTemplate::diameter)
            .fold(1.0f64, f64::max);
        opts.shooting.tol = 1e-10 * diameter;
    }

    let result = group_average(&group, &scheme, &spec, &opts)?;
    let mut average = result.average.clone();
    average.set_label("average");
    core_io::write_templates_csv(args.out.join("average.csv"), &[average])?;
    let momentum_sets: Vec<(String, Vec<momenta_core::Vec2>)> = result
        .residual_momenta
        .iter()
        .zip(&group)
        .enumerate()
        .map(|(i, (field, member))| {
            let id = member
                .label()
                .map(str::to_owned)
                .unwrap_or_else(|| format!("member_{:03}", i + 1));
            (id, field.momenta().to_vec())
        })
        .collect();
    core_io::write_vector_sets_csv(args.out.join("residual_momenta.csv"), &momentum_sets)?;
    write_json(
        &args.out.join("average.json"),
        &AverageReport {
            config: AverageConfig {
                command: "average",
                seed: 0,
                kernel: spec,
                scheme,
                options: opts,
                manifest: args.manifest.display().to_string(),
            },
            converged: result.converged,
            iterations: result.iterations,
            objective_history: result.objective_history.clone(),
            final_weights: result.final_weights.clone(),
        },
    )?;
    println!(
        "average: converged={} iterations={} objective={:.6e}",
        result.converged,
        result.iterations,
        result.objective_history.last().copied().unwrap_or(0.0)
    );
    Ok(if result.converged {
        EXIT_OK
    } else {
        EXIT_NON_CONVERGENCE
    })
}

fn cmd_detect(args: DetectArgs) -> Result<i32, CliError> {
    if args.threads > 0 {
        // ignore failure: the global pool may already exist in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global();
    }
    let spec = args.kernel.spec()?;
    let (_, controls) = core_io::read_group(&args.controls)?;
    let (_, cases) = core_io::read_group(&args.cases)?;
    let scheme = args.weights.scheme();

    let mut opts = DetectOptions {
        mcmc: McmcOptions {
            chains: args.chains,
            burn_in: args.burn_in,
            draws: args.draws,
            thin: McmcOptions::default().thin,
        },
        ratio_threshold: args.threshold,
        ..Default::default()
    };
    opts.averaging.shooting.max_iter = args.shoot.max_iter;
    opts.averaging.shooting.steps = args.shoot.steps;
    match args.shoot.tol {
        Some(tol) => opts.averaging.shooting.tol = tol,
        None => {
            // scale the inner tolerance to the data
            let diameter = controls
                .iter()
                .chain(&cases)
                .map(LandmarkTemplate::diameter)
                .fold(1.0f64, f64::max);
            opts.averaging.shooting.tol = 1e-10 * diameter;
        }
    }
    ensure_out_dir(&args.out)?;

    let output = detect(&controls, &cases, &spec, &scheme, &opts, args.seed)?;
    export::write_report_json(args.out.join("report.json"), &output.report)?;
    export::write_contours_csv(args.out.join("contours.csv"), &output.cells)?;
    export::write_scatter_csv(args.out.join("predictive_samples.csv"), &output.cells)?;
    let tables = tables::render(&output.report);
    std::fs::write(args.out.join("tables.txt"), &tables)
        .map_err(|e| CliError::usage(format!("cannot write tables: {e}")))?;
    print!("{tables}");
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SynthConfig {
    command: &'static str,
    seed: u64,
    alpha: f64,
    m: usize,
    landmarks: usize,
    axis_mean: (f64, f64),
    axis_sd: f64,
}

fn cmd_synth(args: SynthArgs) -> Result<i32, CliError> {
    ensure_out_dir(&args.out)?;
    let group = core_io::synth_group(
        args.alpha,
        args.m,
        args.landmarks,
        core_io::DEFAULT_AXIS_MEAN,
        core_io::default_axis_sd(),
        args.seed,
    )?;
    core_io::write_group(
        args.out.join("group.json"),
        "synthetic",
        core_io::GroupRole::Unlabeled,
        &group,
        None,
    )?;
    write_json(
        &args.out.join("synth.json"),
        &SynthConfig {
            command: "synth",
            seed: args.seed,
            alpha: args.alpha,
            m: args.m,
            landmarks: args.landmarks,
            axis_mean: core_io::DEFAULT_AXIS_MEAN,
            axis_sd: core_io::default_axis_sd(),
        },
    )?;
    println!(
        "synth: wrote {} templates to {:?}",
        group.len(),
        args.out.join("group.json")
    );
    Ok(EXIT_OK)
}
