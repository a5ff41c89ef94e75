//! `atlanta`: vertical direction and Atlanta frame estimation from normals.

mod bench;
mod input;
mod record;
mod truth;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use atlanta_core::atlanta::{horizontal_basis, manhattan_matrix};
use atlanta_core::io::write_normals_csv;
use atlanta_core::synth::TAU_FLOOR_DEG;
use atlanta_core::{error_manhattan, error_vertical, generate, Problem, Strategy, SynthConfig, UnitVec3, World};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bench::{BenchPlan, Grid};
use input::InputArgs;
use record::{completed, run_method, EstimateRow, Method, ResultRecord, RunSettings};
use truth::{sidecar_path, Truth};

/// Exit status of a search that stopped before certification.
const EXIT_UNTERMINATED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "atlanta", version, about = "Globally optimal vertical direction estimation from surface normals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the vertical direction.
    Estimate(EstimateArgs),
    /// Estimate the vertical and the horizontal frames around it.
    Atlanta(AtlantaArgs),
    /// Write a synthetic instance and its ground truth.
    Synth(SynthArgs),
    /// Run a synthetic benchmark grid.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct SolveArgs {
    /// Inlier threshold in degrees; defaults to the sidecar's recommended value.
    #[arg(long)]
    tau_deg: Option<f64>,
    /// rot, exp, ste-circle, ste-square, scs or ransac.
    #[arg(long, default_value = "exp")]
    method: Method,
    /// RANSAC sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Branch expansion limit.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: u64,
    /// Outlier ratio assumed by RANSAC; defaults to the sidecar's value, else 0.5.
    #[arg(long)]
    rho: Option<f64>,
    /// Skip rotation cubes outside the angle-axis ball (rot only).
    #[arg(long)]
    cull_rotation_ball: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum, default_value = "json")]
    output: OutputFormat,
}

#[derive(Debug, Args)]
struct AtlantaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Smallest horizontal cluster reported; defaults to max(5, 1% of the horizontals).
    #[arg(long)]
    min_support: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Outlier ratio.
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
    /// Noise amplitude.
    #[arg(long, default_value_t = 0.01)]
    kappa: f64,
    /// atlanta, atlanta:<walls> or manhattan.
    #[arg(long, default_value = "atlanta")]
    world: World,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the ground truth goes to the same path with extension `.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    grid: Grid,
    /// Trials per cell.
    #[arg(long, default_value_t = 20)]
    trials: u32,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "exp,ste-circle,ste-square,scs,ransac")]
    methods: Vec<Method>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; trial t of cell c uses seed + c * 1000000 + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cells run concurrently; defaults to the number of CPUs.
    #[arg(long, env = "ATLANTA_WORKERS")]
    workers: Option<usize>,
    /// Normals per instance.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Branch expansion limit.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: u64,
    /// Skip rotation cubes outside the angle-axis ball (rot only).
    #[arg(long)]
    cull_rotation_ball: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation failures; help and version are not
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(&a),
        Command::Atlanta(a) => atlanta(&a),
        Command::Synth(a) => synth(&a).map(|()| true),
        Command::Bench(a) => bench(&a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNTERMINATED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// The problem, the sidecar if any, and the per-run settings.
fn prepare(input: &InputArgs, solve: &SolveArgs) -> anyhow::Result<(Problem, Option<Truth>, RunSettings)> {
    let normals = input::load_normals(input)?;
    let truth = Truth::find(&input.input)?;
    let tau = match (solve.tau_deg, &truth) {
        (Some(deg), _) => deg.to_radians(),
        (None, Some(t)) => t.recommended_tau,
        (None, None) => bail!(
            "--tau-deg is required when {} has no sidecar",
            input.input.display()
        ),
    };
    let p = Problem::new(&normals, tau)?;
    let ransac_rho = solve.rho.or(truth.as_ref().map(|t| t.outlier_ratio)).unwrap_or(0.5);
    let settings = RunSettings {
        max_iterations: solve.max_iter,
        cull_rotation_ball: solve.cull_rotation_ball,
        ransac_rho,
        seed: solve.seed,
    };
    if settings.max_iterations == 0 {
        bail!("--max-iter must be positive");
    }
    Ok((p, truth, settings))
}

fn print(text: &str) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn estimate(args: &EstimateArgs) -> anyhow::Result<bool> {
    let (p, truth, settings) = prepare(&args.input, &args.solve)?;
    let method = args.solve.method;
    let r = run_method(&p, method, &settings)?;
    let mut record = ResultRecord::new(method, &r);
    if let Some(t) = &truth {
        record.kappa = Some(t.noise_amplitude);
        record.rho = Some(t.outlier_ratio);
        record.score(&p, &r, &t.v_gt, t.rotation().as_ref());
    }
    let row = EstimateRow::new(record, &r.vertical);
    let text = match args.output {
        OutputFormat::Json => serde_json::to_string_pretty(&row)? + "\n",
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(&row)?;
            String::from_utf8(w.into_inner()?)?
        }
    };
    print(&text)?;
    Ok(completed(method, &r))
}

#[derive(Debug, Serialize)]
struct Horizontal {
    direction: UnitVec3,
    /// Azimuth in the horizontal basis of the vertical, in `[0, 180)`.
    azimuth_deg: f64,
    support: usize,
}

#[derive(Debug, Serialize)]
struct FramesReport {
    method: String,
    vertical: UnitVec3,
    vertical_inliers: usize,
    certified: bool,
    iterations: u64,
    gap: usize,
    runtime_ms: f64,
    horizontals: Vec<Horizontal>,
    error_deg: Option<f64>,
    error_m_deg: Option<f64>,
}

fn atlanta(args: &AtlantaArgs) -> anyhow::Result<bool> {
    let (p, truth, settings) = prepare(&args.input, &args.solve)?;
    let method = args.solve.method;
    let r = run_method(&p, method, &settings)?;
    let frames = atlanta_core::atlanta::frames_around(&p, &r, args.min_support);
    let (b1, b2) = horizontal_basis(&frames.vertical);
    let horizontals = frames
        .horizontals
        .iter()
        .zip(&frames.support)
        .map(|(h, &support)| Horizontal {
            direction: *h,
            azimuth_deg: h.dot(&b2).atan2(h.dot(&b1)).to_degrees().rem_euclid(180.0),
            support,
        })
        .collect();
    let report = FramesReport {
        method: method.name().to_string(),
        vertical: frames.vertical,
        vertical_inliers: frames.vertical_inliers,
        certified: frames.certified,
        iterations: frames.iterations,
        gap: r.gap,
        runtime_ms: r.elapsed * 1e3,
        horizontals,
        error_deg: truth.as_ref().map(|t| error_vertical(&t.v_gt, &frames.vertical)),
        error_m_deg: truth
            .as_ref()
            .and_then(Truth::rotation)
            .zip(manhattan_matrix(&frames))
            .map(|(gt, est)| error_manhattan(&gt, &est)),
    };
    print(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(completed(method, &r))
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig::new(args.n, args.rho, args.kappa, args.world, args.seed);
    let inst = generate(&cfg)?;
    let truth = Truth::new(&cfg, &inst);
    if truth.tau_floored {
        eprintln!(
            "note: arctan(kappa) is below {TAU_FLOOR_DEG} deg; recommended_tau uses the floor instead"
        );
    }
    let file = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_normals_csv(BufWriter::new(file), &inst.normals)?;
    truth.write(&sidecar_path(&args.out))
}

fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    if args.methods.is_empty() {
        bail!("--methods is empty");
    }
    if args.max_iter == 0 {
        bail!("--max-iter must be positive");
    }
    if args.methods.contains(&Method::Bnb(Strategy::Rot)) && !args.cull_rotation_ball {
        eprintln!("note: rot without --cull-rotation-ball is slow at the default instance size");
    }
    let plan = BenchPlan {
        grid: args.grid,
        trials: args.trials,
        methods: args.methods.clone(),
        n: args.n,
        seed: args.seed,
        max_iterations: args.max_iter,
        cull_rotation_ball: args.cull_rotation_ball,
        workers: args
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            bench::run(&plan, file)
        }
        None => bench::run(&plan, io::stdout().lock()),
    }
}
