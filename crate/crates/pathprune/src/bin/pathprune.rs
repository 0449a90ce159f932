//! `pathprune` command line: dataset generation, encoder training, gradient
//! checking, and baseline-vs-pruned planner benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence
//! or benchmark failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pathprune::bench::{
    emit_report, load_report, render_table, run_benchmark, BenchConfig, BenchError,
    PrunerSelection, ReportFormat, DEFAULT_REPETITIONS,
};
use pathprune::dataset::{build_dataset, load_manifest, DatasetConfig, DatasetError, FamilySpec};
use pathprune::encoder::{
    grad_check, history_csv, prepare_samples, save_params_file, train_with, EncoderConfig,
    EncoderError, Sample, TrainConfig,
};
use pathprune::grid::Connectivity;
use pathprune::planners::{HeuristicKind, PlannerKind};
use pathprune::pruning::{DEFAULT_DILATION, DEFAULT_THRESHOLD};
use pathprune::scenario::{generate_scene, label_scene, FamilyKind, SceneFamily, ScenarioError};

#[derive(Parser)]
#[command(
    name = "pathprune",
    version,
    about = "Grid path-planning benchmarks with learned search-space pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene dataset with shortest-path labels and split manifest.
    Gen(GenArgs),
    /// Train the pruning encoder on a dataset's train split.
    Train(TrainArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Benchmark planners on a dataset's test split, optionally pruned.
    Bench(BenchArgs),
    /// Re-render a saved benchmark report as CSV and a text table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for scenes/ and manifest.json.
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene dimensions as HxW, e.g. 24x24.
    #[arg(long, default_value = "24x24", value_parser = parse_size)]
    size: (usize, usize),
    /// Comma-separated families, each optionally with a density suffix,
    /// e.g. scatter:0.25,bars,maze.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "scatter,bars,rooms,blobs,maze",
        value_parser = parse_family
    )]
    families: Vec<SceneFamily>,
    /// Scenes to generate per family.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Grid connectivity: 4 (axial) or 8 (adds diagonals).
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(4..=8))]
    connectivity: u8,
}

#[derive(Args)]
struct TrainArgs {
    /// Path to the dataset manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for weights.bin and history.csv.
    #[arg(long, default_value = "encoder")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Dropout keep probability; 1.0 disables dropout.
    #[arg(long, default_value_t = 0.7)]
    keep: f64,
    /// Width divisor shrinking every layer, e.g. 4 for desk scale.
    #[arg(long, default_value_t = 4)]
    divisor: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter coordinates to probe (spread across all tensors).
    #[arg(long, default_value_t = 320)]
    coords: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Path to the dataset manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for report.json/report.csv/report.txt.
    #[arg(long, default_value = "bench")]
    out: PathBuf,
    /// Comma-separated planners to benchmark.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "dijkstra,astar,bi_astar,best_first"
    )]
    planners: Vec<PlannerKind>,
    /// none, encoder:<weights file>, or corridor:<radius>.
    #[arg(long, default_value = "none", value_parser = parse_pruner)]
    pruner: RawPruner,
    /// Keep threshold applied to encoder mask scores.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f32,
    /// Chebyshev dilation radius applied to encoder masks.
    #[arg(long, default_value_t = DEFAULT_DILATION)]
    dilation: usize,
    /// Timing repetitions per scene (median reported).
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    reps: usize,
    /// Heuristic override; defaults to the conventional one per connectivity.
    #[arg(long)]
    heuristic: Option<HeuristicKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json produced by `bench`.
    report: PathBuf,
    /// Output directory for the re-rendered report.csv and report.txt.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |part: &str| {
        part.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad dimension {part:?}: {e}"))
    };
    Ok((parse(h)?, parse(w)?))
}

const DEFAULT_DENSITY: f64 = 0.25;

fn parse_family(s: &str) -> Result<SceneFamily, String> {
    let (name, density) = match s.split_once(':') {
        Some((name, density)) => (
            name,
            density
                .parse::<f64>()
                .map_err(|e| format!("bad density {density:?}: {e}"))?,
        ),
        None => (s, DEFAULT_DENSITY),
    };
    let kind: FamilyKind = name.parse().map_err(|e| format!("{e}"))?;
    SceneFamily::new(kind, density).map_err(|e| e.to_string())
}

/// Pruner flag before the --threshold/--dilation knobs are folded in.
#[derive(Debug, Clone)]
enum RawPruner {
    None,
    Encoder(PathBuf),
    Corridor(usize),
}

fn parse_pruner(s: &str) -> Result<RawPruner, String> {
    if s == "none" {
        return Ok(RawPruner::None);
    }
    if let Some(path) = s.strip_prefix("encoder:") {
        if path.is_empty() {
            return Err("encoder: needs a weights file path".to_string());
        }
        return Ok(RawPruner::Encoder(PathBuf::from(path)));
    }
    if let Some(radius) = s.strip_prefix("corridor:") {
        return radius
            .parse::<usize>()
            .map(RawPruner::Corridor)
            .map_err(|e| format!("bad corridor radius {radius:?}: {e}"));
    }
    Err(format!(
        "expected none, encoder:<weights>, or corridor:<radius>, got {s:?}"
    ))
}

/// An error plus the exit code it maps to.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(err: DatasetError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(err: ScenarioError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<EncoderError> for CliError {
    fn from(err: EncoderError) -> Self {
        match err {
            EncoderError::Divergence { .. } => CliError::failure(err.to_string()),
            EncoderError::InvalidConfig(_) => CliError::usage(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        match err {
            BenchError::InvalidConfig(_) => CliError::usage(err.to_string()),
            BenchError::UnstableIterations { .. }
            | BenchError::NonPositiveBase(_)
            | BenchError::MissingBaseline { .. } => CliError::failure(err.to_string()),
            BenchError::Encoder(EncoderError::Divergence { .. }) => {
                CliError::failure(err.to_string())
            }
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Keep clap's rendering (including --help/--version, which are
            // not errors) but pin the usage exit code to 1.
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let connectivity = Connectivity::try_from(args.connectivity)
        .map_err(|_| CliError::usage("connectivity must be 4 or 8"))?;
    let config = DatasetConfig {
        seed: args.seed,
        size: args.size,
        connectivity,
        fractions: (0.8, 0.1, 0.1),
        families: args
            .families
            .into_iter()
            .map(|family| FamilySpec {
                family,
                count: args.count,
            })
            .collect(),
    };
    let manifest = build_dataset(&config, &args.out)?;
    println!(
        "wrote {} scenes ({} train / {} val / {} test) under {}",
        manifest.splits.train.len() + manifest.splits.val.len() + manifest.splits.test.len(),
        manifest.splits.train.len(),
        manifest.splits.val.len(),
        manifest.splits.test.len(),
        args.out.display()
    );
    println!("manifest: {}", args.out.join("manifest.json").display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let (height, width) = manifest.size;
    let encoder = EncoderConfig::new(height, width, args.divisor)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        seed: args.seed,
        keep_probability: args.keep,
        ..TrainConfig::default()
    };
    let trained = train_with(&manifest, &cfg, &encoder, |stats| {
        println!(
            "epoch {:>3}/{}: train loss {:.6}  val loss {:.6}  val recall {:.4}",
            stats.epoch, args.epochs, stats.train_loss, stats.val_loss, stats.val_recall
        );
    })?;
    fs::create_dir_all(&args.out)?;
    let weights = args.out.join("weights.bin");
    save_params_file(&trained.net, &weights)?;
    fs::write(args.out.join("history.csv"), history_csv(&trained.history))?;
    println!("weights: {}", weights.display());
    println!("history: {}", args.out.join("history.csv").display());
    Ok(())
}

/// Pass/fail gate for the gradient check, matching the acceptance tolerance.
const GRADCHECK_TOLERANCE: f64 = 1e-4;
const GRADCHECK_MIN_COORDS: usize = 200;

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let cfg = EncoderConfig::reduced();
    let samples = gradcheck_samples(&cfg, args.seed)?;
    let mut ok = true;
    for (label, with_dropout) in [("plain", false), ("frozen dropout masks", true)] {
        let report = grad_check(&cfg, &samples, with_dropout, args.seed, args.coords);
        let passed =
            report.max_rel_err < GRADCHECK_TOLERANCE && report.coords_checked >= GRADCHECK_MIN_COORDS;
        ok &= passed;
        println!(
            "{}: max rel err {:.3e} over {} coordinates ({} skipped at kinks), worst {} -> {}",
            label,
            report.max_rel_err,
            report.coords_checked,
            report.coords_skipped,
            report.worst_tensor,
            if passed { "ok" } else { "FAIL" }
        );
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "analytic gradients disagree with finite differences beyond {GRADCHECK_TOLERANCE:e}"
        )))
    }
}

/// Builds a batch of labeled scenes at the reduced scale for finite
/// differencing; a handful of samples keeps the batch statistics
/// well-conditioned.
fn gradcheck_samples(cfg: &EncoderConfig, seed: u64) -> Result<Vec<Sample<f64>>, CliError> {
    let family =
        SceneFamily::new(FamilyKind::Scatter, DEFAULT_DENSITY).expect("default density is valid");
    let scenes: Result<Vec<_>, ScenarioError> = (0..8)
        .map(|i| {
            let map = generate_scene(
                &family,
                (cfg.height(), cfg.width()),
                Connectivity::Eight,
                seed.wrapping_add(i),
            )?;
            let label = label_scene(&map)?;
            Ok(pathprune::dataset::LabeledScene {
                path: PathBuf::new(),
                map,
                label,
            })
        })
        .collect();
    Ok(prepare_samples(&scenes?, cfg)?)
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let pruner = match args.pruner {
        RawPruner::None => PrunerSelection::None,
        RawPruner::Encoder(weights) => PrunerSelection::Encoder {
            weights,
            threshold: args.threshold,
            dilation: args.dilation,
        },
        RawPruner::Corridor(radius) => PrunerSelection::Corridor { radius },
    };
    let cfg = BenchConfig {
        manifest: args.manifest,
        planners: args.planners,
        pruner,
        heuristic: args.heuristic,
        repetitions: args.reps,
        out_dir: args.out.clone(),
        seed: args.seed,
    };
    let report = run_benchmark(&cfg)?;
    let written = emit_report(&report, &args.out, &ReportFormat::ALL)?;
    print!("{}", render_table(&report));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let report = load_report(&args.report)?;
    let written = emit_report(
        &report,
        &args.out,
        &[ReportFormat::Csv, ReportFormat::Table],
    )?;
    print!("{}", render_table(&report));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
