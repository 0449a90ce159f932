//! Benchmark harness: runs baseline and pruned planner variants over a
//! dataset's test split, checks iteration counts stay identical across
//! timing repetitions, aggregates per scene family, and renders the results
//! as CSV, JSON, and an aligned text table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as StdPath, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{family_from_path, load_manifest, DatasetError, LabeledScene, Split};
use crate::encoder::{load_params_file, EncoderError, Net};
use crate::grid::path_cost;
use crate::planners::{run_planner, HeuristicKind, PlannerError, PlannerKind};
use crate::pruning::{corridor_oracle, postprocess_mask, run_pruned, PruneError, PrunedScene};
use crate::scenario::FamilyKind;

/// Default timing repetitions per scene; the median is reported because it
/// resists scheduler noise better than the mean.
pub const DEFAULT_REPETITIONS: usize = 5;

/// Fixed CSV column order for benchmark reports.
pub const CSV_HEADER: &str = "family,planner,pruner,mean_iters,mean_planner_s,mean_encoder_s,\
                              mean_preprocess_s,mean_total_s,cost_ratio,fallback_rate,\
                              iter_improvement_pct,time_improvement_pct";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("test split is empty; nothing to benchmark")]
    EmptyTestSplit,
    #[error("{planner} iteration count varied across repetitions on {scene}")]
    UnstableIterations { scene: PathBuf, planner: PlannerKind },
    #[error("{planner} found no path on {scene}; dataset scenes must be solvable")]
    NoPath { scene: PathBuf, planner: PlannerKind },
    #[error("cannot determine scene family from file name {0}")]
    UnknownFamily(PathBuf),
    #[error("improvement base must be positive, got {0}")]
    NonPositiveBase(f64),
    #[error("no unpruned baseline row for family {family}, planner {planner}")]
    MissingBaseline { family: String, planner: String },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("reading report {path}: {source}")]
    BadReport {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Which pruner (if any) the benchmark compares against the unpruned
/// baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum PrunerSelection {
    None,
    /// Learned scorer loaded from a weights file, with the mask
    /// postprocessing knobs.
    Encoder {
        weights: PathBuf,
        threshold: f32,
        dilation: usize,
    },
    /// Idealized corridor of the given Chebyshev radius around the label
    /// path.
    Corridor { radius: usize },
}

impl PrunerSelection {
    /// Short identifier used in report rows and file names.
    pub fn label(&self) -> String {
        match self {
            PrunerSelection::None => "none".to_string(),
            PrunerSelection::Encoder { .. } => "encoder".to_string(),
            PrunerSelection::Corridor { radius } => format!("corridor:{radius}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub manifest: PathBuf,
    pub planners: Vec<PlannerKind>,
    pub pruner: PrunerSelection,
    /// `None` picks the conventional heuristic for the dataset's
    /// connectivity.
    pub heuristic: Option<HeuristicKind>,
    /// Timing passes per scene; iteration counts must agree across passes.
    pub repetitions: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions < 1 {
            return Err(BenchError::InvalidConfig(
                "repetitions must be at least 1".to_string(),
            ));
        }
        if self.planners.is_empty() {
            return Err(BenchError::InvalidConfig(
                "select at least one planner".to_string(),
            ));
        }
        Ok(())
    }
}

/// One aggregated report row: a (family, planner, pruner) cell with its
/// means over the family's test scenes. Improvement percentages are present
/// only on pruned rows and compare against the matching unpruned row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub planner: String,
    pub pruner: String,
    pub scenes: usize,
    pub mean_iters: f64,
    pub mean_planner_s: f64,
    pub mean_encoder_s: f64,
    pub mean_preprocess_s: f64,
    pub mean_total_s: f64,
    /// Mean of (achieved path cost / label path cost); 1.0 means optimal
    /// everywhere.
    pub cost_ratio: f64,
    /// Fraction of scenes where the pruned search failed and the full map
    /// was re-searched.
    pub fallback_rate: f64,
    pub iter_improvement_pct: Option<f64>,
    pub time_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

/// Percentage saved by `treated` relative to `base`: (base − treated)/base
/// × 100. Negative when `treated` is worse.
pub fn improvement(base: f64, treated: f64) -> Result<f64, BenchError> {
    // `is_finite` + the positivity test together also reject NaN bases.
    if !base.is_finite() || base <= 0.0 {
        return Err(BenchError::NonPositiveBase(base));
    }
    Ok((base - treated) / base * 100.0)
}

/// Middle element (or mean of the middle two) of the values.
fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Per-scene, per-variant measurement: iteration count plus
/// median-over-repetitions timing components.
struct Measurement {
    iterations: u64,
    planner_s: f64,
    encoder_s: f64,
    preprocess_s: f64,
    cost: f64,
    fallback: bool,
}

fn measure_baseline(
    kind: PlannerKind,
    scene: &LabeledScene,
    h: HeuristicKind,
    reps: usize,
) -> Result<Measurement, BenchError> {
    let mut iterations = None;
    let mut times = Vec::with_capacity(reps);
    let mut cost = 0.0;
    for _ in 0..reps {
        let result = run_planner(kind, &scene.map, h)?;
        match iterations {
            None => iterations = Some(result.iterations),
            Some(prev) if prev != result.iterations => {
                return Err(BenchError::UnstableIterations {
                    scene: scene.path.clone(),
                    planner: kind,
                });
            }
            Some(_) => {}
        }
        times.push(result.planner_seconds);
        let path = result.path.as_ref().ok_or_else(|| BenchError::NoPath {
            scene: scene.path.clone(),
            planner: kind,
        })?;
        cost = path_cost(path).expect("planner paths are valid");
    }
    let planner_s = median(times);
    Ok(Measurement {
        iterations: iterations.unwrap(),
        planner_s,
        encoder_s: 0.0,
        preprocess_s: 0.0,
        cost,
        fallback: false,
    })
}

/// Builds the pruned scene for one pass, returning it with the measured
/// (encoder, preprocess) seconds.
fn build_pruned(
    scene: &LabeledScene,
    pruner: &PrunerSelection,
    encoder: Option<&Net<f32>>,
) -> Result<(PrunedScene, f64, f64), BenchError> {
    match pruner {
        PrunerSelection::None => unreachable!("baseline variant measured separately"),
        PrunerSelection::Encoder {
            threshold,
            dilation,
            ..
        } => {
            let net = encoder.expect("weights loaded when encoder pruner selected");
            let start = Instant::now();
            let mask = net.mask(&scene.map)?;
            let encoder_s = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let pruned = postprocess_mask(&mask, &scene.map, *threshold, *dilation)?;
            Ok((pruned, encoder_s, start.elapsed().as_secs_f64()))
        }
        PrunerSelection::Corridor { radius } => {
            let start = Instant::now();
            let pruned = corridor_oracle(&scene.map, &scene.label, *radius)?;
            Ok((pruned, 0.0, start.elapsed().as_secs_f64()))
        }
    }
}

fn measure_pruned(
    kind: PlannerKind,
    scene: &LabeledScene,
    h: HeuristicKind,
    pruner: &PrunerSelection,
    encoder: Option<&Net<f32>>,
    reps: usize,
) -> Result<Measurement, BenchError> {
    let mut iterations = None;
    let mut planner_times = Vec::with_capacity(reps);
    let mut encoder_times = Vec::with_capacity(reps);
    let mut preprocess_times = Vec::with_capacity(reps);
    let mut cost = 0.0;
    let mut fallback = false;
    for _ in 0..reps {
        let (pruned, encoder_s, preprocess_s) = build_pruned(scene, pruner, encoder)?;
        let run = run_pruned(kind, h, &pruned, encoder_s, preprocess_s)?;
        match iterations {
            None => iterations = Some(run.result.iterations),
            Some(prev) if prev != run.result.iterations => {
                return Err(BenchError::UnstableIterations {
                    scene: scene.path.clone(),
                    planner: kind,
                });
            }
            Some(_) => {}
        }
        planner_times.push(run.result.planner_seconds);
        encoder_times.push(run.encoder_seconds);
        preprocess_times.push(run.preprocess_seconds);
        fallback = run.used_fallback;
        let path = run.result.path.as_ref().ok_or_else(|| BenchError::NoPath {
            scene: scene.path.clone(),
            planner: kind,
        })?;
        cost = path_cost(path).expect("planner paths are valid");
    }
    Ok(Measurement {
        iterations: iterations.unwrap(),
        planner_s: median(planner_times),
        encoder_s: median(encoder_times),
        preprocess_s: median(preprocess_times),
        cost,
        fallback,
    })
}

#[derive(Default)]
struct Accumulator {
    scenes: usize,
    iters: f64,
    planner_s: f64,
    encoder_s: f64,
    preprocess_s: f64,
    total_s: f64,
    ratio: f64,
    fallbacks: usize,
}

impl Accumulator {
    fn add(&mut self, m: &Measurement, label_cost: f64) {
        self.scenes += 1;
        self.iters += m.iterations as f64;
        self.planner_s += m.planner_s;
        self.encoder_s += m.encoder_s;
        self.preprocess_s += m.preprocess_s;
        self.total_s += m.encoder_s + m.preprocess_s + m.planner_s;
        self.ratio += m.cost / label_cost;
        self.fallbacks += m.fallback as usize;
    }

    fn row(&self, family: &str, planner: &str, pruner: &str) -> ReportRow {
        let n = self.scenes as f64;
        ReportRow {
            family: family.to_string(),
            planner: planner.to_string(),
            pruner: pruner.to_string(),
            scenes: self.scenes,
            mean_iters: self.iters / n,
            mean_planner_s: self.planner_s / n,
            mean_encoder_s: self.encoder_s / n,
            mean_preprocess_s: self.preprocess_s / n,
            mean_total_s: self.total_s / n,
            cost_ratio: self.ratio / n,
            fallback_rate: self.fallbacks as f64 / n,
            iter_improvement_pct: None,
            time_improvement_pct: None,
        }
    }
}

/// Fills in the improvement columns on every pruned row from the matching
/// unpruned row's means within the same report.
pub fn attach_improvements(rows: &mut [ReportRow]) -> Result<(), BenchError> {
    let baselines: Vec<(String, String, f64, f64)> = rows
        .iter()
        .filter(|r| r.pruner == "none")
        .map(|r| {
            (
                r.family.clone(),
                r.planner.clone(),
                r.mean_iters,
                r.mean_total_s,
            )
        })
        .collect();
    for row in rows.iter_mut().filter(|r| r.pruner != "none") {
        let (_, _, base_iters, base_total) = baselines
            .iter()
            .find(|(f, p, _, _)| *f == row.family && *p == row.planner)
            .ok_or_else(|| BenchError::MissingBaseline {
                family: row.family.clone(),
                planner: row.planner.clone(),
            })?;
        row.iter_improvement_pct = Some(improvement(*base_iters, row.mean_iters)?);
        row.time_improvement_pct = Some(improvement(*base_total, row.mean_total_s)?);
    }
    Ok(())
}

/// Runs every selected planner over the test split, unpruned and (when a
/// pruner is selected) pruned, and aggregates per family. Deterministic
/// apart from the wall-clock columns.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let manifest = load_manifest(&cfg.manifest)?;
    let scenes = manifest.load_split(Split::Test)?;
    if scenes.is_empty() {
        return Err(BenchError::EmptyTestSplit);
    }
    let encoder = match &cfg.pruner {
        PrunerSelection::Encoder { weights, .. } => Some(load_params_file(weights)?.1),
        _ => None,
    };
    let pruner_label = cfg.pruner.label();

    // Key: (family rank, planner rank, 0 = unpruned / 1 = pruned).
    let mut cells: std::collections::BTreeMap<(usize, usize, u8), Accumulator> =
        std::collections::BTreeMap::new();
    let mut family_names: Vec<&'static str> = Vec::new();
    for scene in &scenes {
        let family = family_from_path(&scene.path)
            .ok_or_else(|| BenchError::UnknownFamily(scene.path.clone()))?;
        let family_rank = FamilyKind::ALL
            .iter()
            .position(|k| *k == family)
            .expect("every family kind is enumerated");
        family_names.resize(family_names.len().max(FamilyKind::ALL.len()), "");
        family_names[family_rank] = family.name();
        let h = cfg
            .heuristic
            .unwrap_or_else(|| HeuristicKind::default_for(scene.map.connectivity()));
        let label_cost = path_cost(&scene.label).expect("dataset labels are valid");
        for (planner_rank, &kind) in cfg.planners.iter().enumerate() {
            let base = measure_baseline(kind, scene, h, cfg.repetitions)?;
            cells
                .entry((family_rank, planner_rank, 0))
                .or_default()
                .add(&base, label_cost);
            if cfg.pruner != PrunerSelection::None {
                let treated =
                    measure_pruned(kind, scene, h, &cfg.pruner, encoder.as_ref(), cfg.repetitions)?;
                cells
                    .entry((family_rank, planner_rank, 1))
                    .or_default()
                    .add(&treated, label_cost);
            }
        }
    }

    let mut rows: Vec<ReportRow> = cells
        .iter()
        .map(|(&(family_rank, planner_rank, variant), acc)| {
            let pruner = if variant == 0 { "none" } else { &pruner_label };
            acc.row(
                family_names[family_rank],
                cfg.planners[planner_rank].name(),
                pruner,
            )
        })
        .collect();
    attach_improvements(&mut rows)?;
    Ok(BenchReport {
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        rows,
    })
}

fn fmt_opt_pct(v: Option<f64>) -> String {
    v.map(|p| format!("{p:.2}")).unwrap_or_default()
}

/// Renders the report as CSV in the fixed column order. Seconds carry nine
/// decimals so improvements recomputed from the printed means stay within
/// 0.01 of the printed improvement columns.
pub fn render_csv(report: &BenchReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{:.2},{:.9},{:.9},{:.9},{:.9},{:.6},{:.4},{},{}",
            row.family,
            row.planner,
            row.pruner,
            row.mean_iters,
            row.mean_planner_s,
            row.mean_encoder_s,
            row.mean_preprocess_s,
            row.mean_total_s,
            row.cost_ratio,
            row.fallback_rate,
            fmt_opt_pct(row.iter_improvement_pct),
            fmt_opt_pct(row.time_improvement_pct),
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Per-planner grand means (scene-count weighted across families) for one
/// pruner label.
struct PlannerSummary {
    planner: String,
    iters: f64,
    total_s: f64,
}

fn summarize(rows: &[ReportRow], pruner: &str) -> Vec<PlannerSummary> {
    let mut order: Vec<&str> = Vec::new();
    for row in rows {
        if row.pruner == pruner && !order.contains(&row.planner.as_str()) {
            order.push(&row.planner);
        }
    }
    order
        .into_iter()
        .map(|planner| {
            let mut scenes = 0usize;
            let mut iters = 0.0;
            let mut total_s = 0.0;
            for row in rows.iter().filter(|r| r.planner == planner && r.pruner == pruner) {
                scenes += row.scenes;
                iters += row.mean_iters * row.scenes as f64;
                total_s += row.mean_total_s * row.scenes as f64;
            }
            PlannerSummary {
                planner: planner.to_string(),
                iters: iters / scenes as f64,
                total_s: total_s / scenes as f64,
            }
        })
        .collect()
}

/// Renders the per-planner grand-average comparison as an aligned text
/// table: iterations and pipeline time, without and (when present) with
/// pruning, plus the improvement each pruned column represents.
pub fn render_table(report: &BenchReport) -> String {
    let base = summarize(&report.rows, "none");
    let pruner_label = report
        .rows
        .iter()
        .find(|r| r.pruner != "none")
        .map(|r| r.pruner.clone());
    let mut out = String::new();
    match &pruner_label {
        Some(label) => {
            let treated = summarize(&report.rows, label);
            writeln!(
                out,
                "{:<14}{:>14}{:>14}{:>9}{:>15}{:>15}{:>9}",
                "planner", "iterations", "pruned", "impr %", "time (s)", "pruned (s)", "impr %"
            )
            .unwrap();
            for b in &base {
                let t = treated
                    .iter()
                    .find(|t| t.planner == b.planner)
                    .expect("pruned summary exists for every planner");
                let iter_impr = (b.iters - t.iters) / b.iters * 100.0;
                let time_impr = (b.total_s - t.total_s) / b.total_s * 100.0;
                writeln!(
                    out,
                    "{:<14}{:>14.2}{:>14.2}{:>9.2}{:>15.9}{:>15.9}{:>9.2}",
                    b.planner, b.iters, t.iters, iter_impr, b.total_s, t.total_s, time_impr
                )
                .unwrap();
            }
            writeln!(out).unwrap();
            writeln!(
                out,
                "pruner: {label}; times are medians of {} repetition(s) per scene",
                report.repetitions
            )
            .unwrap();
        }
        None => {
            writeln!(out, "{:<14}{:>14}{:>15}", "planner", "iterations", "time (s)").unwrap();
            for b in &base {
                writeln!(
                    out,
                    "{:<14}{:>14.2}{:>15.9}",
                    b.planner, b.iters, b.total_s
                )
                .unwrap();
            }
            writeln!(out).unwrap();
            writeln!(
                out,
                "no pruner; times are medians of {} repetition(s) per scene",
                report.repetitions
            )
            .unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Table];

    fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Table => "report.txt",
        }
    }

    fn render(self, report: &BenchReport) -> String {
        match self {
            ReportFormat::Json => {
                let mut text =
                    serde_json::to_string_pretty(report).expect("report serializes cleanly");
                text.push('\n');
                text
            }
            ReportFormat::Csv => render_csv(report),
            ReportFormat::Table => render_table(report),
        }
    }
}

/// Writes the requested renderings under `out_dir`, returning the paths
/// written.
pub fn emit_report(
    report: &BenchReport,
    out_dir: &StdPath,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(out_dir).map_err(|source| BenchError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(formats.len());
    for &format in formats {
        let path = out_dir.join(format.file_name());
        fs::write(&path, format.render(report)).map_err(|source| BenchError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a JSON report back, e.g. to re-render tables without re-running
/// the benchmark.
pub fn load_report(path: &StdPath) -> Result<BenchReport, BenchError> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| BenchError::BadReport {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, DatasetConfig, FamilySpec};
    use crate::encoder::{save_params_file, EncoderConfig};
    use crate::grid::Connectivity;
    use crate::scenario::SceneFamily;

    #[test]
    fn improvement_matches_published_arithmetic() {
        assert!((improvement(910.95, 301.42).unwrap() - 66.91).abs() < 0.01);
        assert!((improvement(2284.51, 413.82).unwrap() - 81.89).abs() < 0.01);
        assert_eq!(improvement(5.0, 5.0).unwrap(), 0.0);
        // A slower treated run yields a negative improvement.
        assert!((improvement(0.003, 0.0045162).unwrap() - -50.54).abs() < 0.01);
        assert!(matches!(
            improvement(0.0, 1.0),
            Err(BenchError::NonPositiveBase(_))
        ));
        assert!(matches!(
            improvement(-2.0, 1.0),
            Err(BenchError::NonPositiveBase(_))
        ));
        assert!(matches!(
            improvement(f64::NAN, 1.0),
            Err(BenchError::NonPositiveBase(_))
        ));
    }

    #[test]
    fn median_picks_middle_values() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(vec![7.0]), 7.0);
    }

    fn bench_config(manifest: PathBuf, pruner: PrunerSelection) -> BenchConfig {
        BenchConfig {
            manifest,
            planners: vec![PlannerKind::Dijkstra, PlannerKind::AStar],
            pruner,
            heuristic: None,
            repetitions: 2,
            out_dir: PathBuf::new(),
            seed: 0,
        }
    }

    #[test]
    fn config_validation_rejects_degenerate_settings() {
        let mut cfg = bench_config(PathBuf::new(), PrunerSelection::None);
        cfg.repetitions = 0;
        assert!(matches!(
            cfg.validate(),
            Err(BenchError::InvalidConfig(_))
        ));
        let mut cfg = bench_config(PathBuf::new(), PrunerSelection::None);
        cfg.planners.clear();
        assert!(matches!(
            cfg.validate(),
            Err(BenchError::InvalidConfig(_))
        ));
    }

    /// Builds a small two-family dataset and returns its manifest path.
    fn small_dataset(dir: &StdPath, connectivity: Connectivity) -> PathBuf {
        let config = DatasetConfig {
            seed: 7,
            size: (12, 12),
            connectivity,
            fractions: (0.5, 0.2, 0.3),
            families: vec![
                FamilySpec {
                    family: SceneFamily::new(FamilyKind::Scatter, 0.2).unwrap(),
                    count: 10,
                },
                FamilySpec {
                    family: SceneFamily::new(FamilyKind::Bars, 0.2).unwrap(),
                    count: 10,
                },
            ],
        };
        build_dataset(&config, dir).unwrap();
        dir.join("manifest.json")
    }

    #[test]
    fn baseline_only_report_has_one_row_per_family_and_planner() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Four);
        let cfg = bench_config(manifest, PrunerSelection::None);
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * 2); // 2 families × 2 planners
        for row in &report.rows {
            assert_eq!(row.pruner, "none");
            assert!(row.iter_improvement_pct.is_none());
            assert!(row.time_improvement_pct.is_none());
            assert_eq!(row.cost_ratio, 1.0); // both planners are optimal
            assert_eq!(row.fallback_rate, 0.0);
            assert_eq!(row.mean_encoder_s, 0.0);
            assert_eq!(row.mean_preprocess_s, 0.0);
            assert!(row.scenes > 0);
        }
        // Scatter ranks before Bars in enumeration order.
        assert_eq!(report.rows[0].family, "scatter");
        assert_eq!(report.rows[0].planner, "dijkstra");
        assert_eq!(report.rows[1].family, "scatter");
        assert_eq!(report.rows[1].planner, "astar");
    }

    #[test]
    fn corridor_benchmark_reports_improvements_and_exact_costs() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Eight);
        let cfg = bench_config(manifest, PrunerSelection::Corridor { radius: 2 });
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        for row in &report.rows {
            if row.pruner == "none" {
                assert!(row.iter_improvement_pct.is_none());
            } else {
                assert_eq!(row.pruner, "corridor:2");
                assert_eq!(row.cost_ratio, 1.0);
                assert_eq!(row.fallback_rate, 0.0);
                let impr = row.iter_improvement_pct.unwrap();
                assert!(impr.is_finite());
                assert!(row.time_improvement_pct.unwrap().is_finite());
                // Recompute from the matching baseline means.
                let base = report
                    .rows
                    .iter()
                    .find(|r| {
                        r.pruner == "none" && r.family == row.family && r.planner == row.planner
                    })
                    .unwrap();
                let expected = (base.mean_iters - row.mean_iters) / base.mean_iters * 100.0;
                assert!((impr - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn iteration_columns_are_identical_across_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Four);
        let cfg = bench_config(manifest, PrunerSelection::Corridor { radius: 1 });
        let first = run_benchmark(&cfg).unwrap();
        let second = run_benchmark(&cfg).unwrap();
        for (a, b) in first.rows.iter().zip(&second.rows) {
            assert_eq!(a.mean_iters.to_bits(), b.mean_iters.to_bits());
            assert_eq!(a.cost_ratio.to_bits(), b.cost_ratio.to_bits());
            assert_eq!(a.fallback_rate, b.fallback_rate);
            assert_eq!(
                a.iter_improvement_pct.map(f64::to_bits),
                b.iter_improvement_pct.map(f64::to_bits)
            );
        }
    }

    #[test]
    fn breadth_first_on_diagonal_scenes_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Eight);
        let mut cfg = bench_config(manifest, PrunerSelection::None);
        cfg.planners = vec![PlannerKind::BreadthFirst];
        assert!(matches!(
            run_benchmark(&cfg),
            Err(BenchError::Planner(PlannerError::UniformCostRequired))
        ));
    }

    #[test]
    fn encoder_pruner_runs_end_to_end_with_sound_fallbacks() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Four);
        // An untrained scorer: masks are arbitrary, so some scenes sever and
        // must fall back; results must still be optimal for Dijkstra.
        let net = Net::<f32>::init(EncoderConfig::new(12, 12, 8).unwrap(), 3);
        let weights = dir.path().join("weights.bin");
        save_params_file(&net, &weights).unwrap();
        let mut cfg = bench_config(
            manifest,
            PrunerSelection::Encoder {
                weights,
                threshold: 0.0,
                dilation: 1,
            },
        );
        cfg.planners = vec![PlannerKind::Dijkstra];
        let report = run_benchmark(&cfg).unwrap();
        let treated: Vec<_> = report.rows.iter().filter(|r| r.pruner == "encoder").collect();
        assert!(!treated.is_empty());
        for row in treated {
            assert!((0.0..=1.0).contains(&row.fallback_rate));
            assert_eq!(row.cost_ratio, 1.0); // fallback keeps Dijkstra optimal
            assert!(row.iter_improvement_pct.is_some());
            assert!(row.mean_encoder_s > 0.0);
        }
    }

    #[test]
    fn csv_has_fixed_header_and_blank_improvements_for_baselines() {
        let report = BenchReport {
            repetitions: 5,
            seed: 0,
            rows: vec![
                ReportRow {
                    family: "scatter".to_string(),
                    planner: "dijkstra".to_string(),
                    pruner: "none".to_string(),
                    scenes: 4,
                    mean_iters: 1800.25,
                    mean_planner_s: 0.00125,
                    mean_encoder_s: 0.0,
                    mean_preprocess_s: 0.0,
                    mean_total_s: 0.00125,
                    cost_ratio: 1.0,
                    fallback_rate: 0.0,
                    iter_improvement_pct: None,
                    time_improvement_pct: None,
                },
                ReportRow {
                    family: "scatter".to_string(),
                    planner: "dijkstra".to_string(),
                    pruner: "corridor:2".to_string(),
                    scenes: 4,
                    mean_iters: 300.5,
                    mean_planner_s: 0.00025,
                    mean_encoder_s: 0.0,
                    mean_preprocess_s: 0.00005,
                    mean_total_s: 0.0003,
                    cost_ratio: 1.0,
                    fallback_rate: 0.0,
                    iter_improvement_pct: Some(83.31487),
                    time_improvement_pct: Some(76.0),
                },
            ],
        };
        let csv = render_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let baseline = lines.next().unwrap();
        assert!(baseline.ends_with(",,"));
        assert!(baseline.starts_with("scatter,dijkstra,none,1800.25,0.001250000,"));
        let treated = lines.next().unwrap();
        assert!(treated.ends_with(",83.31,76.00"));
        assert!(lines.next().is_none());
        // Improvements recomputed from the printed means agree to 0.01.
        let fields: Vec<&str> = treated.split(',').collect();
        let mean_iters: f64 = fields[3].parse().unwrap();
        let base_fields: Vec<&str> = baseline.split(',').collect();
        let base_iters: f64 = base_fields[3].parse().unwrap();
        let recomputed = (base_iters - mean_iters) / base_iters * 100.0;
        let printed: f64 = fields[10].parse().unwrap();
        assert!((recomputed - printed).abs() <= 0.01);
    }

    #[test]
    fn report_json_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_dataset(dir.path(), Connectivity::Four);
        let cfg = bench_config(manifest, PrunerSelection::Corridor { radius: 1 });
        let report = run_benchmark(&cfg).unwrap();
        let out = dir.path().join("out");
        let written = emit_report(&report, &out, &ReportFormat::ALL).unwrap();
        assert_eq!(written.len(), 3);
        let loaded = load_report(&out.join("report.json")).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn missing_baseline_rows_are_reported() {
        let mut rows = vec![ReportRow {
            family: "scatter".to_string(),
            planner: "astar".to_string(),
            pruner: "corridor:1".to_string(),
            scenes: 1,
            mean_iters: 10.0,
            mean_planner_s: 0.1,
            mean_encoder_s: 0.0,
            mean_preprocess_s: 0.0,
            mean_total_s: 0.1,
            cost_ratio: 1.0,
            fallback_rate: 0.0,
            iter_improvement_pct: None,
            time_improvement_pct: None,
        }];
        assert!(matches!(
            attach_improvements(&mut rows),
            Err(BenchError::MissingBaseline { .. })
        ));
    }
}
