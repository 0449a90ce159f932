//! Search-space pruning: turns per-cell score masks (learned or oracle
//! corridors) into keep/discard sets composed with the true obstacles, and
//! runs planners over the reduced map with a soundness fallback to the full
//! map when the pruned space severs every route.

use ndarray::Array2;
use thiserror::Error;

use crate::grid::{Cell, GridMap, Path, PathViolation, PlanResult};
use crate::planners::{run_planner, HeuristicKind, PlannerError, PlannerKind};

/// Score threshold above which a cell is kept; midpoint of the scorer's
/// [-1, 1] output range.
pub const DEFAULT_THRESHOLD: f32 = 0.0;
/// Default Chebyshev dilation radius; bridges one-cell gaps in predicted
/// routes.
pub const DEFAULT_DILATION: usize = 1;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("mask is {got_height}x{got_width} but the scene is {want_height}x{want_width}")]
    SizeMismatch {
        got_height: usize,
        got_width: usize,
        want_height: usize,
        want_width: usize,
    },
    #[error("corridor label invalid for this scene: {0}")]
    InvalidLabel(#[from] PathViolation),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// How a pruned scene's keep set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneSource {
    /// Thresholded and dilated output of the learned scorer.
    Encoder,
    /// Chebyshev corridor around a known shortest path.
    CorridorOracle,
}

/// A scene plus a per-cell keep/discard decision. Blocked cells are always
/// discarded and the endpoints always kept, whatever the mask said.
#[derive(Debug, Clone)]
pub struct PrunedScene {
    base: GridMap,
    kept: Vec<bool>,
    source: PruneSource,
}

impl PrunedScene {
    /// Applies the non-negotiable rules to a raw keep set: obstacles are
    /// discarded, the endpoints kept.
    fn finalize(base: GridMap, mut kept: Vec<bool>, source: PruneSource) -> Self {
        for (i, &cell) in base.cells().iter().enumerate() {
            if cell == Cell::Blocked {
                kept[i] = false;
            }
        }
        kept[base.index(base.start())] = true;
        kept[base.index(base.goal())] = true;
        PrunedScene { base, kept, source }
    }

    pub fn base(&self) -> &GridMap {
        &self.base
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn source(&self) -> PruneSource {
        self.source
    }

    /// Whether the keep set discards nothing (every free cell survives).
    pub fn is_noop(&self) -> bool {
        self.base
            .cells()
            .iter()
            .zip(&self.kept)
            .all(|(&cell, &kept)| kept == (cell == Cell::Free))
    }

    /// The search space actually given to planners: the base map with every
    /// discarded cell turned into an obstacle.
    pub fn restricted_map(&self) -> GridMap {
        let discarded = self
            .kept
            .iter()
            .enumerate()
            .filter(|&(i, &kept)| !kept && self.base.cells()[i] == Cell::Free)
            .map(|(i, _)| self.base.coord(i));
        self.base
            .with_blocked(discarded)
            .expect("discarded cells are in bounds and never the endpoints")
    }
}

/// Marks every cell within Chebyshev distance `radius` of a marked cell.
fn dilate(kept: &[bool], height: usize, width: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return kept.to_vec();
    }
    let mut out = vec![false; kept.len()];
    for r in 0..height {
        for c in 0..width {
            if !kept[r * width + c] {
                continue;
            }
            let r_lo = r.saturating_sub(radius);
            let c_lo = c.saturating_sub(radius);
            for rr in r_lo..=(r + radius).min(height - 1) {
                for cc in c_lo..=(c + radius).min(width - 1) {
                    out[rr * width + cc] = true;
                }
            }
        }
    }
    out
}

/// Thresholds a score mask (keep iff score > `threshold`), dilates the
/// survivors by the Chebyshev `dilation` radius, then applies the endpoint
/// and obstacle rules.
pub fn postprocess_mask(
    mask: &Array2<f32>,
    map: &GridMap,
    threshold: f32,
    dilation: usize,
) -> Result<PrunedScene, PruneError> {
    let (mh, mw) = mask.dim();
    if mh != map.height() || mw != map.width() {
        return Err(PruneError::SizeMismatch {
            got_height: mh,
            got_width: mw,
            want_height: map.height(),
            want_width: map.width(),
        });
    }
    let mut kept = vec![false; map.cell_count()];
    for r in 0..mh {
        for c in 0..mw {
            kept[r * mw + c] = mask[[r, c]] > threshold;
        }
    }
    let kept = dilate(&kept, mh, mw, dilation);
    Ok(PrunedScene::finalize(map.clone(), kept, PruneSource::Encoder))
}

/// The idealized pruner: keeps the free cells within Chebyshev distance
/// `radius` of a known shortest path. Isolates pipeline gains from scorer
/// quality.
pub fn corridor_oracle(
    map: &GridMap,
    label: &Path,
    radius: usize,
) -> Result<PrunedScene, PruneError> {
    crate::grid::verify_path(map, label)?;
    let mut kept = vec![false; map.cell_count()];
    for &cell in label.cells() {
        kept[map.index(cell)] = true;
    }
    let kept = dilate(&kept, map.height(), map.width(), radius);
    Ok(PrunedScene::finalize(
        map.clone(),
        kept,
        PruneSource::CorridorOracle,
    ))
}

/// Outcome of planning on a pruned scene, including the fallback flag and
/// the pipeline timing breakdown.
#[derive(Debug, Clone)]
pub struct PrunedPlanResult {
    pub result: PlanResult,
    /// True when the pruned space had no route and the full map was
    /// searched as well (its iterations and time are included in `result`).
    pub used_fallback: bool,
    /// Seconds spent producing the score mask (zero for oracle corridors).
    pub encoder_seconds: f64,
    /// Seconds spent thresholding/dilating/composing the keep set.
    pub preprocess_seconds: f64,
    /// `encoder_seconds + preprocess_seconds + result.planner_seconds`.
    pub total_seconds: f64,
}

/// Runs a planner on the pruned search space. If the pruned space severs
/// every route but some cells were actually discarded, the full base map is
/// searched as well (soundness fallback); both searches are reflected in
/// the returned iteration count and planner time.
///
/// `encoder_seconds` and `preprocess_seconds` are the upstream pipeline
/// timings measured by the caller; they flow into `total_seconds`.
pub fn run_pruned(
    kind: PlannerKind,
    heuristic: HeuristicKind,
    pruned: &PrunedScene,
    encoder_seconds: f64,
    preprocess_seconds: f64,
) -> Result<PrunedPlanResult, PruneError> {
    let restricted = pruned.restricted_map();
    let first = run_planner(kind, &restricted, heuristic)?;
    let (result, used_fallback) = if first.path.is_some() || pruned.is_noop() {
        (first, false)
    } else {
        let full = run_planner(kind, pruned.base(), heuristic)?;
        (
            PlanResult {
                path: full.path,
                iterations: first.iterations + full.iterations,
                planner_seconds: first.planner_seconds + full.planner_seconds,
                expanded: first.expanded + full.expanded,
            },
            true,
        )
    };
    let total_seconds = encoder_seconds + preprocess_seconds + result.planner_seconds;
    Ok(PrunedPlanResult {
        result,
        used_fallback,
        encoder_seconds,
        preprocess_seconds,
        total_seconds,
    })
}
