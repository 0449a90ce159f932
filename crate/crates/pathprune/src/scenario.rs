//! Procedural scene generation and ground-truth labeling.
//!
//! Five obstacle families with qualitatively different topologies are
//! provided: scattered noise, parallel walls with gaps, subdivided rooms,
//! organic blobs, and braided mazes. Every generated scene has a reachable
//! goal (unreachable draws are resampled up to a retry bound), and
//! [`label_scene`] produces a minimum-cost path with a self-contained
//! uniform-cost search whose cost comparisons are exact integer arithmetic,
//! so labels are independent of the planner implementations they are later
//! used to judge.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, Connectivity, Coord, GridError, GridMap, Path};

/// Upper bound on obstacle density: above this, a reachable start/goal pair
/// becomes too rare for the resampling loop to be practical.
pub const DENSITY_LIMIT: f64 = 0.6;

/// How many obstacle/start/goal draws [`generate_scene`] makes before
/// declaring the family parameters unsatisfiable.
pub const RETRY_BOUND: usize = 100;

/// Errors from scene generation and labeling.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scene family: {0}")]
    InvalidFamily(String),
    #[error("unknown scene family `{0}`")]
    UnknownFamily(String),
    #[error("scene size {height}x{width} is too small; generation needs at least 8x8")]
    SizeTooSmall { height: usize, width: usize },
    #[error("unsatisfiable family parameters: no scene with a reachable goal after {attempts} attempts")]
    Unsatisfiable { attempts: usize },
    #[error("no path exists between start and goal")]
    NoPath,
    #[error(transparent)]
    Map(#[from] GridError),
}

/// The five obstacle topologies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Independent per-cell noise.
    Scatter,
    /// Parallel walls with carved gaps.
    Bars,
    /// Recursive subdivision into rooms joined by doors.
    Rooms,
    /// Organic patches grown by random walks.
    Blobs,
    /// A braided maze of corridors.
    Maze,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Scatter,
        FamilyKind::Bars,
        FamilyKind::Rooms,
        FamilyKind::Blobs,
        FamilyKind::Maze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Scatter => "scatter",
            FamilyKind::Bars => "bars",
            FamilyKind::Rooms => "rooms",
            FamilyKind::Blobs => "blobs",
            FamilyKind::Maze => "maze",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| ScenarioError::UnknownFamily(s.to_string()))
    }
}

/// A fully parameterized scene family: the topology kind, the target
/// fraction of blocked cells, and the shape knobs used by individual
/// generators (walls ignore `blob_size`, blobs ignore `wall_thickness`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFamily {
    pub kind: FamilyKind,
    pub density: f64,
    #[serde(default = "default_wall_thickness")]
    pub wall_thickness: usize,
    #[serde(default = "default_gap_count")]
    pub gap_count: usize,
    #[serde(default = "default_blob_size")]
    pub blob_size: (usize, usize),
}

fn default_wall_thickness() -> usize {
    1
}

fn default_gap_count() -> usize {
    2
}

fn default_blob_size() -> (usize, usize) {
    (6, 20)
}

impl SceneFamily {
    /// A family with default shape parameters.
    pub fn new(kind: FamilyKind, density: f64) -> Result<Self, ScenarioError> {
        let family = SceneFamily {
            kind,
            density,
            wall_thickness: default_wall_thickness(),
            gap_count: default_gap_count(),
            blob_size: default_blob_size(),
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.density.is_finite() || self.density < 0.0 || self.density > DENSITY_LIMIT {
            return Err(ScenarioError::InvalidFamily(format!(
                "density {} outside [0, {DENSITY_LIMIT}]",
                self.density
            )));
        }
        if self.wall_thickness == 0 {
            return Err(ScenarioError::InvalidFamily(
                "wall thickness must be at least 1".to_string(),
            ));
        }
        let (lo, hi) = self.blob_size;
        if lo == 0 || lo > hi {
            return Err(ScenarioError::InvalidFamily(format!(
                "blob size range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
            )));
        }
        Ok(())
    }

    /// Target number of blocked cells for a grid of `total` cells.
    fn budget(&self, total: usize) -> usize {
        (self.density * total as f64).round() as usize
    }
}

/// Generates one scene: obstacles laid out by the family's generator, then
/// start and goal sampled uniformly from distinct free cells. Draws where the
/// goal is unreachable are resampled; after [`RETRY_BOUND`] failures the
/// family parameters are reported as unsatisfiable. Deterministic in
/// `(family, size, connectivity, seed)`.
pub fn generate_scene(
    family: &SceneFamily,
    size: (usize, usize),
    connectivity: Connectivity,
    seed: u64,
) -> Result<GridMap, ScenarioError> {
    family.validate()?;
    let (height, width) = size;
    if height < 8 || width < 8 {
        return Err(ScenarioError::SizeTooSmall { height, width });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRY_BOUND {
        let cells = match family.kind {
            FamilyKind::Scatter => lay_scatter(&mut rng, height, width, family),
            FamilyKind::Bars => lay_bars(&mut rng, height, width, family),
            FamilyKind::Rooms => lay_rooms(&mut rng, height, width, family),
            FamilyKind::Blobs => lay_blobs(&mut rng, height, width, family),
            FamilyKind::Maze => lay_maze(&mut rng, height, width, family),
        };
        let free: Vec<usize> = (0..cells.len())
            .filter(|&i| cells[i] == Cell::Free)
            .collect();
        if free.len() < 2 {
            continue;
        }
        // Two draws give a uniform distinct (start, goal) pair.
        let a = rng.random_range(0..free.len());
        let mut b = rng.random_range(0..free.len() - 1);
        if b >= a {
            b += 1;
        }
        let start = Coord::new(free[a] / width, free[a] % width);
        let goal = Coord::new(free[b] / width, free[b] % width);
        let map = GridMap::new(width, height, cells, start, goal, connectivity)?;
        if reachable(&map) {
            return Ok(map);
        }
    }
    Err(ScenarioError::Unsatisfiable {
        attempts: RETRY_BOUND,
    })
}

/// Breadth-first reachability of the goal from the start.
fn reachable(map: &GridMap) -> bool {
    if map.start() == map.goal() {
        return true;
    }
    let mut seen = vec![false; map.cell_count()];
    let mut queue = VecDeque::new();
    seen[map.index(map.start())] = true;
    queue.push_back(map.start());
    let mut scratch = Vec::with_capacity(8);
    while let Some(u) = queue.pop_front() {
        if u == map.goal() {
            return true;
        }
        map.neighbors_into(u, &mut scratch)
            .expect("queued cells are in range");
        for &v in &scratch {
            let vi = map.index(v);
            if !seen[vi] {
                seen[vi] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

fn lay_scatter(rng: &mut ChaCha8Rng, height: usize, width: usize, family: &SceneFamily) -> Vec<Cell> {
    (0..height * width)
        .map(|_| {
            if rng.random_bool(family.density) {
                Cell::Blocked
            } else {
                Cell::Free
            }
        })
        .collect()
}

fn lay_bars(rng: &mut ChaCha8Rng, height: usize, width: usize, family: &SceneFamily) -> Vec<Cell> {
    const GAP_WIDTH: usize = 2;
    let mut cells = vec![Cell::Free; height * width];
    let budget = family.budget(height * width);
    if budget == 0 {
        return cells;
    }
    let horizontal = rng.random_bool(0.5);
    // `span` is the axis the walls stack along, `extent` the axis they run along.
    let (span, extent) = if horizontal {
        (height, width)
    } else {
        (width, height)
    };
    let thickness = family.wall_thickness.min(span);
    let solid = extent.saturating_sub(family.gap_count * GAP_WIDTH).max(1);
    let want = budget.div_ceil(thickness * solid).max(1);
    // Walls keep at least one clear line between them; cap by what fits.
    let fit = ((span + 1) / (thickness + 1)).max(1);
    let count = want.min(fit);
    let slack = span.saturating_sub(count * thickness + count - 1);
    let mut offsets: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    for (i, off) in offsets.into_iter().enumerate() {
        let wall_start = off + i * (thickness + 1);
        let gap_starts: Vec<usize> = (0..family.gap_count)
            .map(|_| rng.random_range(0..=extent.saturating_sub(GAP_WIDTH)))
            .collect();
        for line in wall_start..(wall_start + thickness).min(span) {
            for pos in 0..extent {
                if gap_starts.iter().any(|&g| pos >= g && pos < g + GAP_WIDTH) {
                    continue;
                }
                let (row, col) = if horizontal { (line, pos) } else { (pos, line) };
                cells[row * width + col] = Cell::Blocked;
            }
        }
    }
    cells
}

fn lay_rooms(rng: &mut ChaCha8Rng, height: usize, width: usize, family: &SceneFamily) -> Vec<Cell> {
    let mut cells = vec![Cell::Free; height * width];
    let budget = family.budget(height * width);
    if budget == 0 {
        return cells;
    }
    let mut blocked = 0usize;
    // Half-open regions [r0, r1) x [c0, c1), subdivided breadth-first so the
    // largest rooms are split before the density budget runs out. Walls sit
    // on even grid lines and doors on odd ones, so a later perpendicular
    // wall can never land on (and seal) an existing door.
    let mut regions = VecDeque::new();
    regions.push_back((0usize, 0usize, height, width));
    while let Some((r0, c0, r1, c1)) = regions.pop_front() {
        if blocked >= budget {
            break;
        }
        let wall_rows: Vec<usize> = (r0 + 1..r1.saturating_sub(1)).filter(|r| r % 2 == 0).collect();
        let wall_cols: Vec<usize> = (c0 + 1..c1.saturating_sub(1)).filter(|c| c % 2 == 0).collect();
        let door_rows: Vec<usize> = (r0..r1).filter(|r| r % 2 == 1).collect();
        let door_cols: Vec<usize> = (c0..c1).filter(|c| c % 2 == 1).collect();
        let can_split_rows = !wall_rows.is_empty() && !door_cols.is_empty();
        let can_split_cols = !wall_cols.is_empty() && !door_rows.is_empty();
        let split_rows = match (can_split_rows, can_split_cols) {
            (false, false) => continue,
            (true, false) => true,
            (false, true) => false,
            // Split across the longer axis so rooms stay roughly square.
            (true, true) => match (r1 - r0).cmp(&(c1 - c0)) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => rng.random_bool(0.5),
            },
        };
        if split_rows {
            let wall = wall_rows[rng.random_range(0..wall_rows.len())];
            let door = door_cols[rng.random_range(0..door_cols.len())];
            for col in c0..c1 {
                if col != door && cells[wall * width + col] == Cell::Free {
                    cells[wall * width + col] = Cell::Blocked;
                    blocked += 1;
                }
            }
            regions.push_back((r0, c0, wall, c1));
            regions.push_back((wall + 1, c0, r1, c1));
        } else {
            let wall = wall_cols[rng.random_range(0..wall_cols.len())];
            let door = door_rows[rng.random_range(0..door_rows.len())];
            for row in r0..r1 {
                if row != door && cells[row * width + wall] == Cell::Free {
                    cells[row * width + wall] = Cell::Blocked;
                    blocked += 1;
                }
            }
            regions.push_back((r0, c0, r1, wall));
            regions.push_back((r0, wall + 1, r1, c1));
        }
    }
    cells
}

fn lay_blobs(rng: &mut ChaCha8Rng, height: usize, width: usize, family: &SceneFamily) -> Vec<Cell> {
    let mut cells = vec![Cell::Free; height * width];
    let budget = family.budget(height * width);
    let (lo, hi) = family.blob_size;
    let mut blocked = 0usize;
    let mut attempts = 0usize;
    while blocked < budget && attempts < 10 * budget.max(1) {
        attempts += 1;
        let target = rng.random_range(lo..=hi);
        let mut row = rng.random_range(0..height);
        let mut col = rng.random_range(0..width);
        let mut grown = 0usize;
        let mut steps = 0usize;
        // Grow one patch by a bounded random walk that blocks what it visits.
        while grown < target && steps < target * 8 {
            steps += 1;
            let i = row * width + col;
            if cells[i] == Cell::Free {
                cells[i] = Cell::Blocked;
                blocked += 1;
                grown += 1;
                if blocked >= budget {
                    break;
                }
            }
            match rng.random_range(0..4u8) {
                0 if row > 0 => row -= 1,
                1 if col + 1 < width => col += 1,
                2 if row + 1 < height => row += 1,
                3 if col > 0 => col -= 1,
                _ => {}
            }
        }
    }
    cells
}

fn lay_maze(rng: &mut ChaCha8Rng, height: usize, width: usize, family: &SceneFamily) -> Vec<Cell> {
    let mut cells = vec![Cell::Blocked; height * width];
    // Depth-first backtracker over lattice nodes at even coordinates; the
    // wall cell between two carved nodes is opened with them.
    let nodes_h = height.div_ceil(2);
    let nodes_w = width.div_ceil(2);
    let mut visited = vec![false; nodes_h * nodes_w];
    let start = (rng.random_range(0..nodes_h), rng.random_range(0..nodes_w));
    visited[start.0 * nodes_w + start.1] = true;
    cells[start.0 * 2 * width + start.1 * 2] = Cell::Free;
    let mut stack = vec![start];
    let mut unvisited = Vec::with_capacity(4);
    while let Some(&(nr, nc)) = stack.last() {
        unvisited.clear();
        for (dr, dc) in [(-1i64, 0i64), (0, 1), (1, 0), (0, -1)] {
            let rr = nr as i64 + dr;
            let cc = nc as i64 + dc;
            if (0..nodes_h as i64).contains(&rr)
                && (0..nodes_w as i64).contains(&cc)
                && !visited[rr as usize * nodes_w + cc as usize]
            {
                unvisited.push((rr as usize, cc as usize));
            }
        }
        let Some(&(tr, tc)) = unvisited.get(rng.random_range(0..unvisited.len().max(1))) else {
            stack.pop();
            continue;
        };
        visited[tr * nodes_w + tc] = true;
        cells[tr * 2 * width + tc * 2] = Cell::Free;
        // Midpoint between the two nodes in grid coordinates.
        cells[(nr + tr) * width + (nc + tc)] = Cell::Free;
        stack.push((tr, tc));
    }
    // Braid: a perfect maze blocks about half the grid, so open wall cells
    // that join two corridors until the blocked count reaches the requested
    // density. Opening such a cell never disconnects or strands anything.
    let budget = family.budget(height * width);
    let mut blocked = cells.iter().filter(|&&c| c == Cell::Blocked).count();
    while blocked > budget {
        let mut joiners: Vec<usize> = (0..height * width)
            .filter(|&i| {
                if cells[i] != Cell::Blocked {
                    return false;
                }
                let (row, col) = (i / width, i % width);
                let mut open = 0;
                open += usize::from(row > 0 && cells[i - width] == Cell::Free);
                open += usize::from(row + 1 < height && cells[i + width] == Cell::Free);
                open += usize::from(col > 0 && cells[i - 1] == Cell::Free);
                open += usize::from(col + 1 < width && cells[i + 1] == Cell::Free);
                open >= 2
            })
            .collect();
        if joiners.is_empty() {
            break;
        }
        joiners.shuffle(rng);
        for i in joiners {
            if blocked <= budget {
                break;
            }
            cells[i] = Cell::Free;
            blocked -= 1;
        }
    }
    cells
}

/// Exact path cost as counts of axial and diagonal steps. Comparing
/// `a + b*sqrt(2)` against `c + d*sqrt(2)` reduces to an integer sign test
/// (squaring once), so the labeling search never accumulates float error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct StepCount {
    axial: i64,
    diagonal: i64,
}

impl StepCount {
    const ZERO: StepCount = StepCount {
        axial: 0,
        diagonal: 0,
    };

    fn step(self, from: Coord, to: Coord) -> StepCount {
        if from.row != to.row && from.col != to.col {
            StepCount {
                diagonal: self.diagonal + 1,
                ..self
            }
        } else {
            StepCount {
                axial: self.axial + 1,
                ..self
            }
        }
    }
}

impl Ord for StepCount {
    fn cmp(&self, other: &Self) -> Ordering {
        // Sign of (da + dd*sqrt(2)). With mixed signs, compare da^2 vs 2*dd^2;
        // equality there is impossible for dd != 0 since sqrt(2) is irrational.
        let da = self.axial - other.axial;
        let dd = self.diagonal - other.diagonal;
        match (da >= 0, dd >= 0) {
            (true, true) if da == 0 && dd == 0 => Ordering::Equal,
            (true, true) => Ordering::Greater,
            (false, false) => Ordering::Less,
            (true, false) => (da * da).cmp(&(2 * dd * dd)),
            (false, true) => (2 * dd * dd).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for StepCount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Labels a scene with a minimum-cost path from start to goal, or
/// [`ScenarioError::NoPath`] when the goal is unreachable. This is the ground
/// truth used everywhere else; it is a self-contained uniform-cost search
/// with exact cost comparisons, sharing no search code with the planners.
pub fn label_scene(map: &GridMap) -> Result<Path, ScenarioError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = map.cell_count();
    let start = map.index(map.start());
    let goal = map.index(map.goal());
    let mut best: Vec<Option<StepCount>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    best[start] = Some(StepCount::ZERO);
    heap.push(Reverse((StepCount::ZERO, seq, start)));
    let mut scratch = Vec::with_capacity(8);
    while let Some(Reverse((cost, _, ui))) = heap.pop() {
        if settled[ui] {
            continue;
        }
        settled[ui] = true;
        if ui == goal {
            break;
        }
        let u = map.coord(ui);
        map.neighbors_into(u, &mut scratch)
            .expect("expanded cells are in range");
        for &v in &scratch {
            let vi = map.index(v);
            if settled[vi] {
                continue;
            }
            let next = cost.step(u, v);
            if best[vi].is_none_or(|cur| next < cur) {
                best[vi] = Some(next);
                parent[vi] = ui;
                seq += 1;
                heap.push(Reverse((next, seq, vi)));
            }
        }
    }
    if !settled[goal] {
        return Err(ScenarioError::NoPath);
    }
    let mut chain = vec![goal];
    let mut at = goal;
    while at != start {
        at = parent[at];
        chain.push(at);
    }
    chain.reverse();
    Ok(Path::new(chain.into_iter().map(|i| map.coord(i)).collect()))
}
