//! Helpers shared by the integration-test targets: an exhaustive
//! shortest-path oracle for small grids, a miniature scene builder,
//! filesystem snapshots, and fixed benchmark reports for the renderer
//! golden tests.
#![allow(dead_code)] // each test target uses its own subset

use std::cmp::Ordering;
use std::path::Path as StdPath;

use pathprune::bench::{attach_improvements, BenchReport, ReportRow};
use pathprune::grid::{Cell, Connectivity, Coord, GridMap, Path};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A path cost kept as exact step counts: `axial + diagonal * sqrt(2)`.
/// sqrt(2) is irrational, so two costs are equal iff the counts match and
/// ordering them never needs floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCost {
    pub axial: u32,
    pub diagonal: u32,
}

impl ExactCost {
    pub const ZERO: ExactCost = ExactCost {
        axial: 0,
        diagonal: 0,
    };

    pub fn add(self, other: ExactCost) -> ExactCost {
        ExactCost {
            axial: self.axial + other.axial,
            diagonal: self.diagonal + other.diagonal,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.axial) + f64::from(self.diagonal) * std::f64::consts::SQRT_2
    }
}

impl Ord for ExactCost {
    fn cmp(&self, other: &ExactCost) -> Ordering {
        let da = i64::from(self.axial) - i64::from(other.axial);
        let dd = i64::from(self.diagonal) - i64::from(other.diagonal);
        if da == 0 && dd == 0 {
            Ordering::Equal
        } else if da >= 0 && dd >= 0 {
            Ordering::Greater
        } else if da <= 0 && dd <= 0 {
            Ordering::Less
        } else {
            // Opposite signs: the sign of `da + dd*sqrt(2)` follows from
            // comparing da^2 with 2*dd^2. The squares are never equal for
            // nonzero integers, again because sqrt(2) is irrational.
            let a2 = da * da;
            let d2 = 2 * dd * dd;
            debug_assert_ne!(a2, d2);
            if (da > 0) == (a2 > d2) {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    }
}

impl PartialOrd for ExactCost {
    fn partial_cmp(&self, other: &ExactCost) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Counts a returned path's steps exactly; panics on any hop that is not a
/// king move, since such a path has no well-defined cost.
pub fn exact_path_cost(path: &Path) -> ExactCost {
    let mut cost = ExactCost::ZERO;
    for pair in path.cells().windows(2) {
        let dr = pair[0].row.abs_diff(pair[1].row);
        let dc = pair[0].col.abs_diff(pair[1].col);
        match (dr, dc) {
            (0, 1) | (1, 0) => cost.axial += 1,
            (1, 1) => cost.diagonal += 1,
            other => panic!("non-adjacent hop {other:?} in path"),
        }
    }
    cost
}

/// Admissible remaining-cost bound: Manhattan distance on four-connected
/// maps, the octile decomposition on eight-connected ones.
fn straight_line_bound(from: Coord, to: Coord, connectivity: Connectivity) -> ExactCost {
    let dr = from.row.abs_diff(to.row) as u32;
    let dc = from.col.abs_diff(to.col) as u32;
    match connectivity {
        Connectivity::Four => ExactCost {
            axial: dr + dc,
            diagonal: 0,
        },
        Connectivity::Eight => ExactCost {
            axial: dr.abs_diff(dc),
            diagonal: dr.min(dc),
        },
    }
}

/// The movement model written out independently of the library's neighbour
/// iterator: axial steps cost 1; on eight-connected maps a diagonal step
/// costs sqrt(2) and only needs its destination in bounds and free.
fn king_moves(map: &GridMap, at: Coord) -> Vec<(Coord, ExactCost)> {
    const AXIAL: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    const DIAGONAL: [(i64, i64); 4] = [(-1, 1), (1, 1), (1, -1), (-1, -1)];
    let mut moves = Vec::with_capacity(8);
    let push = |offsets: &[(i64, i64)], step: ExactCost, moves: &mut Vec<_>| {
        for &(dr, dc) in offsets {
            let r = at.row as i64 + dr;
            let c = at.col as i64 + dc;
            if r < 0 || c < 0 || r >= map.height() as i64 || c >= map.width() as i64 {
                continue;
            }
            let next = Coord::new(r as usize, c as usize);
            if map.is_free(next) {
                moves.push((next, step));
            }
        }
    };
    push(
        &AXIAL,
        ExactCost {
            axial: 1,
            diagonal: 0,
        },
        &mut moves,
    );
    if map.connectivity() == Connectivity::Eight {
        push(
            &DIAGONAL,
            ExactCost {
                axial: 0,
                diagonal: 1,
            },
            &mut moves,
        );
    }
    moves
}

struct Exhaustive<'a> {
    map: &'a GridMap,
    visited: Vec<bool>,
    best: Option<ExactCost>,
}

impl Exhaustive<'_> {
    fn dfs(&mut self, at: Coord, so_far: ExactCost) {
        if at == self.map.goal() {
            if self.best.is_none_or(|b| so_far < b) {
                self.best = Some(so_far);
            }
            return;
        }
        // Expand the cheapest-looking successor first so the first completed
        // path is already near-optimal and the bound can prune hard.
        let mut steps = Vec::with_capacity(8);
        for (next, step) in king_moves(self.map, at) {
            let idx = self.map.index(next);
            if self.visited[idx] {
                continue;
            }
            let cost = so_far.add(step);
            let goal = self.map.goal();
            let bound = cost.add(straight_line_bound(next, goal, self.map.connectivity()));
            steps.push((bound, cost, idx));
        }
        steps.sort_by(|x, y| x.0.cmp(&y.0).then(x.2.cmp(&y.2)));
        for (bound, cost, idx) in steps {
            if self.best.is_some_and(|b| bound.cmp(&b) != Ordering::Less) {
                continue;
            }
            self.visited[idx] = true;
            self.dfs(self.map.coord(idx), cost);
            self.visited[idx] = false;
        }
    }
}

/// Branch-and-bound enumeration of every simple path from start to goal.
/// Returns the exact minimum cost, or `None` when the goal is unreachable.
/// Only sensible on small maps; the checked corpus stays at or below 7x7.
pub fn exhaustive_best_cost(map: &GridMap) -> Option<ExactCost> {
    let mut search = Exhaustive {
        map,
        visited: vec![false; map.cells().len()],
        best: None,
    };
    search.visited[map.index(map.start())] = true;
    search.dfs(map.start(), ExactCost::ZERO);
    search.best
}

/// Builds a small scene in one of five obstacle textures (scatter, wall
/// with gaps, crossed walls with doors, square blobs, pillar lattice) with
/// uniformly drawn distinct start and goal cells. The goal may be
/// unreachable; callers that need a path must check.
pub fn tiny_scene(
    style: usize,
    height: usize,
    width: usize,
    connectivity: Connectivity,
    rng: &mut ChaCha8Rng,
) -> GridMap {
    loop {
        let mut cells = vec![Cell::Free; height * width];
        match style % 5 {
            0 => {
                for cell in cells.iter_mut() {
                    if rng.random_bool(0.25) {
                        *cell = Cell::Blocked;
                    }
                }
            }
            1 => {
                let r = rng.random_range(1..height - 1);
                for c in 0..width {
                    cells[r * width + c] = Cell::Blocked;
                }
                for _ in 0..rng.random_range(1..=2usize) {
                    cells[r * width + rng.random_range(0..width)] = Cell::Free;
                }
            }
            2 => {
                let r = rng.random_range(1..height - 1);
                let c = rng.random_range(1..width - 1);
                for j in 0..width {
                    cells[r * width + j] = Cell::Blocked;
                }
                for i in 0..height {
                    cells[i * width + c] = Cell::Blocked;
                }
                cells[r * width + rng.random_range(0..width)] = Cell::Free;
                cells[rng.random_range(0..height) * width + c] = Cell::Free;
            }
            3 => {
                for _ in 0..2 {
                    let r = rng.random_range(0..height - 1);
                    let c = rng.random_range(0..width - 1);
                    for dr in 0..2 {
                        for dc in 0..2 {
                            cells[(r + dr) * width + c + dc] = Cell::Blocked;
                        }
                    }
                }
            }
            _ => {
                for r in (1..height).step_by(2) {
                    for c in (1..width).step_by(2) {
                        cells[r * width + c] = Cell::Blocked;
                    }
                }
                for cell in cells.iter_mut() {
                    if rng.random_bool(0.1) {
                        *cell = Cell::Blocked;
                    }
                }
            }
        }
        let free: Vec<usize> = cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == Cell::Free)
            .map(|(i, _)| i)
            .collect();
        if free.len() < 2 {
            continue;
        }
        let start = free[rng.random_range(0..free.len())];
        let goal = loop {
            let g = free[rng.random_range(0..free.len())];
            if g != start {
                break g;
            }
        };
        let coord = |i: usize| Coord::new(i / width, i % width);
        return GridMap::new(width, height, cells, coord(start), coord(goal), connectivity)
            .expect("start and goal sit on free cells");
    }
}

/// Every file under `root`, keyed by relative path and sorted — for
/// byte-level comparisons of regenerated output trees.
pub fn read_tree(root: &StdPath) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[allow(clippy::too_many_arguments)]
fn row(
    family: &str,
    planner: &str,
    pruner: &str,
    scenes: usize,
    mean_iters: f64,
    mean_planner_s: f64,
    mean_preprocess_s: f64,
) -> ReportRow {
    ReportRow {
        family: family.to_string(),
        planner: planner.to_string(),
        pruner: pruner.to_string(),
        scenes,
        mean_iters,
        mean_planner_s,
        mean_encoder_s: 0.0,
        mean_preprocess_s,
        mean_total_s: mean_planner_s + mean_preprocess_s,
        cost_ratio: 1.0,
        fallback_rate: 0.0,
        iter_improvement_pct: None,
        time_improvement_pct: None,
    }
}

/// A fixed report with two planners and two families of unequal scene
/// counts, so the table's grand averages exercise scene-count weighting.
pub fn synthetic_report() -> BenchReport {
    let mut rows = vec![
        row("scatter", "dijkstra", "none", 3, 1800.0, 0.0018, 0.0),
        row("scatter", "dijkstra", "corridor:2", 3, 300.0, 0.00035, 0.0001),
        row("scatter", "astar", "none", 3, 900.0, 0.0012, 0.0),
        row("scatter", "astar", "corridor:2", 3, 280.0, 0.0003, 0.0001),
        row("bars", "dijkstra", "none", 1, 1000.0, 0.001, 0.0),
        row("bars", "dijkstra", "corridor:2", 1, 200.0, 0.0002, 0.00008),
        row("bars", "astar", "none", 1, 500.0, 0.0008, 0.0),
        row("bars", "astar", "corridor:2", 1, 190.0, 0.00019, 0.00008),
    ];
    attach_improvements(&mut rows).unwrap();
    BenchReport {
        repetitions: 5,
        seed: 42,
        rows,
    }
}

/// A report without any pruned rows, for the narrow table layout.
pub fn baseline_only_report() -> BenchReport {
    BenchReport {
        repetitions: 3,
        seed: 7,
        rows: vec![
            row("scatter", "dijkstra", "none", 2, 1500.5, 0.0015, 0.0),
            row("scatter", "best_first", "none", 2, 120.25, 0.0002, 0.0),
        ],
    }
}
