//! Grid maps, paths, and the text scene format.
//!
//! A [`GridMap`] is a rectangular occupancy grid with a designated start and
//! goal cell and a movement [`Connectivity`]. Axial steps cost 1.0 and, under
//! eight-connectivity, diagonal steps cost sqrt(2). Maps are immutable after
//! construction; everything downstream (planners, pruning, the encoder)
//! borrows them freely across threads.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cost of a diagonal step under eight-connectivity.
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// A cell position, row-major: `row` in `0..height`, `col` in `0..width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }

    /// `max(|d_row|, |d_col|)` — the number of king moves between two cells.
    pub fn chebyshev(self, other: Coord) -> usize {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr.max(dc)
    }

    /// `|d_row| + |d_col|` — the number of axial moves between two cells.
    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Occupancy state of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Blocked,
}

/// Movement model: four axial neighbours, or eight including diagonals.
/// Serializes as the plain number 4 or 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(connectivity: Connectivity) -> u8 {
        connectivity.as_u8()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, String> {
        match value {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Errors raised by map construction and cell queries.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("map dimensions must be positive, got {width}x{height}")]
    EmptyMap { width: usize, height: usize },
    #[error("cell vector has {got} entries, expected {expected} for a {width}x{height} map")]
    CellCountMismatch {
        got: usize,
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("cell {cell} is out of bounds for a {width}x{height} map")]
    OutOfBounds {
        cell: Coord,
        width: usize,
        height: usize,
    },
    #[error("start cell {0} lies on a blocked cell")]
    StartOnBlocked(Coord),
    #[error("goal cell {0} lies on a blocked cell")]
    GoalOnBlocked(Coord),
}

/// A rectangular occupancy grid with start, goal, and movement model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Coord,
    goal: Coord,
    connectivity: Connectivity,
}

/// Relative neighbour offsets in deterministic iteration order.
const AXIAL_OFFSETS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)]; // N E S W
const DIAGONAL_OFFSETS: [(isize, isize); 4] = [(-1, 1), (1, 1), (1, -1), (-1, -1)]; // NE SE SW NW

impl GridMap {
    /// Builds a map, validating dimensions, bounds, and that the start and
    /// goal sit on free cells.
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        start: Coord,
        goal: Coord,
        connectivity: Connectivity,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyMap { width, height });
        }
        if cells.len() != width * height {
            return Err(GridError::CellCountMismatch {
                got: cells.len(),
                expected: width * height,
                width,
                height,
            });
        }
        let map = GridMap {
            width,
            height,
            cells,
            start,
            goal,
            connectivity,
        };
        for endpoint in [start, goal] {
            if !map.contains(endpoint) {
                return Err(GridError::OutOfBounds {
                    cell: endpoint,
                    width,
                    height,
                });
            }
        }
        if map.cell(start) == Cell::Blocked {
            return Err(GridError::StartOnBlocked(start));
        }
        if map.cell(goal) == Cell::Blocked {
            return Err(GridError::GoalOnBlocked(goal));
        }
        Ok(map)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn start(&self) -> Coord {
        self.start
    }

    #[inline]
    pub fn goal(&self) -> Coord {
        self.goal
    }

    #[inline]
    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn contains(&self, cell: Coord) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Row-major index of an in-bounds cell.
    #[inline]
    pub fn index(&self, cell: Coord) -> usize {
        debug_assert!(self.contains(cell));
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn coord(&self, index: usize) -> Coord {
        debug_assert!(index < self.cell_count());
        Coord::new(index / self.width, index % self.width)
    }

    #[inline]
    pub fn cell(&self, cell: Coord) -> Cell {
        self.cells[self.index(cell)]
    }

    #[inline]
    pub fn is_free(&self, cell: Coord) -> bool {
        self.cell(cell) == Cell::Free
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Number of free cells in the map.
    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Free).count()
    }

    /// Returns a copy of this map with the given cells blocked in addition to
    /// the existing obstacles. Start and goal must remain free.
    pub fn with_blocked<I: IntoIterator<Item = Coord>>(&self, extra: I) -> Result<Self, GridError> {
        let mut cells = self.cells.clone();
        for cell in extra {
            if !self.contains(cell) {
                return Err(GridError::OutOfBounds {
                    cell,
                    width: self.width,
                    height: self.height,
                });
            }
            cells[self.index(cell)] = Cell::Blocked;
        }
        GridMap::new(
            self.width,
            self.height,
            cells,
            self.start,
            self.goal,
            self.connectivity,
        )
    }

    /// Free in-bounds neighbours of `cell` in deterministic order:
    /// N, E, S, W, then NE, SE, SW, NW under eight-connectivity.
    pub fn neighbors(&self, cell: Coord) -> Result<Vec<Coord>, GridError> {
        let mut out = Vec::with_capacity(8);
        self.neighbors_into(cell, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`GridMap::neighbors`]: clears `out` and
    /// fills it with the neighbours in the same deterministic order.
    pub fn neighbors_into(&self, cell: Coord, out: &mut Vec<Coord>) -> Result<(), GridError> {
        if !self.contains(cell) {
            return Err(GridError::OutOfBounds {
                cell,
                width: self.width,
                height: self.height,
            });
        }
        out.clear();
        self.push_offsets(cell, &AXIAL_OFFSETS, out);
        if self.connectivity == Connectivity::Eight {
            self.push_offsets(cell, &DIAGONAL_OFFSETS, out);
        }
        Ok(())
    }

    fn push_offsets(&self, cell: Coord, offsets: &[(isize, isize)], out: &mut Vec<Coord>) {
        for &(dr, dc) in offsets {
            let row = cell.row as isize + dr;
            let col = cell.col as isize + dc;
            if row < 0 || col < 0 {
                continue;
            }
            let next = Coord::new(row as usize, col as usize);
            if self.contains(next) && self.is_free(next) {
                out.push(next);
            }
        }
    }
}

/// Cost of one step between adjacent cells: 1.0 axial, sqrt(2) diagonal.
#[inline]
pub fn step_cost(from: Coord, to: Coord) -> f64 {
    if from.row != to.row && from.col != to.col {
        SQRT_2
    } else {
        1.0
    }
}

/// An ordered cell sequence from start to goal (inclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    cells: Vec<Coord>,
}

impl Path {
    pub fn new(cells: Vec<Coord>) -> Self {
        Path { cells }
    }

    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// First problem found when checking a path against a map.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathViolation {
    #[error("path is empty")]
    Empty,
    #[error("path begins at {found} but the map start is {expected}")]
    StartMismatch { found: Coord, expected: Coord },
    #[error("path ends at {found} but the map goal is {expected}")]
    GoalMismatch { found: Coord, expected: Coord },
    #[error("path cell #{index} {cell} is out of bounds")]
    OutOfBounds { index: usize, cell: Coord },
    #[error("path cell #{index} {cell} is blocked")]
    Blocked { index: usize, cell: Coord },
    #[error("step #{index} from {from} to {to} is not a legal move under the map connectivity")]
    NotAdjacent { index: usize, from: Coord, to: Coord },
    #[error("path revisits cell {cell} at position #{index}")]
    Repeated { index: usize, cell: Coord },
}

/// Checks that `path` is a valid start-to-goal walk over free cells of `map`,
/// reporting the first violation found.
pub fn verify_path(map: &GridMap, path: &Path) -> Result<(), PathViolation> {
    let cells = path.cells();
    if cells.is_empty() {
        return Err(PathViolation::Empty);
    }
    if cells[0] != map.start() {
        return Err(PathViolation::StartMismatch {
            found: cells[0],
            expected: map.start(),
        });
    }
    if *cells.last().unwrap() != map.goal() {
        return Err(PathViolation::GoalMismatch {
            found: *cells.last().unwrap(),
            expected: map.goal(),
        });
    }
    let mut seen = vec![false; map.cell_count()];
    for (index, &cell) in cells.iter().enumerate() {
        if !map.contains(cell) {
            return Err(PathViolation::OutOfBounds { index, cell });
        }
        if !map.is_free(cell) {
            return Err(PathViolation::Blocked { index, cell });
        }
        let flat = map.index(cell);
        if seen[flat] {
            return Err(PathViolation::Repeated { index, cell });
        }
        seen[flat] = true;
        if index > 0 {
            let from = cells[index - 1];
            let legal = match map.connectivity() {
                Connectivity::Four => from.manhattan(cell) == 1,
                Connectivity::Eight => from.chebyshev(cell) == 1,
            };
            if !legal {
                return Err(PathViolation::NotAdjacent {
                    index,
                    from,
                    to: cell,
                });
            }
        }
    }
    Ok(())
}

/// Total step cost of a path: 1.0 per axial step, sqrt(2) per diagonal step.
/// A single-cell path costs 0. Steps between non-adjacent cells are rejected.
pub fn path_cost(path: &Path) -> Result<f64, PathViolation> {
    let cells = path.cells();
    if cells.is_empty() {
        return Err(PathViolation::Empty);
    }
    let mut axial = 0u64;
    let mut diagonal = 0u64;
    for (index, pair) in cells.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        if from.chebyshev(to) != 1 {
            return Err(PathViolation::NotAdjacent {
                index: index + 1,
                from,
                to,
            });
        }
        if from.row != to.row && from.col != to.col {
            diagonal += 1;
        } else {
            axial += 1;
        }
    }
    Ok(axial as f64 + diagonal as f64 * SQRT_2)
}

/// Outcome of one planner invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// The found path, absent when the goal is unreachable.
    pub path: Option<Path>,
    /// Number of frontier extractions performed (stale entries excluded).
    pub iterations: u64,
    /// Wall-clock seconds spent in the search loop.
    pub planner_seconds: f64,
    /// Number of cells expanded; always equals `iterations`, kept explicit.
    pub expanded: u64,
}

/// Errors raised by the scene text format.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("malformed scene header: {0}")]
    MalformedHeader(String),
    #[error("scene body does not match header dimensions: {0}")]
    DimensionMismatch(String),
    #[error("unknown cell glyph {glyph:?} at row {row}, col {col}")]
    UnknownGlyph { glyph: char, row: usize, col: usize },
    #[error("scene has no start cell")]
    MissingStart,
    #[error("scene has no goal cell")]
    MissingGoal,
    #[error("scene declares more than one start cell")]
    DuplicateStart,
    #[error("scene declares more than one goal cell")]
    DuplicateGoal,
    #[error(transparent)]
    Map(#[from] GridError),
    #[error("malformed label section: {0}")]
    MalformedLabel(String),
    #[error("label path is invalid: {0}")]
    InvalidLabel(#[from] PathViolation),
    #[error("unexpected trailing content at line {0}")]
    TrailingContent(usize),
}

/// Renders a map (and optional label path) in the scene text format:
///
/// ```text
/// SCENE v1 <height> <width> <4|8>
/// <height rows of glyphs: '.' free, '#' blocked, 'S' start, 'G' goal,
///  'B' when start == goal>
/// PATH <n>          (optional label section)
/// <row> <col>       (n lines, path order)
/// ```
///
/// Every line is LF-terminated and the output is ASCII.
pub fn serialize_scene(map: &GridMap, label: Option<&Path>) -> String {
    let mut out = String::with_capacity((map.width() + 1) * (map.height() + 1) + 16);
    out.push_str(&format!(
        "SCENE v1 {} {} {}\n",
        map.height(),
        map.width(),
        map.connectivity()
    ));
    for row in 0..map.height() {
        for col in 0..map.width() {
            let cell = Coord::new(row, col);
            let glyph = if cell == map.start() && cell == map.goal() {
                'B'
            } else if cell == map.start() {
                'S'
            } else if cell == map.goal() {
                'G'
            } else {
                match map.cell(cell) {
                    Cell::Free => '.',
                    Cell::Blocked => '#',
                }
            };
            out.push(glyph);
        }
        out.push('\n');
    }
    if let Some(path) = label {
        out.push_str(&format!("PATH {}\n", path.len()));
        for cell in path.cells() {
            out.push_str(&format!("{} {}\n", cell.row, cell.col));
        }
    }
    out
}

/// Parses the scene text format produced by [`serialize_scene`].
///
/// Returns the map and the label path when a `PATH` section is present. The
/// label is fully validated against the map.
pub fn parse_scene(text: &str) -> Result<(GridMap, Option<Path>), SceneError> {
    let mut lines = text.split('\n').enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| SceneError::MalformedHeader("empty input".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "SCENE" || tokens[1] != "v1" {
        return Err(SceneError::MalformedHeader(format!(
            "expected `SCENE v1 <height> <width> <4|8>`, got {header:?}"
        )));
    }
    let height: usize = tokens[2]
        .parse()
        .map_err(|_| SceneError::MalformedHeader(format!("bad height {:?}", tokens[2])))?;
    let width: usize = tokens[3]
        .parse()
        .map_err(|_| SceneError::MalformedHeader(format!("bad width {:?}", tokens[3])))?;
    let connectivity = match tokens[4] {
        "4" => Connectivity::Four,
        "8" => Connectivity::Eight,
        other => {
            return Err(SceneError::MalformedHeader(format!(
                "bad connectivity {other:?}, expected 4 or 8"
            )))
        }
    };
    if height == 0 || width == 0 {
        return Err(SceneError::Map(GridError::EmptyMap { width, height }));
    }

    let mut cells = Vec::with_capacity(width * height);
    let mut start = None;
    let mut goal = None;
    for row in 0..height {
        let (_, line) = lines.next().ok_or_else(|| {
            SceneError::DimensionMismatch(format!("expected {height} rows, found {row}"))
        })?;
        let glyphs: Vec<char> = line.chars().collect();
        if glyphs.len() != width {
            return Err(SceneError::DimensionMismatch(format!(
                "row {row} has {} glyphs, expected {width}",
                glyphs.len()
            )));
        }
        for (col, glyph) in glyphs.into_iter().enumerate() {
            let cell = Coord::new(row, col);
            let state = match glyph {
                '.' => Cell::Free,
                '#' => Cell::Blocked,
                'S' => {
                    if start.replace(cell).is_some() {
                        return Err(SceneError::DuplicateStart);
                    }
                    Cell::Free
                }
                'G' => {
                    if goal.replace(cell).is_some() {
                        return Err(SceneError::DuplicateGoal);
                    }
                    Cell::Free
                }
                'B' => {
                    if start.replace(cell).is_some() {
                        return Err(SceneError::DuplicateStart);
                    }
                    if goal.replace(cell).is_some() {
                        return Err(SceneError::DuplicateGoal);
                    }
                    Cell::Free
                }
                other => {
                    return Err(SceneError::UnknownGlyph {
                        glyph: other,
                        row,
                        col,
                    })
                }
            };
            cells.push(state);
        }
    }
    let start = start.ok_or(SceneError::MissingStart)?;
    let goal = goal.ok_or(SceneError::MissingGoal)?;
    let map = GridMap::new(width, height, cells, start, goal, connectivity)?;

    // Optional label section, then nothing but trailing empty lines.
    let mut label: Option<Path> = None;
    while let Some((line_no, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        if label.is_some() {
            return Err(SceneError::TrailingContent(line_no + 1));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 || tokens[0] != "PATH" {
            return Err(SceneError::MalformedLabel(format!(
                "expected `PATH <n>`, got {line:?}"
            )));
        }
        let count: usize = tokens[1]
            .parse()
            .map_err(|_| SceneError::MalformedLabel(format!("bad path length {:?}", tokens[1])))?;
        let mut cells = Vec::with_capacity(count);
        for _ in 0..count {
            let (_, coord_line) = lines.next().ok_or_else(|| {
                SceneError::MalformedLabel(format!(
                    "expected {count} path cells, found {}",
                    cells.len()
                ))
            })?;
            let parts: Vec<&str> = coord_line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(SceneError::MalformedLabel(format!(
                    "expected `<row> <col>`, got {coord_line:?}"
                )));
            }
            let row: usize = parts[0]
                .parse()
                .map_err(|_| SceneError::MalformedLabel(format!("bad path row {:?}", parts[0])))?;
            let col: usize = parts[1]
                .parse()
                .map_err(|_| SceneError::MalformedLabel(format!("bad path col {:?}", parts[1])))?;
            cells.push(Coord::new(row, col));
        }
        let path = Path::new(cells);
        verify_path(&map, &path)?;
        label = Some(path);
    }

    Ok((map, label))
}
