//! Python bindings for the grid-planning and search-space-pruning toolkit:
//! scene generation and (de)serialization, the five planners, corridor and
//! learned-mask pruning with the soundness fallback, and encoder inference.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use pathprune::bench;
use pathprune::encoder::{load_params_file, save_params_file, EncoderConfig, EncoderError, Net};
use pathprune::grid::{
    parse_scene, path_cost, serialize_scene, Connectivity, Coord, GridMap, Path as GridPath,
};
use pathprune::planners::{run_planner, HeuristicKind, PlannerKind};
use pathprune::pruning::{corridor_oracle, postprocess_mask, PrunedScene};
use pathprune::scenario::{generate_scene, label_scene, FamilyKind, SceneFamily};

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn encoder_err(err: EncoderError) -> PyErr {
    match err {
        EncoderError::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_planner(name: &str) -> PyResult<PlannerKind> {
    name.parse().map_err(value_err)
}

fn parse_heuristic(map: &GridMap, name: Option<&str>) -> PyResult<HeuristicKind> {
    match name {
        Some(name) => name.parse().map_err(value_err),
        None => Ok(HeuristicKind::default_for(map.connectivity())),
    }
}

fn path_to_py(path: &GridPath) -> Vec<(usize, usize)> {
    path.cells().iter().map(|c| (c.row, c.col)).collect()
}

fn path_from_py(cells: &[(usize, usize)]) -> GridPath {
    GridPath::new(cells.iter().map(|&(r, c)| Coord::new(r, c)).collect())
}

/// A rectangular grid scene: obstacles, endpoints, connectivity, and
/// optionally a shortest-path label.
#[pyclass(frozen)]
struct Scene {
    map: GridMap,
    label: Option<GridPath>,
}

#[pymethods]
impl Scene {
    /// Parses the text scene format (header, glyph rows, optional PATH
    /// block).
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Scene> {
        let (map, label) = parse_scene(text).map_err(value_err)?;
        Ok(Scene { map, label })
    }

    /// Generates a random solvable scene from the named family.
    #[staticmethod]
    #[pyo3(signature = (kind, height, width, seed, density=0.25, connectivity=8))]
    fn generate(
        kind: &str,
        height: usize,
        width: usize,
        seed: u64,
        density: f64,
        connectivity: u8,
    ) -> PyResult<Scene> {
        let kind: FamilyKind = kind.parse().map_err(value_err)?;
        let family = SceneFamily::new(kind, density).map_err(value_err)?;
        let connectivity = Connectivity::try_from(connectivity).map_err(value_err)?;
        let map =
            generate_scene(&family, (height, width), connectivity, seed).map_err(value_err)?;
        Ok(Scene { map, label: None })
    }

    /// The scene serialized back to text, including the label if present.
    fn serialize(&self) -> String {
        serialize_scene(&self.map, self.label.as_ref())
    }

    /// A copy of this scene with a freshly computed shortest-path label.
    fn labeled(&self) -> PyResult<Scene> {
        let label = label_scene(&self.map).map_err(value_err)?;
        Ok(Scene {
            map: self.map.clone(),
            label: Some(label),
        })
    }

    #[getter]
    fn height(&self) -> usize {
        self.map.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.map.width()
    }

    #[getter]
    fn connectivity(&self) -> u8 {
        self.map.connectivity().as_u8()
    }

    #[getter]
    fn start(&self) -> (usize, usize) {
        (self.map.start().row, self.map.start().col)
    }

    #[getter]
    fn goal(&self) -> (usize, usize) {
        (self.map.goal().row, self.map.goal().col)
    }

    #[getter]
    fn label(&self) -> Option<Vec<(usize, usize)>> {
        self.label.as_ref().map(path_to_py)
    }

    /// Cost of the stored label path, if any.
    #[getter]
    fn label_cost(&self) -> PyResult<Option<f64>> {
        self.label
            .as_ref()
            .map(|p| path_cost(p).map_err(value_err))
            .transpose()
    }

    fn is_free(&self, row: usize, col: usize) -> PyResult<bool> {
        let coord = Coord::new(row, col);
        if !self.map.contains(coord) {
            return Err(value_err(format!("({row}, {col}) is out of bounds")));
        }
        Ok(self.map.is_free(coord))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene({}x{}, connectivity={}, start={:?}, goal={:?}, labeled={})",
            self.map.height(),
            self.map.width(),
            self.map.connectivity().as_u8(),
            self.start(),
            self.goal(),
            if self.label.is_some() { "True" } else { "False" }
        )
    }
}

/// Outcome of a single planner run.
#[pyclass(frozen)]
struct PlanOutcome {
    #[pyo3(get)]
    path: Option<Vec<(usize, usize)>>,
    #[pyo3(get)]
    cost: Option<f64>,
    #[pyo3(get)]
    iterations: u64,
    #[pyo3(get)]
    planner_seconds: f64,
    #[pyo3(get)]
    expanded: u64,
}

#[pymethods]
impl PlanOutcome {
    fn __repr__(&self) -> String {
        format!(
            "PlanOutcome(cost={:?}, iterations={}, expanded={})",
            self.cost, self.iterations, self.expanded
        )
    }
}

fn outcome(result: pathprune::grid::PlanResult) -> PyResult<PlanOutcome> {
    let cost = result
        .path
        .as_ref()
        .map(|p| path_cost(p).map_err(value_err))
        .transpose()?;
    Ok(PlanOutcome {
        path: result.path.as_ref().map(path_to_py),
        cost,
        iterations: result.iterations,
        planner_seconds: result.planner_seconds,
        expanded: result.expanded,
    })
}

/// Runs one of the planners ("dijkstra", "astar", "bi_astar",
/// "breadth_first", "best_first") over a scene.
#[pyfunction]
#[pyo3(signature = (scene, planner="astar", heuristic=None))]
fn plan(scene: &Scene, planner: &str, heuristic: Option<&str>) -> PyResult<PlanOutcome> {
    let kind = parse_planner(planner)?;
    let h = parse_heuristic(&scene.map, heuristic)?;
    outcome(run_planner(kind, &scene.map, h).map_err(value_err)?)
}

/// A scene with a keep/discard decision per cell, ready to plan on.
#[pyclass(frozen)]
struct Pruned {
    inner: PrunedScene,
    encoder_seconds: f64,
    preprocess_seconds: f64,
}

#[pymethods]
impl Pruned {
    #[getter]
    fn kept_count(&self) -> usize {
        self.inner.kept_count()
    }

    fn kept(&self, row: usize, col: usize) -> PyResult<bool> {
        let coord = Coord::new(row, col);
        if !self.inner.base().contains(coord) {
            return Err(value_err(format!("({row}, {col}) is out of bounds")));
        }
        Ok(self.inner.kept()[self.inner.base().index(coord)])
    }

    fn __repr__(&self) -> String {
        format!(
            "Pruned(kept={}/{} cells)",
            self.inner.kept_count(),
            self.inner.base().cell_count()
        )
    }
}

/// Keeps only the free cells within Chebyshev `radius` of the scene's label
/// path (the idealized pruner). The scene must carry a label, or one is
/// computed.
#[pyfunction]
#[pyo3(signature = (scene, radius=2))]
fn prune_corridor(scene: &Scene, radius: usize) -> PyResult<Pruned> {
    let computed;
    let label = match &scene.label {
        Some(label) => label,
        None => {
            computed = label_scene(&scene.map).map_err(value_err)?;
            &computed
        }
    };
    let start = std::time::Instant::now();
    let inner = corridor_oracle(&scene.map, label, radius).map_err(value_err)?;
    Ok(Pruned {
        inner,
        encoder_seconds: 0.0,
        preprocess_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of planning on a pruned scene, with the fallback flag and the
/// pipeline timing breakdown.
#[pyclass(frozen)]
struct PrunedOutcome {
    #[pyo3(get)]
    path: Option<Vec<(usize, usize)>>,
    #[pyo3(get)]
    cost: Option<f64>,
    #[pyo3(get)]
    iterations: u64,
    #[pyo3(get)]
    used_fallback: bool,
    #[pyo3(get)]
    planner_seconds: f64,
    #[pyo3(get)]
    encoder_seconds: f64,
    #[pyo3(get)]
    preprocess_seconds: f64,
    #[pyo3(get)]
    total_seconds: f64,
}

#[pymethods]
impl PrunedOutcome {
    fn __repr__(&self) -> String {
        format!(
            "PrunedOutcome(cost={:?}, iterations={}, used_fallback={})",
            self.cost, self.iterations, self.used_fallback
        )
    }
}

/// Plans on the pruned search space, falling back to the full map if the
/// kept set severs every route.
#[pyfunction]
#[pyo3(signature = (pruned, planner="astar", heuristic=None))]
fn run_pruned(pruned: &Pruned, planner: &str, heuristic: Option<&str>) -> PyResult<PrunedOutcome> {
    let kind = parse_planner(planner)?;
    let h = parse_heuristic(pruned.inner.base(), heuristic)?;
    let run = pathprune::pruning::run_pruned(
        kind,
        h,
        &pruned.inner,
        pruned.encoder_seconds,
        pruned.preprocess_seconds,
    )
    .map_err(value_err)?;
    let cost = run
        .result
        .path
        .as_ref()
        .map(|p| path_cost(p).map_err(value_err))
        .transpose()?;
    Ok(PrunedOutcome {
        path: run.result.path.as_ref().map(path_to_py),
        cost,
        iterations: run.result.iterations,
        used_fallback: run.used_fallback,
        planner_seconds: run.result.planner_seconds,
        encoder_seconds: run.encoder_seconds,
        preprocess_seconds: run.preprocess_seconds,
        total_seconds: run.total_seconds,
    })
}

/// The convolutional per-cell scorer used for learned pruning.
#[pyclass(frozen)]
struct Encoder {
    net: Net<f32>,
}

#[pymethods]
impl Encoder {
    /// Loads trained weights from the binary tensor format.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Encoder> {
        let (_, net) = load_params_file(&path).map_err(encoder_err)?;
        Ok(Encoder { net })
    }

    /// A freshly initialized (untrained) scorer; useful for pipeline tests.
    #[staticmethod]
    #[pyo3(signature = (height, width, divisor=4, seed=0))]
    fn init(height: usize, width: usize, divisor: usize, seed: u64) -> PyResult<Encoder> {
        let cfg = EncoderConfig::new(height, width, divisor).map_err(encoder_err)?;
        Ok(Encoder {
            net: Net::init(cfg, seed),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_params_file(&self.net, &path).map_err(encoder_err)
    }

    #[getter]
    fn height(&self) -> usize {
        self.net.cfg.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.net.cfg.width()
    }

    #[getter]
    fn channel_divisor(&self) -> usize {
        self.net.cfg.channel_divisor()
    }

    /// Per-cell scores in [-1, 1] as a list of rows.
    fn mask(&self, scene: &Scene) -> PyResult<Vec<Vec<f32>>> {
        let mask = self.net.mask(&scene.map).map_err(encoder_err)?;
        Ok(mask.rows().into_iter().map(|row| row.to_vec()).collect())
    }

    /// Thresholds and dilates the scorer's mask into a pruned scene.
    #[pyo3(signature = (scene, threshold=0.0, dilation=1))]
    fn prune(&self, scene: &Scene, threshold: f32, dilation: usize) -> PyResult<Pruned> {
        let start = std::time::Instant::now();
        let mask = self.net.mask(&scene.map).map_err(encoder_err)?;
        let encoder_seconds = start.elapsed().as_secs_f64();
        let start = std::time::Instant::now();
        let inner =
            postprocess_mask(&mask, &scene.map, threshold, dilation).map_err(value_err)?;
        Ok(Pruned {
            inner,
            encoder_seconds,
            preprocess_seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Encoder({}x{}, divisor={})",
            self.net.cfg.height(),
            self.net.cfg.width(),
            self.net.cfg.channel_divisor()
        )
    }
}

/// Percentage saved by `treated` relative to `base`:
/// (base − treated) / base × 100.
#[pyfunction]
fn improvement(base: f64, treated: f64) -> PyResult<f64> {
    bench::improvement(base, treated).map_err(value_err)
}

/// Cost of a path given as (row, col) pairs over a scene; validates
/// adjacency and obstacles.
#[pyfunction]
fn check_path(scene: &Scene, cells: Vec<(usize, usize)>) -> PyResult<f64> {
    let path = path_from_py(&cells);
    pathprune::grid::verify_path(&scene.map, &path).map_err(value_err)?;
    path_cost(&path).map_err(value_err)
}

#[pymodule]
fn pathprune_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scene>()?;
    m.add_class::<PlanOutcome>()?;
    m.add_class::<Pruned>()?;
    m.add_class::<PrunedOutcome>()?;
    m.add_class::<Encoder>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(prune_corridor, m)?)?;
    m.add_function(wrap_pyfunction!(run_pruned, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(check_path, m)?)?;
    m.add(
        "PLANNERS",
        PlannerKind::ALL.map(|k| k.name()).to_vec(),
    )?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
