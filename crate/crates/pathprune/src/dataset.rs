//! Dataset materialization: generates labeled scenes to disk and records
//! them in a JSON manifest with train/validation/test splits.
//!
//! Per-scene seeds are `dataset_seed XOR global_index`, so scenes are
//! independent of each other and of how many there are. Split membership is
//! decided by ranking indices under a seeded hash, so it is stable across
//! re-runs and a scene never migrates between splits when the build is
//! repeated. Both properties together make `build_dataset` a pure function
//! of its config: re-running produces byte-identical files.

use std::fs;
use std::path::{Path as StdPath, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{parse_scene, serialize_scene, Connectivity, GridMap, Path, SceneError};
use crate::scenario::{generate_scene, label_scene, FamilyKind, SceneFamily, ScenarioError};

/// Errors from building or loading datasets.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset config invalid: {0}")]
    InvalidConfig(String),
    #[error("failed to generate scene {index} ({path}): {source}")]
    Generation {
        index: usize,
        path: String,
        #[source]
        source: ScenarioError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("{path} has no label")]
    MissingLabel { path: PathBuf },
    #[error("manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown split `{0}` (expected train, val, or test)")]
    UnknownSplit(String),
}

/// One family plus how many scenes of it to generate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub family: SceneFamily,
    pub count: usize,
}

/// Everything `build_dataset` needs; also embedded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    /// (height, width) of every scene.
    pub size: (usize, usize),
    pub connectivity: Connectivity,
    /// (train, val, test) fractions; must sum to 1.
    pub fractions: (f64, f64, f64),
    pub families: Vec<FamilySpec>,
}

/// The default 80/10/10 split.
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

impl DatasetConfig {
    pub fn total_scenes(&self) -> usize {
        self.families.iter().map(|spec| spec.count).sum()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let (train, val, test) = self.fractions;
        for fraction in [train, val, test] {
            if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
                return Err(DatasetError::InvalidConfig(format!(
                    "split fraction {fraction} outside [0, 1]"
                )));
            }
        }
        if (train + val + test - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidConfig(format!(
                "split fractions ({train}, {val}, {test}) do not sum to 1"
            )));
        }
        if self.total_scenes() == 0 {
            return Err(DatasetError::InvalidConfig(
                "config generates no scenes".to_string(),
            ));
        }
        for spec in &self.families {
            spec.family
                .validate()
                .map_err(|e| DatasetError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

/// The three dataset splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|split| split.name() == s)
            .ok_or_else(|| DatasetError::UnknownSplit(s.to_string()))
    }
}

/// Scene file paths per split, relative to the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPaths {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// The on-disk record of a built dataset: the generating config plus the
/// split membership of every scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub size: (usize, usize),
    pub connectivity: Connectivity,
    pub fractions: (f64, f64, f64),
    pub families: Vec<FamilySpec>,
    pub splits: SplitPaths,
    /// Directory the relative paths resolve against; set on load, not stored.
    #[serde(skip)]
    pub root: PathBuf,
}

/// A scene loaded back from disk together with its ground-truth path.
#[derive(Debug, Clone)]
pub struct LabeledScene {
    pub path: PathBuf,
    pub map: GridMap,
    pub label: Path,
}

impl DatasetManifest {
    pub fn relative_paths(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        }
    }

    pub fn scene_paths(&self, split: Split) -> Vec<PathBuf> {
        self.relative_paths(split)
            .iter()
            .map(|rel| self.root.join(rel))
            .collect()
    }

    /// Loads and re-validates every scene of a split (the parser verifies
    /// labels); scenes come back in generation order.
    pub fn load_split(&self, split: Split) -> Result<Vec<LabeledScene>, DatasetError> {
        self.scene_paths(split)
            .into_iter()
            .map(|path| {
                let text = fs::read_to_string(&path).map_err(|source| DatasetError::Io {
                    path: path.clone(),
                    source,
                })?;
                let (map, label) = parse_scene(&text).map_err(|source| DatasetError::Scene {
                    path: path.clone(),
                    source,
                })?;
                let label = label.ok_or_else(|| DatasetError::MissingLabel { path: path.clone() })?;
                Ok(LabeledScene { path, map, label })
            })
            .collect()
    }
}

/// Recovers the scene family from a dataset file name like
/// `scenes/scatter_00012.txt`.
pub fn family_from_path(path: &StdPath) -> Option<FamilyKind> {
    let stem = path.file_stem()?.to_str()?;
    let (kind, _) = stem.rsplit_once('_')?;
    kind.parse().ok()
}

/// SplitMix64 finalizer; decorates indices into well-mixed ranking keys.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Exact split sizes: train and val round down, test takes the remainder.
pub(crate) fn split_counts(total: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let train = (fractions.0 * total as f64).floor() as usize;
    let val = (fractions.1 * total as f64).floor() as usize;
    (train, val, total - train - val)
}

/// Generates, labels, and writes every scene plus `manifest.json` under
/// `out_dir`. Deterministic: the same config always produces byte-identical
/// files and the same split assignment.
pub fn build_dataset(
    config: &DatasetConfig,
    out_dir: &StdPath,
) -> Result<DatasetManifest, DatasetError> {
    config.validate()?;
    let scenes_dir = out_dir.join("scenes");
    fs::create_dir_all(&scenes_dir).map_err(|source| DatasetError::Io {
        path: scenes_dir.clone(),
        source,
    })?;

    let total = config.total_scenes();
    let mut rel_paths = Vec::with_capacity(total);
    let mut index = 0usize;
    for spec in &config.families {
        for _ in 0..spec.count {
            let rel = format!("scenes/{}_{index:05}.txt", spec.family.kind);
            let scene_seed = config.seed ^ index as u64;
            let map = generate_scene(&spec.family, config.size, config.connectivity, scene_seed)
                .map_err(|source| DatasetError::Generation {
                    index,
                    path: rel.clone(),
                    source,
                })?;
            let label = label_scene(&map).map_err(|source| DatasetError::Generation {
                index,
                path: rel.clone(),
                source,
            })?;
            let abs = out_dir.join(&rel);
            fs::write(&abs, serialize_scene(&map, Some(&label))).map_err(|source| {
                DatasetError::Io { path: abs, source }
            })?;
            rel_paths.push(rel);
            index += 1;
        }
    }

    // Rank indices under a seeded hash and cut the ranking at the exact
    // split sizes; within each split, scenes keep generation order.
    let (n_train, n_val, _) = split_counts(total, config.fractions);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by_key(|&i| (splitmix64(config.seed ^ splitmix64(i as u64)), i));
    let mut split_of = vec![Split::Test; total];
    for (rank, &i) in order.iter().enumerate() {
        split_of[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    let mut splits = SplitPaths::default();
    for (i, rel) in rel_paths.into_iter().enumerate() {
        match split_of[i] {
            Split::Train => splits.train.push(rel),
            Split::Val => splits.val.push(rel),
            Split::Test => splits.test.push(rel),
        }
    }

    let manifest = DatasetManifest {
        seed: config.seed,
        size: config.size,
        connectivity: config.connectivity,
        fractions: config.fractions,
        families: config.families.clone(),
        splits,
        root: out_dir.to_path_buf(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|source| DatasetError::Json {
        path: manifest_path.clone(),
        source,
    })?;
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|source| DatasetError::Io {
        path: manifest_path,
        source,
    })?;
    Ok(manifest)
}

/// Reads a manifest back; relative paths resolve against the manifest's
/// directory.
pub fn load_manifest(path: &StdPath) -> Result<DatasetManifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    manifest.root = path.parent().unwrap_or(StdPath::new(".")).to_path_buf();
    Ok(manifest)
}
