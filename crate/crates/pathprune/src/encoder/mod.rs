//! A trainable convolutional encoder that scores every cell of a scene by
//! how useful it is for routing between the start and the goal.
//!
//! The network consumes a three-channel binary image of the scene
//! (occupancy, start one-hot, goal one-hot) and emits one tanh-bounded score
//! per cell; positive scores mark cells worth keeping in a reduced search
//! space. Everything is implemented here directly: convolution runs as
//! im2col plus one matrix multiply per layer, training uses adaptive-moment
//! gradient descent, and the backward pass is verifiable against central
//! finite differences ([`grad_check`]).

mod gradcheck;
mod io;
mod layers;
mod net;
mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use io::{history_csv, load_params, load_params_file, save_params, save_params_file};
pub use layers::DropoutMasks;
pub use net::{EncoderConfig, Net};
pub use train::{
    evaluate, prepare_samples, train, train_net, train_net_with, train_with, EpochStats,
    Evaluation, Sample, TrainConfig, Trained,
};

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::grid::{Cell, GridMap, Path};

/// Scalar the network can run on: `f32` for real use, `f64` for
/// finite-difference verification of the backward pass.
pub trait Real: ndarray::NdFloat {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Negative-side slope of the dense layers' leaky rectifier.
pub const LEAKY_ALPHA: f64 = 0.01;
/// Keep probability implementing the stack's 30% dropout.
pub const KEEP_PROBABILITY: f64 = 0.7;

/// Errors from configuration, training, and weight persistence.
#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("encoder config invalid: {0}")]
    InvalidConfig(String),
    #[error("input is {got_height}x{got_width} but the encoder expects {want_height}x{want_width}")]
    SizeMismatch {
        got_height: usize,
        got_width: usize,
        want_height: usize,
        want_width: usize,
    },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("weights file: bad magic (expected PPENC1)")]
    BadMagic,
    #[error("weights file: unexpected end of weights")]
    UnexpectedEof,
    #[error("weights file: tensor `{name}` has shape {got:?}, expected {want:?}")]
    TensorShape {
        name: String,
        got: Vec<usize>,
        want: Vec<usize>,
    },
    #[error("weights file: unexpected tensor `{0}`")]
    UnknownTensor(String),
    #[error("weights file: missing tensor `{0}`")]
    MissingTensor(&'static str),
    #[error("weights file: trailing bytes after the last tensor")]
    TrailingBytes,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A per-cell score grid in [-1, 1]; positive cells are keep candidates.
pub type MaskGrid = Array2<f32>;

/// Encodes a scene as the network input: shape `(3, height*width)` with
/// channel 0 = occupancy (1 blocked, 0 free), channel 1 = start one-hot,
/// channel 2 = goal one-hot.
pub fn encode_input<F: Real>(map: &GridMap) -> Array2<F> {
    let s = map.cell_count();
    let mut x = Array2::zeros((3, s));
    for (i, &cell) in map.cells().iter().enumerate() {
        if cell == Cell::Blocked {
            x[[0, i]] = F::one();
        }
    }
    x[[1, map.index(map.start())]] = F::one();
    x[[2, map.index(map.goal())]] = F::one();
    x
}

/// The regression target: +1 on the label path's cells, -1 everywhere else,
/// matching the tanh output range.
pub fn target_mask<F: Real>(map: &GridMap, label: &Path) -> Array1<F> {
    let mut t = Array1::from_elem(map.cell_count(), -F::one());
    for &cell in label.cells() {
        t[map.index(cell)] = F::one();
    }
    t
}

/// Mean squared error over all cells of all samples in the batch.
/// `pred` and `target` are `(cells, batch)`.
pub fn mse_loss<F: Real>(pred: &Array2<F>, target: &Array2<F>) -> F {
    debug_assert_eq!(pred.dim(), target.dim());
    let n = F::from_f64((pred.len()) as f64);
    let mut acc = F::zero();
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        acc += d * d;
    }
    acc / n
}

/// Gradient of [`mse_loss`] with respect to `pred`.
pub fn mse_grad<F: Real>(pred: &Array2<F>, target: &Array2<F>) -> Array2<F> {
    let scale = F::from_f64(2.0 / pred.len() as f64);
    let mut g = pred - target;
    g.mapv_inplace(|v| v * scale);
    g
}
