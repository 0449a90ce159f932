//! Mini-batch training of the encoder: Adam on mean-squared error against
//! the ±1 shortest-path masks, with per-epoch validation loss and recall.

use ndarray::{s, Array1, Array2, ArrayD, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::DropoutMasks;
use super::net::{EncoderConfig, Net};
use super::{encode_input, mse_grad, mse_loss, target_mask, EncoderError, Real, KEEP_PROBABILITY};
use crate::dataset::{DatasetManifest, LabeledScene, Split};

/// Optimization hyper-parameters. The defaults are the ones every shipped
/// model was trained with; override per run as needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub keep_probability: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            keep_probability: KEEP_PROBABILITY,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is allowed (useful for statistics-only passes);
    /// negative or non-finite values are not.
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |msg: String| Err(EncoderError::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning rate {} must be >= 0", self.learning_rate));
        }
        for (name, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&value) {
                return bad(format!("{name} {value} must be in [0, 1)"));
            }
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return bad(format!("epsilon {} must be > 0", self.epsilon));
        }
        if !(self.keep_probability > 0.0 && self.keep_probability <= 1.0) {
            return bad(format!(
                "keep probability {} must be in (0, 1]",
                self.keep_probability
            ));
        }
        Ok(())
    }
}

/// A scene ready for the network: encoded input, ±1 target, and the label
/// path's cell indices (for recall).
#[derive(Debug, Clone)]
pub struct Sample<F> {
    pub input: Array2<F>,
    pub target: Array1<F>,
    pub path_cells: Vec<usize>,
}

/// Encodes labelled scenes, rejecting any whose size does not match the
/// network's.
pub fn prepare_samples<F: Real>(
    scenes: &[LabeledScene],
    cfg: &EncoderConfig,
) -> Result<Vec<Sample<F>>, EncoderError> {
    scenes
        .iter()
        .map(|scene| {
            if scene.map.height() != cfg.height() || scene.map.width() != cfg.width() {
                return Err(EncoderError::SizeMismatch {
                    got_height: scene.map.height(),
                    got_width: scene.map.width(),
                    want_height: cfg.height(),
                    want_width: cfg.width(),
                });
            }
            Ok(Sample {
                input: encode_input(&scene.map),
                target: target_mask(&scene.map, &scene.label),
                path_cells: scene
                    .label
                    .cells()
                    .iter()
                    .map(|&c| scene.map.index(c))
                    .collect(),
            })
        })
        .collect()
}

/// Mean loss and mean per-sample recall over an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Fraction of true path cells scored positive, averaged over samples.
    pub recall: f64,
}

/// Inference-mode evaluation, batched for throughput.
pub fn evaluate<F: Real>(net: &Net<F>, samples: &[Sample<F>], batch_size: usize) -> Evaluation {
    assert!(batch_size > 0, "batch size must be at least 1");
    let cells = net.cfg.out_dim();
    let mut loss_sum = 0.0;
    let mut recall_sum = 0.0;
    for chunk in samples.chunks(batch_size) {
        let (x, target) = assemble(chunk, cells);
        let y = net.infer_batch(&x);
        loss_sum += mse_loss(&y, &target).to_f64() * chunk.len() as f64;
        for (i, sample) in chunk.iter().enumerate() {
            let hits = sample
                .path_cells
                .iter()
                .filter(|&&cell| y[[cell, i]] > F::zero())
                .count();
            recall_sum += hits as f64 / sample.path_cells.len() as f64;
        }
    }
    let n = samples.len() as f64;
    Evaluation {
        loss: loss_sum / n,
        recall: recall_sum / n,
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_recall: f64,
}

/// A trained network together with its per-epoch history.
pub struct Trained<F> {
    pub net: Net<F>,
    pub history: Vec<EpochStats>,
}

/// Stacks a chunk of samples into network input `(3, batch*cells)` and
/// target `(cells, batch)` matrices.
pub(super) fn assemble<F: Real>(chunk: &[Sample<F>], cells: usize) -> (Array2<F>, Array2<F>) {
    let b = chunk.len();
    let mut x = Array2::zeros((3, b * cells));
    let mut target = Array2::zeros((cells, b));
    for (i, sample) in chunk.iter().enumerate() {
        x.slice_mut(s![.., i * cells..(i + 1) * cells])
            .assign(&sample.input);
        target.column_mut(i).assign(&sample.target);
    }
    (x, target)
}

struct Adam<F> {
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
    t: i32,
}

impl<F: Real> Adam<F> {
    fn new(net: &Net<F>) -> Self {
        let m: Vec<ArrayD<F>> = net
            .params()
            .iter()
            .map(|(_, p)| ArrayD::zeros(p.raw_dim()))
            .collect();
        Adam {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    /// One bias-corrected update across all parameters; `grads` must be in
    /// [`Net::params`] order.
    fn step(&mut self, net: &mut Net<F>, grads: &[(&'static str, ArrayD<F>)], cfg: &TrainConfig) {
        self.t += 1;
        let b1 = F::from_f64(cfg.beta1);
        let b2 = F::from_f64(cfg.beta2);
        let one = F::one();
        let lr = F::from_f64(cfg.learning_rate);
        let eps = F::from_f64(cfg.epsilon);
        let bc1 = F::from_f64(1.0 - cfg.beta1.powi(self.t));
        let bc2 = F::from_f64(1.0 - cfg.beta2.powi(self.t));
        for (i, (_, mut param)) in net.params_mut().into_iter().enumerate() {
            let g = &grads[i].1;
            Zip::from(&mut self.m[i])
                .and(g)
                .for_each(|m, &g| *m = b1 * *m + (one - b1) * g);
            Zip::from(&mut self.v[i])
                .and(g)
                .for_each(|v, &g| *v = b2 * *v + (one - b2) * g * g);
            Zip::from(&mut param)
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|p, &m, &v| {
                    *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                });
        }
    }
}

/// Trains `net` on the given samples. One RNG seeded from the config drives
/// everything stochastic (epoch shuffles, then each batch's dropout masks),
/// so runs are exactly reproducible.
pub fn train_net<F: Real>(
    net: Net<F>,
    train_samples: &[Sample<F>],
    val_samples: &[Sample<F>],
    cfg: &TrainConfig,
) -> Result<Trained<F>, EncoderError> {
    train_net_with(net, train_samples, val_samples, cfg, |_| {})
}

/// [`train_net`] with a per-epoch observer, e.g. for progress output.
pub fn train_net_with<F: Real>(
    mut net: Net<F>,
    train_samples: &[Sample<F>],
    val_samples: &[Sample<F>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Trained<F>, EncoderError> {
    cfg.validate()?;
    if train_samples.is_empty() {
        return Err(EncoderError::EmptySplit("train"));
    }
    if val_samples.is_empty() {
        return Err(EncoderError::EmptySplit("val"));
    }
    let cells = net.cfg.out_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&net);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_weighted = 0.0;
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let picked: Vec<Sample<F>> = batch
                .iter()
                .map(|&idx| train_samples[idx].clone())
                .collect();
            let (x, target) = assemble(&picked, cells);
            let masks = DropoutMasks::generate(
                net.cfg.dropout_shapes(batch.len()),
                cfg.keep_probability,
                &mut rng,
            );
            let trace = net.train_forward(&x, &masks);
            let loss = mse_loss(&trace.y, &target).to_f64();
            if !loss.is_finite() {
                return Err(EncoderError::Divergence {
                    epoch,
                    batch: batch_index + 1,
                });
            }
            loss_weighted += loss * batch.len() as f64;
            let dy = mse_grad(&trace.y, &target);
            let grads = net.backward(&trace, &masks, &dy);
            adam.step(&mut net, &grads, cfg);
            net.update_running_stats(&trace);
        }
        let val = evaluate(&net, val_samples, cfg.batch_size);
        let stats = EpochStats {
            epoch,
            train_loss: loss_weighted / train_samples.len() as f64,
            val_loss: val.loss,
            val_recall: val.recall,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(Trained { net, history })
}

/// End-to-end training from a dataset manifest: loads the train and val
/// splits, encodes them, and trains a freshly initialized f32 network.
pub fn train(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    encoder: &EncoderConfig,
) -> Result<Trained<f32>, EncoderError> {
    train_with(manifest, cfg, encoder, |_| {})
}

/// [`train`] with a per-epoch observer, e.g. for progress output.
pub fn train_with(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    encoder: &EncoderConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<Trained<f32>, EncoderError> {
    cfg.validate()?;
    let train_scenes = manifest.load_split(Split::Train)?;
    let val_scenes = manifest.load_split(Split::Val)?;
    if train_scenes.is_empty() {
        return Err(EncoderError::EmptySplit("train"));
    }
    if val_scenes.is_empty() {
        return Err(EncoderError::EmptySplit("val"));
    }
    let train_samples = prepare_samples::<f32>(&train_scenes, encoder)?;
    let val_samples = prepare_samples::<f32>(&val_scenes, encoder)?;
    let net = Net::init(*encoder, cfg.seed);
    train_net_with(net, &train_samples, &val_samples, cfg, on_epoch)
}
