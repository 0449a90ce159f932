//! Finite-difference verification of the full backward pass.
//!
//! Runs the training-mode forward (batch statistics, frozen dropout masks)
//! in f64 and compares analytic parameter gradients against central
//! differences at coordinates spread evenly across every tensor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::DropoutMasks;
use super::net::{EncoderConfig, Net};
use super::train::{assemble, Sample};
use super::{mse_grad, mse_loss, KEEP_PROBABILITY};

/// Step for the central differences. With losses of order one, f64 noise on
/// the quotient stays around 1e-12 — far below the acceptance threshold.
const STEP: f64 = 1e-4;

/// A coordinate is only scored when the estimates at `STEP` and `STEP / 10`
/// agree this closely. Rectifier and pooling kinks inside the probed
/// interval make a central difference measure the average slope across the
/// kink rather than the derivative; such coordinates say nothing about the
/// backward pass and are skipped. A wrong analytic gradient cannot hide
/// behind this guard: the two probes agree with each other at smooth points
/// regardless of what the backward pass returns.
const SMOOTHNESS_TOL: f64 = 5e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Worst relative error |numeric - analytic| / max(|n| + |a|, 1e-8).
    pub max_rel_err: f64,
    pub coords_checked: usize,
    /// Coordinates whose probe interval straddled a kink (see
    /// [`SMOOTHNESS_TOL`]); excluded from the error statistics.
    pub coords_skipped: usize,
    /// Tensor holding the worst coordinate, for diagnostics.
    pub worst_tensor: &'static str,
}

fn add_at(net: &mut Net<f64>, tensor: usize, index: usize, delta: f64) {
    let mut params = net.params_mut();
    let slice = params[tensor]
        .1
        .as_slice_mut()
        .expect("parameters are contiguous");
    slice[index] += delta;
}

/// Checks the analytic gradient of the batch loss at `coords` coordinates
/// (at least one per tensor, capped by tensor size).
///
/// Use several samples: normalization statistics over a batch of two are
/// nearly sign functions of their inputs, which conditions the loss so
/// badly that finite differences fail; around eight samples keeps the
/// landscape smooth at the probe scale.
pub fn grad_check(
    cfg: &EncoderConfig,
    samples: &[Sample<f64>],
    with_dropout: bool,
    seed: u64,
    coords: usize,
) -> GradCheckReport {
    assert!(samples.len() >= 2, "need at least two samples");
    let mut net = Net::<f64>::init(*cfg, seed);
    let (x, target) = assemble(samples, cfg.out_dim());
    let keep = if with_dropout { KEEP_PROBABILITY } else { 1.0 };
    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let masks = DropoutMasks::generate(cfg.dropout_shapes(samples.len()), keep, &mut mask_rng);

    let trace = net.train_forward(&x, &masks);
    let dy = mse_grad(&trace.y, &target);
    let analytic = net.backward(&trace, &masks, &dy);

    let central = |net: &mut Net<f64>, tensor: usize, index: usize, h: f64| {
        add_at(net, tensor, index, h);
        let plus = mse_loss(&net.train_forward(&x, &masks).y, &target);
        add_at(net, tensor, index, -2.0 * h);
        let minus = mse_loss(&net.train_forward(&x, &masks).y, &target);
        add_at(net, tensor, index, h);
        (plus - minus) / (2.0 * h)
    };

    let tensor_count = analytic.len();
    let per_tensor = coords.div_ceil(tensor_count).max(1);
    let mut max_rel_err: f64 = 0.0;
    let mut coords_checked = 0;
    let mut coords_skipped = 0;
    let mut worst_tensor = "";
    for (tensor, (name, grads)) in analytic.iter().enumerate() {
        let len = grads.len();
        let k = per_tensor.min(len);
        for j in 0..k {
            let index = j * len / k;
            let a = grads.as_slice().expect("gradients are contiguous")[index];
            let n = central(&mut net, tensor, index, STEP);
            let n_fine = central(&mut net, tensor, index, STEP / 10.0);
            let agreement = (n - n_fine).abs() / (n.abs() + n_fine.abs()).max(1e-8);
            if agreement > SMOOTHNESS_TOL {
                coords_skipped += 1;
                continue;
            }
            let rel = (n - a).abs() / (n.abs() + a.abs()).max(1e-8);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_tensor = name;
            }
            coords_checked += 1;
        }
    }
    GradCheckReport {
        max_rel_err,
        coords_checked,
        coords_skipped,
        worst_tensor,
    }
}
