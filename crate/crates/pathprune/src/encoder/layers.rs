//! Layer primitives with explicit forward and backward passes.
//!
//! All activations travel in feature-major 2D arrays: convolutional tensors
//! are `(channels, batch*positions)` and dense tensors are `(features,
//! batch)`, so batch normalization always reduces along axis 1 and every
//! matrix product is a single GEMM.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Real, LEAKY_ALPHA};

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
/// Values are drawn in f64 so the sequence is scalar-type independent.
fn fan_in_uniform<F: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<F> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| F::from_f64(rng.random_range(-bound..bound)))
}

/// 3x3 convolution, stride 1, zero ("same") padding, on a fixed spatial size.
#[derive(Clone)]
pub struct Conv<F> {
    /// `(c_out, c_in * 9)`, one flattened 3x3 kernel block per input channel.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub c_in: usize,
    pub c_out: usize,
    pub height: usize,
    pub width: usize,
}

impl<F: Real> Conv<F> {
    pub fn init(c_in: usize, c_out: usize, height: usize, width: usize, rng: &mut ChaCha8Rng) -> Self {
        Conv {
            weight: fan_in_uniform(rng, c_out, c_in * 9, c_in * 9),
            bias: Array1::zeros(c_out),
            c_in,
            c_out,
            height,
            width,
        }
    }

    /// Unfolds `(c_in, batch*h*w)` into the patch matrix `(c_in*9, batch*h*w)`
    /// whose column j holds the zero-padded 3x3 patch around position j.
    fn im2col(&self, x: &Array2<F>, batch: usize) -> Array2<F> {
        let (h, w) = (self.height, self.width);
        let s = h * w;
        let mut col = Array2::zeros((self.c_in * 9, batch * s));
        // Callers may pass arrays with unusual strides (e.g. concatenated
        // batches); the row-slice fast path below needs contiguous rows.
        let x = x.as_standard_layout();
        for ci in 0..self.c_in {
            let x_row = x.row(ci);
            let x_row = x_row.as_slice().expect("standard layout");
            for kr in 0..3usize {
                // Output rows r where the tap r+kr-1 stays inside [0, h).
                let r_lo = 1usize.saturating_sub(kr);
                let r_hi = (h + 1 - kr).min(h);
                for kc in 0..3usize {
                    let c_lo = 1usize.saturating_sub(kc);
                    let c_hi = (w + 1 - kc).min(w);
                    if c_lo >= c_hi {
                        continue;
                    }
                    let len = c_hi - c_lo;
                    let mut out_row = col.row_mut(ci * 9 + kr * 3 + kc);
                    let out_row = out_row.as_slice_mut().expect("standard layout");
                    for b in 0..batch {
                        for r in r_lo..r_hi {
                            let src = b * s + (r + kr - 1) * w + (c_lo + kc - 1);
                            let dst = b * s + r * w + c_lo;
                            out_row[dst..dst + len].copy_from_slice(&x_row[src..src + len]);
                        }
                    }
                }
            }
        }
        col
    }

    /// Returns the output `(c_out, batch*h*w)` and the patch matrix, which
    /// the backward pass reuses.
    pub fn forward(&self, x: &Array2<F>, batch: usize) -> (Array2<F>, Array2<F>) {
        let col = self.im2col(x, batch);
        let mut y = self.weight.dot(&col);
        y += &self.bias.view().insert_axis(Axis(1));
        (y, col)
    }

    /// Returns `(dx, dweight, dbias)`.
    pub fn backward(
        &self,
        col: &Array2<F>,
        dy: &Array2<F>,
        batch: usize,
    ) -> (Array2<F>, Array2<F>, Array1<F>) {
        let dw = dy.dot(&col.t());
        let db = dy.sum_axis(Axis(1));
        let dcol = self.weight.t().dot(dy);
        // Fold the patch gradients back onto the input grid (scatter-add,
        // the exact transpose of im2col).
        let (h, w) = (self.height, self.width);
        let s = h * w;
        let mut dx = Array2::zeros((self.c_in, batch * s));
        for ci in 0..self.c_in {
            let mut dx_row = dx.row_mut(ci);
            let dx_row = dx_row.as_slice_mut().expect("standard layout");
            for kr in 0..3usize {
                let r_lo = 1usize.saturating_sub(kr);
                let r_hi = (h + 1 - kr).min(h);
                for kc in 0..3usize {
                    let c_lo = 1usize.saturating_sub(kc);
                    let c_hi = (w + 1 - kc).min(w);
                    if c_lo >= c_hi {
                        continue;
                    }
                    let len = c_hi - c_lo;
                    let d_row = dcol.row(ci * 9 + kr * 3 + kc);
                    let d_row = d_row.as_slice().expect("standard layout");
                    for b in 0..batch {
                        for r in r_lo..r_hi {
                            let src = b * s + (r + kr - 1) * w + (c_lo + kc - 1);
                            let dst = b * s + r * w + c_lo;
                            for j in 0..len {
                                dx_row[src + j] += d_row[dst + j];
                            }
                        }
                    }
                }
            }
        }
        (dx, dw, db)
    }
}

/// 3x3 max pooling with stride 3 (non-overlapping windows).
#[derive(Clone)]
pub struct MaxPool {
    pub height: usize,
    pub width: usize,
}

impl MaxPool {
    pub fn out_dims(&self) -> (usize, usize) {
        (self.height / 3, self.width / 3)
    }

    /// Returns the pooled output and, per output element, the input column
    /// index of its maximum (first maximum in scan order on ties).
    pub fn forward<F: Real>(&self, x: &Array2<F>, batch: usize) -> (Array2<F>, Array2<usize>) {
        let (ph, pw) = self.out_dims();
        let (s, sp) = (self.height * self.width, ph * pw);
        let channels = x.nrows();
        let mut y = Array2::zeros((channels, batch * sp));
        let mut arg = Array2::zeros((channels, batch * sp));
        for ch in 0..channels {
            let x_row = x.row(ch);
            let x_row = x_row.as_slice().expect("standard layout");
            for b in 0..batch {
                for pr in 0..ph {
                    for pc in 0..pw {
                        let mut best_idx = b * s + 3 * pr * self.width + 3 * pc;
                        let mut best = x_row[best_idx];
                        for dr in 0..3 {
                            for dc in 0..3 {
                                let idx = b * s + (3 * pr + dr) * self.width + (3 * pc + dc);
                                if x_row[idx] > best {
                                    best = x_row[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        y[[ch, b * sp + pr * pw + pc]] = best;
                        arg[[ch, b * sp + pr * pw + pc]] = best_idx;
                    }
                }
            }
        }
        (y, arg)
    }

    pub fn backward<F: Real>(&self, arg: &Array2<usize>, dy: &Array2<F>, batch: usize) -> Array2<F> {
        let mut dx = Array2::zeros((dy.nrows(), batch * self.height * self.width));
        for ch in 0..dy.nrows() {
            for j in 0..dy.ncols() {
                let idx = arg[[ch, j]];
                dx[[ch, idx]] += dy[[ch, j]];
            }
        }
        dx
    }
}

/// Fully connected layer on `(features, batch)` columns.
#[derive(Clone)]
pub struct Dense<F> {
    /// `(out_features, in_features)`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Real> Dense<F> {
    pub fn init(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: fan_in_uniform(rng, out_features, in_features, in_features),
            bias: Array1::zeros(out_features),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut y = self.weight.dot(x);
        y += &self.bias.view().insert_axis(Axis(1));
        y
    }

    /// Returns `(dx, dweight, dbias)`; `x` is the forward input.
    pub fn backward(&self, x: &Array2<F>, dy: &Array2<F>) -> (Array2<F>, Array2<F>, Array1<F>) {
        let dw = dy.dot(&x.t());
        let db = dy.sum_axis(Axis(1));
        let dx = self.weight.t().dot(dy);
        (dx, dw, db)
    }
}

/// Batch normalization across axis 1 (one statistic per row). Training uses
/// the batch statistics and tracks running ones by exponential moving
/// average; inference uses the running statistics only, so each sample's
/// output is independent of how samples are batched.
#[derive(Clone)]
pub struct BatchNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
    pub eps: F,
    pub momentum: F,
}

/// Intermediates the backward pass and the running-stat update need.
pub struct BnCache<F> {
    pub xhat: Array2<F>,
    pub inv_std: Array1<F>,
    pub mean: Array1<F>,
    pub var: Array1<F>,
}

impl<F: Real> BatchNorm<F> {
    pub fn init(features: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            eps: F::from_f64(1e-5),
            momentum: F::from_f64(0.9),
        }
    }

    pub fn forward_train(&self, x: &Array2<F>) -> (Array2<F>, BnCache<F>) {
        let n = F::from_f64(x.ncols() as f64);
        let mean = x.sum_axis(Axis(1)) / n;
        let centered = x - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let inv_std = var.mapv(|v| F::one() / (v + self.eps).sqrt());
        let xhat = &centered * &inv_std.view().insert_axis(Axis(1));
        let y = &xhat * &self.gamma.view().insert_axis(Axis(1))
            + self.beta.view().insert_axis(Axis(1));
        (
            y,
            BnCache {
                xhat,
                inv_std,
                mean,
                var,
            },
        )
    }

    /// Folds a batch's statistics into the running ones.
    pub fn update_running(&mut self, cache: &BnCache<F>) {
        let m = self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&cache.mean)
            .for_each(|r, &b| *r = m * *r + (F::one() - m) * b);
        Zip::from(&mut self.running_var)
            .and(&cache.var)
            .for_each(|r, &b| *r = m * *r + (F::one() - m) * b);
    }

    pub fn forward_infer(&self, x: &Array2<F>) -> Array2<F> {
        let scale = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|&g, &v| g / (v + self.eps).sqrt());
        let shift = Zip::from(&self.beta)
            .and(&scale)
            .and(&self.running_mean)
            .map_collect(|&b, &s, &m| b - s * m);
        x * &scale.view().insert_axis(Axis(1)) + shift.view().insert_axis(Axis(1))
    }

    /// Returns `(dx, dgamma, dbeta)` for the batch-statistics forward.
    pub fn backward(&self, cache: &BnCache<F>, dy: &Array2<F>) -> (Array2<F>, Array1<F>, Array1<F>) {
        let n = F::from_f64(dy.ncols() as f64);
        let dbeta = dy.sum_axis(Axis(1));
        let dgamma = (dy * &cache.xhat).sum_axis(Axis(1));
        let dxhat = dy * &self.gamma.view().insert_axis(Axis(1));
        let sum_dxhat = dxhat.sum_axis(Axis(1));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1));
        let mut dx = &dxhat * n
            - sum_dxhat.view().insert_axis(Axis(1))
            - &cache.xhat * &sum_dxhat_xhat.view().insert_axis(Axis(1));
        let scale = cache.inv_std.mapv(|v| v / n);
        dx *= &scale.view().insert_axis(Axis(1));
        (dx, dgamma, dbeta)
    }
}

pub fn relu<F: Real>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

/// `y` is the forward output; its sign determines the pass-through mask.
pub fn relu_backward<F: Real>(y: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
    Zip::from(y)
        .and(dy)
        .map_collect(|&y, &d| if y > F::zero() { d } else { F::zero() })
}

pub fn leaky_relu<F: Real>(x: &Array2<F>) -> Array2<F> {
    let alpha = F::from_f64(LEAKY_ALPHA);
    x.mapv(|v| if v > F::zero() { v } else { alpha * v })
}

pub fn leaky_relu_backward<F: Real>(y: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
    let alpha = F::from_f64(LEAKY_ALPHA);
    Zip::from(y)
        .and(dy)
        .map_collect(|&y, &d| if y > F::zero() { d } else { alpha * d })
}

pub fn tanh_forward<F: Real>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| v.tanh())
}

pub fn tanh_backward<F: Real>(y: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
    Zip::from(y)
        .and(dy)
        .map_collect(|&y, &d| d * (F::one() - y * y))
}

/// Pre-scaled inverted-dropout masks for the five dropout sites, drawn in a
/// fixed order. Entries are 0 with probability 1-keep and 1/keep otherwise,
/// so application (forward and backward alike) is one elementwise multiply
/// and inference needs no rescaling. Freezing a mask makes the whole forward
/// pass a deterministic differentiable function, which is what the gradient
/// checker needs.
#[derive(Clone)]
pub struct DropoutMasks<F> {
    pub conv2: Array2<F>,
    pub conv4: Array2<F>,
    pub fc1: Array2<F>,
    pub fc2: Array2<F>,
    pub fc3: Array2<F>,
}

impl<F: Real> DropoutMasks<F> {
    /// `shapes` as produced by [`super::EncoderConfig::dropout_shapes`].
    pub fn generate(shapes: [(usize, usize); 5], keep: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut draw = |(rows, cols)| {
            Array2::from_shape_fn((rows, cols), |_| {
                if rng.random_bool(keep) {
                    F::from_f64(1.0 / keep)
                } else {
                    F::zero()
                }
            })
        };
        DropoutMasks {
            conv2: draw(shapes[0]),
            conv4: draw(shapes[1]),
            fc1: draw(shapes[2]),
            fc2: draw(shapes[3]),
            fc3: draw(shapes[4]),
        }
    }
}
