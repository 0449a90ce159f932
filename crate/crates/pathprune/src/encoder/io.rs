//! Weights persistence and history export.
//!
//! Binary layout (all integers little-endian u32):
//! `"PPENC1"` magic, tensor count, then per tensor: name length, UTF-8 name,
//! rank, one u32 per dimension, and the row-major f32 payload. The file is
//! self-describing: alongside every parameter and running statistic it
//! stores a 3-element `config` tensor `[height, width, channel_divisor]`
//! from which the architecture is rebuilt on load.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path as StdPath;

use super::net::{EncoderConfig, Net};
use super::train::EpochStats;
use super::EncoderError;

const MAGIC: &[u8; 6] = b"PPENC1";

fn write_tensor(out: &mut Vec<u8>, name: &str, dims: &[usize], data: impl Iterator<Item = f32>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes parameters, running statistics, and the architecture config.
pub fn save_params(net: &Net<f32>) -> Vec<u8> {
    let params = net.params();
    let stats = net.stats();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&((params.len() + stats.len() + 1) as u32).to_le_bytes());
    for (name, tensor) in params.into_iter().chain(stats) {
        write_tensor(&mut out, name, tensor.shape(), tensor.iter().copied());
    }
    let cfg = [
        net.cfg.height() as f32,
        net.cfg.width() as f32,
        net.cfg.channel_divisor() as f32,
    ];
    write_tensor(&mut out, "config", &[3], cfg.into_iter());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EncoderError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(EncoderError::UnexpectedEof)?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, EncoderError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Rebuilds a network from [`save_params`] output. The returned config is
/// the one stored in the file's `config` tensor.
pub fn load_params(bytes: &[u8]) -> Result<(EncoderConfig, Net<f32>), EncoderError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(6)? != MAGIC {
        return Err(EncoderError::BadMagic);
    }
    let count = r.u32()? as usize;
    let mut tensors: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(EncoderError::UnexpectedEof)?;
        let raw = r.take(len.checked_mul(4).ok_or(EncoderError::UnexpectedEof)?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push((name, dims, data));
    }
    if r.pos != bytes.len() {
        return Err(EncoderError::TrailingBytes);
    }

    let (_, config_dims, config_data) = tensors
        .iter()
        .find(|(n, _, _)| n == "config")
        .ok_or(EncoderError::MissingTensor("config"))?;
    if config_dims != &[3] {
        return Err(EncoderError::TensorShape {
            name: "config".into(),
            got: config_dims.clone(),
            want: vec![3],
        });
    }
    let as_dim = |v: f32, what: &str| -> Result<usize, EncoderError> {
        if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f32 {
            Ok(v as usize)
        } else {
            Err(EncoderError::InvalidConfig(format!(
                "stored {what} {v} is not a positive integer"
            )))
        }
    };
    let cfg = EncoderConfig::new(
        as_dim(config_data[0], "height")?,
        as_dim(config_data[1], "width")?,
        as_dim(config_data[2], "channel divisor")?,
    )?;

    let mut net = Net::init(cfg, 0);
    let known: Vec<&'static str> = net
        .params()
        .iter()
        .chain(net.stats().iter())
        .map(|(n, _)| *n)
        .collect();
    for (name, _, _) in &tensors {
        if name != "config" && !known.contains(&name.as_str()) {
            return Err(EncoderError::UnknownTensor(name.clone()));
        }
    }
    let mut filled: HashSet<&'static str> = HashSet::new();
    for pass in 0..2 {
        let views = if pass == 0 {
            net.params_mut()
        } else {
            net.stats_mut()
        };
        for (name, mut view) in views {
            let Some((_, dims, data)) = tensors.iter().find(|(n, _, _)| n == name) else {
                continue;
            };
            if view.shape() != &dims[..] {
                return Err(EncoderError::TensorShape {
                    name: name.to_string(),
                    got: dims.clone(),
                    want: view.shape().to_vec(),
                });
            }
            for (dst, &src) in view.iter_mut().zip(data) {
                *dst = src;
            }
            filled.insert(name);
        }
    }
    if let Some(&missing) = known.iter().find(|n| !filled.contains(*n)) {
        return Err(EncoderError::MissingTensor(missing));
    }
    Ok((cfg, net))
}

/// Writes [`save_params`] output to a file.
pub fn save_params_file(net: &Net<f32>, path: &StdPath) -> Result<(), EncoderError> {
    fs::write(path, save_params(net)).map_err(|source| EncoderError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a weights file written by [`save_params_file`].
pub fn load_params_file(path: &StdPath) -> Result<(EncoderConfig, Net<f32>), EncoderError> {
    let bytes = fs::read(path).map_err(|source| EncoderError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_params(&bytes)
}

/// Renders a training history as CSV with a fixed header.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_recall\n");
    for row in history {
        writeln!(
            out,
            "{},{},{},{}",
            row.epoch, row.train_loss, row.val_loss, row.val_recall
        )
        .expect("string writes cannot fail");
    }
    out
}
