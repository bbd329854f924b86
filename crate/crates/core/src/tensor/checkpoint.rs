//! VGDM: model checkpoints.
//!
//! Little-endian layout:
//!
//! | field                 | type                                          |
//! |-----------------------|-----------------------------------------------|
//! | magic                 | `b"VGDM"`                                     |
//! | version               | u32 = 1                                       |
//! | metadata              | u32 length + UTF-8 JSON (caller-defined)      |
//! | layer count           | u32                                           |
//! | per layer             | u32 length + UTF-8 JSON [`LayerSpec`]         |
//! | parameter count       | u32                                           |
//! | per parameter         | u32 name length + name, u32 ndim, ndim × u32 dims, f32 values |
//! | optimizer flag        | u8 (0 = none, 1 = Adam)                       |
//! | Adam step             | u64                                           |
//! | Adam hyperparameters  | 5 × f64: lr0, decay, β1, β2, ε                |
//! | Adam moments          | per parameter: first then second moment, f32  |
//!
//! The Adam block is present only when the flag is 1. Nothing may follow it.

use std::path::Path;

use thiserror::Error;

use super::{Adam, AdamConfig, LayerSpec, ParamStore, Tensor};
use crate::trailer::atomic_write;

pub const VGDM_MAGIC: [u8; 4] = *b"VGDM";
pub const VGDM_VERSION: u32 = 1;

const MAX_NDIM: usize = 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),
    #[error("CorruptCheckpoint: {0}")]
    Corrupt(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Free-form JSON describing how to rebuild the model.
    pub metadata: String,
    pub layers: Vec<LayerSpec>,
    pub params: ParamStore<f32>,
    pub adam: Option<Adam<f32>>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field exceeds u32").to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len());
    out.extend_from_slice(b);
}

fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    out.reserve(vs.len() * 4);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&VGDM_MAGIC);
    out.extend_from_slice(&VGDM_VERSION.to_le_bytes());
    put_bytes(&mut out, ck.metadata.as_bytes());
    put_u32(&mut out, ck.layers.len());
    for l in &ck.layers {
        put_bytes(&mut out, serde_json::to_string(l).expect("layer specs serialize").as_bytes());
    }
    put_u32(&mut out, ck.params.len());
    for e in ck.params.entries() {
        put_bytes(&mut out, e.name.as_bytes());
        put_u32(&mut out, e.value.shape().len());
        for &d in e.value.shape() {
            put_u32(&mut out, d);
        }
        put_f32s(&mut out, e.value.data());
    }
    match &ck.adam {
        None => out.push(0),
        Some(adam) => {
            out.push(1);
            out.extend_from_slice(&adam.step_count().to_le_bytes());
            let c = adam.config;
            for v in [c.lr0, c.decay, c.beta1, c.beta2, c.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let (m, v) = adam.moments();
            for (mi, vi) in m.iter().zip(v) {
                put_f32s(&mut out, mi);
                put_f32s(&mut out, vi);
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Corrupt(format!("truncated {what} at byte {}", self.pos))),
        }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64(what)?))
    }

    fn str(&mut self, what: &str) -> Result<&'a str, CheckpointError> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        std::str::from_utf8(b).map_err(|_| CheckpointError::Corrupt(format!("{what} is not UTF-8")))
    }

    /// Reads `n` floats, refusing before allocating if they cannot fit.
    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>, CheckpointError> {
        let bytes = n.checked_mul(4).filter(|&b| b <= self.remaining());
        let Some(bytes) = bytes else {
            return Err(CheckpointError::Corrupt(format!("{what} needs {n} floats, {} bytes left", self.remaining())));
        };
        let raw = self.take(bytes, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    /// A count whose items each need at least `min_item` bytes.
    fn count(&mut self, min_item: usize, what: &str) -> Result<usize, CheckpointError> {
        let n = self.u32(what)?;
        if n.saturating_mul(min_item) > self.remaining() {
            return Err(CheckpointError::Corrupt(format!(
                "{what} {n} exceeds the remaining {} bytes",
                self.remaining()
            )));
        }
        Ok(n)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic =
        r.take(4, "magic").map_err(|_| CheckpointError::UnsupportedFormat("file shorter than the magic".into()))?;
    if magic != VGDM_MAGIC {
        return Err(CheckpointError::UnsupportedFormat(format!("bad magic {magic:?}")));
    }
    let version = r.u32("version")?;
    if version != VGDM_VERSION as usize {
        return Err(CheckpointError::UnsupportedFormat(format!("version {version}, expected {VGDM_VERSION}")));
    }
    let metadata = r.str("metadata")?.to_string();
    let n_layers = r.count(4, "layer count")?;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let text = r.str("layer spec")?;
        let spec: LayerSpec =
            serde_json::from_str(text).map_err(|e| CheckpointError::Corrupt(format!("layer {i}: {e}")))?;
        spec.validate().map_err(|e| CheckpointError::Corrupt(format!("layer {i}: {e}")))?;
        layers.push(spec);
    }
    let n_params = r.count(8, "parameter count")?;
    let mut params = ParamStore::new();
    for _ in 0..n_params {
        let name = r.str("parameter name")?.to_string();
        let ndim = r.u32("ndim")?;
        if ndim > MAX_NDIM {
            return Err(CheckpointError::Corrupt(format!("{name}: {ndim} dimensions")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32("dimension")?);
        }
        let numel = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let Some(numel) = numel else {
            return Err(CheckpointError::Corrupt(format!("{name}: shape {shape:?} overflows")));
        };
        let data = r.f32s(numel, &name)?;
        let value = Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if params.find(&name).is_some() {
            return Err(CheckpointError::Corrupt(format!("duplicate parameter {name}")));
        }
        params.add(name, value);
    }
    let adam = match r.u8("optimizer flag")? {
        0 => None,
        1 => {
            let step = r.u64("adam step")?;
            let mut h = [0.0; 5];
            for v in &mut h {
                *v = r.f64("adam hyperparameter")?;
            }
            let config = AdamConfig { lr0: h[0], decay: h[1], beta1: h[2], beta2: h[3], eps: h[4] };
            let mut m = Vec::with_capacity(params.len());
            let mut v = Vec::with_capacity(params.len());
            for e in params.entries() {
                m.push(r.f32s(e.value.numel(), "first moment")?);
                v.push(r.f32s(e.value.numel(), "second moment")?);
            }
            Some(Adam::from_parts(config, step, m, v))
        }
        f => return Err(CheckpointError::Corrupt(format!("optimizer flag {f}"))),
    };
    if r.remaining() != 0 {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Checkpoint { metadata, layers, params, adam })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    atomic_write(path.as_ref(), &encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}
