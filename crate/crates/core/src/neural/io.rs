//! Model file format (all integers and floats little-endian):
//!
//! ```text
//! magic "TDDN" | version u16 | layer count u32
//! per layer: fan_in u32 | fan_out u32 | activation u8
//! per layer: weights (fan_out x fan_in, row-major, f32) | biases (f32)
//! CRC32 of everything above, u32
//! ```

use std::path::Path;

use super::{Activation, DenseLayer, MlpModel, MlpSpec};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"TDDN";
pub const MODEL_FORMAT_VERSION: u16 = 1;

pub fn model_to_bytes(model: &MlpModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + model.parameter_count() * 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for l in &model.layers {
        out.extend_from_slice(&(l.fan_in as u32).to_le_bytes());
        out.extend_from_slice(&(l.fan_out as u32).to_le_bytes());
        out.push(l.activation.code());
    }
    for l in &model.layers {
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("file truncated")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        let bytes = self.take(n.checked_mul(4).ok_or("size overflow")?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Decode a model; `origin` only labels errors.
pub fn model_from_bytes(bytes: &[u8], origin: &Path) -> Result<MlpModel<f32>> {
    decode(bytes).map_err(|reason| Error::load(origin, reason))
}

fn decode(bytes: &[u8]) -> std::result::Result<MlpModel<f32>, String> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err("bad magic, not a model file".into());
    }
    if bytes.len() < 10 {
        return Err("file truncated".into());
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u16()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(format!("unsupported model format version {version} (expected {MODEL_FORMAT_VERSION})"));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(format!("implausible layer count {n_layers}"));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let fan_in = r.u32()? as usize;
        let fan_out = r.u32()? as usize;
        let code = r.u8()?;
        let act = Activation::from_code(code).ok_or_else(|| format!("unknown activation code {code}"))?;
        shapes.push((fan_in, fan_out, act));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for &(fan_in, fan_out, activation) in &shapes {
        let weights = r.f32s(fan_in.checked_mul(fan_out).ok_or("size overflow")?)?;
        let biases = r.f32s(fan_out)?;
        layers.push(DenseLayer { fan_in, fan_out, activation, weights, biases });
    }
    if r.pos != body.len() {
        return Err(format!("{} trailing bytes before checksum", body.len() - r.pos));
    }
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(format!("checksum mismatch (stored {stored:08x}, computed {actual:08x})"));
    }
    if shapes.windows(2).any(|w| w[0].1 != w[1].0) {
        return Err("layer widths do not chain".into());
    }
    let mut dims = vec![shapes[0].0];
    dims.extend(shapes.iter().map(|s| s.1));
    let spec = MlpSpec::new(dims, shapes.iter().map(|s| s.2).collect()).map_err(|e| e.to_string())?;
    Ok(MlpModel { spec, layers })
}

pub fn save_model(model: &MlpModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}
