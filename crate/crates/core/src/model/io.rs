//! Binary model container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "MSDOAS\0\0"
//! version  u32
//! n, H, T, head_hidden   u64 each
//! count    u32      number of tensors
//! per tensor: name_len u16, name bytes, rows u64, cols u64, rows*cols f64
//! ```

use std::fs;
use std::path::Path;

use super::{ModelConfig, MsDoasModel, Params};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MSDOAS\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_model(model: &MsDoasModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MsDoasModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(model: &MsDoasModel) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + model.params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [c.feature_dim, c.hidden, c.memory, c.head_hidden] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let tensors = model.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, (rows, cols), data) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size overflows usize".into()))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<MsDoasModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let config = ModelConfig {
        feature_dim: r.usize()?,
        hidden: r.usize()?,
        memory: r.usize()?,
        head_hidden: r.usize()?,
    };
    config.validate()?;

    let mut params = Params::zeros(&config);
    let expected: Vec<(&'static str, (usize, usize))> =
        params.tensors().iter().map(|t| (t.0, t.1)).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::ShapeMismatch(format!(
            "file has {count} tensors, configuration implies {}",
            expected.len()
        )));
    }
    let mut targets = params.tensors_mut();
    for ((name, shape), target) in expected.into_iter().zip(targets.iter_mut()) {
        let len = r.u16()? as usize;
        let found = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if found != name {
            return Err(Error::ShapeMismatch(format!("expected tensor `{name}`, found `{found}`")));
        }
        let rows = r.usize()?;
        let cols = r.usize()?;
        if (rows, cols) != shape {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{name}` is {rows}x{cols}, configuration implies {}x{}",
                shape.0, shape.1
            )));
        }
        let data = r.take(rows * cols * 8)?;
        for (dst, chunk) in target.iter_mut().zip(data.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    drop(targets);
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last tensor".into()));
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("model parameter".into()));
    }
    MsDoasModel::from_params(config, params)
}
