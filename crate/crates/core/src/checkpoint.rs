//! Binary checkpoint format.
//!
//! ```text
//! magic    b"PJF1"
//! version  u32
//! config   u32 byte length + UTF-8 JSON of the ModelConfig
//! count    u32
//! tensor   u32 name length + name bytes, u32 rank, u32 per dim, f32 values (row-major)
//! ```
//!
//! All integers and floats are little-endian. Values are computed in f64 and
//! narrowed to f32 on save; loading widens them back.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CheckpointError, Error, Result};
use crate::model::{ModelConfig, PjfModel};
use crate::numerics::{Matrix, ParamStore};

pub const MAGIC: [u8; 4] = *b"PJF1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(store: &ParamStore, config: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(store.num_scalars() * 4 + 4096);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(config).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Writes via a temporary sibling file and rename, so readers never see a partial file.
pub fn save_checkpoint(model: &PjfModel, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(&model.store, &model.config);
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated { what: what.to_string() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// A named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// Parses the container without checking tensors against a layout.
pub fn decode_raw(bytes: &[u8]) -> Result<(ModelConfig, Vec<RawTensor>), CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = match r.take(4, "header") {
        Ok(m) => m.try_into().expect("4 bytes"),
        Err(_) => {
            let mut found = [0u8; 4];
            found[..bytes.len()].copy_from_slice(bytes);
            return Err(CheckpointError::BadMagic { found });
        }
    };
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic { found: magic });
    }
    let version = r.u32("header")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let cfg_len = r.u32("config")? as usize;
    let cfg_bytes = r.take(cfg_len, "config")?;
    let config: ModelConfig =
        serde_json::from_slice(cfg_bytes).map_err(|e| CheckpointError::BadConfig(e.to_string()))?;
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let label = format!("tensor #{i}");
        let name_len = r.u32(&label)? as usize;
        let name = String::from_utf8(r.take(name_len, &label)?.to_vec())
            .map_err(|_| CheckpointError::BadConfig(format!("{label} has a non-UTF-8 name")))?;
        let rank = r.u32(&name)? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32(&name)? as usize);
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Truncated { what: name.clone() })?, &name)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        tensors.push(RawTensor { name, dims, values });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::BadConfig(format!("{} trailing bytes after the tensor table", bytes.len() - r.pos)));
    }
    Ok((config, tensors))
}

/// Decodes and checks every tensor against the layout `expected` implies.
pub fn decode_checkpoint_with(bytes: &[u8], expected: &ModelConfig) -> Result<PjfModel> {
    let (stored, tensors) = decode_raw(bytes)?;
    let mut model = PjfModel::new(expected.clone(), 0)?;
    let mut seen = vec![false; model.store.len()];
    for t in tensors {
        let id = model.store.id(&t.name).ok_or_else(|| CheckpointError::UnexpectedTensor(t.name.clone()))?;
        let want = model.store.value(id).shape();
        let want = vec![want.0, want.1];
        if t.dims != want {
            return Err(CheckpointError::ShapeMismatch { name: t.name, expected: want, found: t.dims }.into());
        }
        let data = t.values.iter().map(|&v| f64::from(v)).collect();
        *model.store.value_mut(id) = Matrix::from_vec(want[0], want[1], data)?;
        seen[id.index()] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        let name = model.store.iter().nth(i).map(|(_, p)| p.name.clone()).unwrap_or_default();
        return Err(CheckpointError::MissingTensor(name).into());
    }
    if stored != *expected {
        log::warn!("checkpoint config differs from the expected config; tensor shapes agree");
    }
    Ok(model)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<PjfModel> {
    let (config, _) = decode_raw(bytes)?;
    decode_checkpoint_with(bytes, &config)
}

/// Loads a checkpoint, validating tensors against its embedded config.
pub fn load_checkpoint(path: &Path) -> Result<PjfModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint, validating tensors against a caller-provided config.
pub fn load_checkpoint_with(path: &Path, expected: &ModelConfig) -> Result<PjfModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint_with(&bytes, expected)
}
