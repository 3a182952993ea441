//! Parameter files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"TTE1" | u32 version
//! | u32 layers, d, heads, ffn_mult, deg_max, d_max, feature_dim | u64 seed
//! | f64 target mean, f64 target std
//! | per tensor, in `Weights::named` order: u64 length, f64 values
//! | u64 FNV-1a checksum of every preceding byte
//! ```

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use super::params::{ModelConfig, ModelParams, TargetNorm, Weights};
use super::ModelError;

pub const MAGIC: &[u8; 4] = b"TTE1";
pub const FORMAT_VERSION: u32 = 1;

pub fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(64 + params.weights.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [
        c.layers,
        c.d,
        c.heads,
        c.ffn_mult,
        c.deg_max,
        c.d_max,
        c.feature_dim,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&params.norm.mean.to_le_bytes());
    out.extend_from_slice(&params.norm.std.to_le_bytes());
    for t in params.weights.tensors() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::CorruptFile("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams, ModelError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ModelError::CorruptFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 16 {
        return Err(ModelError::CorruptFile("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(ModelError::CorruptFile("checksum mismatch".into()));
    }
    let mut dims = [0usize; 7];
    for v in &mut dims {
        *v = r.u32()? as usize;
    }
    let config = ModelConfig {
        layers: dims[0],
        d: dims[1],
        heads: dims[2],
        ffn_mult: dims[3],
        deg_max: dims[4],
        d_max: dims[5],
        feature_dim: dims[6],
        seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| ModelError::CorruptFile(format!("invalid config: {e}")))?;
    let norm = TargetNorm {
        mean: r.f64()?,
        std: r.f64()?,
    };
    let mut weights = Weights::zeros(&config);
    for t in weights.tensors_mut() {
        let len = r.u64()? as usize;
        if len != t.len() {
            return Err(ModelError::CorruptFile(format!(
                "tensor length {len}, expected {}",
                t.len()
            )));
        }
        for v in t.iter_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != body.len() {
        return Err(ModelError::CorruptFile("trailing bytes".into()));
    }
    Ok(ModelParams {
        config,
        norm,
        weights,
    })
}

pub fn save_params(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ModelParams, ModelError> {
    from_bytes(&std::fs::read(path)?)
}

/// Short identifier derived from the serialized parameters.
pub fn model_version(params: &ModelParams) -> String {
    format!("tte1-{:016x}", checksum(&to_bytes(params)))
}
