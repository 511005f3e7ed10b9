//! Model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"DCAPCK1", u8 version
//! config: str kind, u32 field count, u32 vocab size..., u32 embedding dim,
//!         u32 layers, u32 heads, str product, u8 residual,
//!         u32 hidden count, u32 width..., f64 dropout, u64 seed
//! u32 parameter count
//! per parameter: str name, u8 rank, u32 extent..., f64 value...
//! ```
//!
//! Loading rebuilds the model from the stored config and only then swaps in
//! the stored tensors, so a mismatching file never yields a partly loaded
//! model.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurestore::{put_str, put_u32, Reader};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"DCAPCK1";
pub const CHECKPOINT_VERSION: u8 = 1;

fn put_config(out: &mut Vec<u8>, c: &ModelConfig) -> Result<()> {
    put_str(out, c.kind.as_str())?;
    put_u32(out, c.vocab_sizes.len())?;
    for &v in &c.vocab_sizes {
        put_u32(out, v)?;
    }
    put_u32(out, c.embedding_dim)?;
    put_u32(out, c.layers)?;
    put_u32(out, c.heads)?;
    put_str(out, c.product.as_str())?;
    out.push(u8::from(c.residual));
    put_u32(out, c.hidden.len())?;
    for &h in &c.hidden {
        put_u32(out, h)?;
    }
    out.extend_from_slice(&c.dropout.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    Ok(())
}

fn read_config(r: &mut Reader<'_>) -> Result<ModelConfig> {
    let parse = |e: Error| Error::Checkpoint(e.to_string());
    let kind = r.string()?.parse().map_err(parse)?;
    let n = r.u32()?;
    let vocab_sizes = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut c = ModelConfig::new(kind, vocab_sizes);
    c.embedding_dim = r.u32()?;
    c.layers = r.u32()?;
    c.heads = r.u32()?;
    c.product = r.string()?.parse().map_err(parse)?;
    c.residual = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(r.fail(format!("invalid residual flag {b}"))),
    };
    let h = r.u32()?;
    c.hidden = (0..h).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    c.dropout = r.f64()?;
    c.seed = r.u64()?;
    Ok(c)
}

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    put_config(&mut out, model.config())?;
    let params = model.params();
    put_u32(&mut out, params.len())?;
    for (name, t) in params.names().iter().zip(params.tensors()) {
        put_str(&mut out, name)?;
        out.push(t.rank() as u8);
        for &e in t.shape() {
            put_u32(&mut out, e)?;
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes, Error::Checkpoint);
    if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err(r.fail("bad magic header"));
    }
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let config = read_config(&mut r)?;
    let mut model = Model::new(config).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let count = r.u32()?;
    if count != model.params().len() {
        return Err(r.fail(format!(
            "{count} stored tensors, architecture has {}",
            model.params().len()
        )));
    }
    let mut loaded = Vec::with_capacity(count);
    for slot in 0..count {
        let name = r.string()?;
        let expected = &model.params().names()[slot];
        if &name != expected {
            return Err(r.fail(format!("tensor {slot} is {name:?}, expected {expected:?}")));
        }
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if shape != model.params().get(slot).shape() {
            return Err(r.fail(format!(
                "{name}: stored shape {shape:?}, expected {:?}",
                model.params().get(slot).shape()
            )));
        }
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        loaded.push(Tensor::new(shape, data)?);
    }
    r.finish()?;
    for (dst, src) in model.params_mut().tensors_mut().iter_mut().zip(loaded) {
        *dst = src;
    }
    Ok(model)
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
