//! Prepared-dataset cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"DCAPDS1"
//! u32 field count
//! per field: str name, u8 kind (0 categorical, 1 numerical),
//!            u32 unknown index, u32 token count, str tokens...
//! u64 sample count
//! per sample: u8 label, u32 id per field
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurestore::schema::{validate_sample, Dataset, EncodedSample, FieldKind, FieldSchema};

pub const DATASET_MAGIC: &[u8; 7] = b"DCAPDS1";

pub(crate) fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Cache(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(out, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    put_u32(&mut out, ds.fields.len())?;
    for f in &ds.fields {
        put_str(&mut out, f.name())?;
        out.push(match f.kind() {
            FieldKind::Categorical => 0,
            FieldKind::Numerical => 1,
        });
        put_u32(&mut out, f.unknown_index())?;
        put_u32(&mut out, f.tokens().len())?;
        for t in f.tokens() {
            put_str(&mut out, t)?;
        }
    }
    out.extend_from_slice(&(ds.samples.len() as u64).to_le_bytes());
    for s in &ds.samples {
        out.push(s.label);
        for &id in &s.feature_ids {
            put_u32(&mut out, id)?;
        }
    }
    Ok(out)
}

/// Bounds-checked little-endian reader.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: fn(String) -> Error,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: fn(String) -> Error) -> Self {
        Reader { buf, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err((self.what)(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| (self.what)("invalid UTF-8 string".into()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err((self.what)(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    pub(crate) fn fail(&self, msg: impl Into<String>) -> Error {
        (self.what)(msg.into())
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, Error::Cache);
    if r.take(DATASET_MAGIC.len())? != DATASET_MAGIC {
        return Err(Error::Cache("bad magic header".into()));
    }
    let n_fields = r.u32()?;
    let mut fields = Vec::with_capacity(n_fields);
    for _ in 0..n_fields {
        let name = r.string()?;
        let kind = match r.u8()? {
            0 => FieldKind::Categorical,
            1 => FieldKind::Numerical,
            k => return Err(r.fail(format!("unknown field kind {k}"))),
        };
        let unknown = r.u32()?;
        let count = r.u32()?;
        if unknown != count {
            return Err(r.fail(format!("field {name}: unknown index {unknown} != {count}")));
        }
        let tokens = (0..count).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        fields.push(FieldSchema::from_tokens(name, kind, tokens)?);
    }
    let n_samples = r.u64()? as usize;
    let mut samples = Vec::with_capacity(n_samples.min(bytes.len()));
    for _ in 0..n_samples {
        let label = r.u8()?;
        let ids = (0..n_fields).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let s = EncodedSample::new(ids, label);
        validate_sample(&fields, &s).map_err(|e| Error::Cache(e.to_string()))?;
        samples.push(s);
    }
    r.finish()?;
    Ok(Dataset { fields, samples })
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurestore::schema::build_vocabulary;

    fn toy() -> Dataset {
        let a = build_vocabulary(["x", "y"], "A", FieldKind::Categorical, 1).unwrap();
        let b = build_vocabulary(["3"], "B", FieldKind::Numerical, 1).unwrap();
        Dataset::new(
            vec![a, b],
            vec![EncodedSample::new(vec![0, 1], 1), EncodedSample::new(vec![2, 0], 0)],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = toy();
        let bytes = encode_dataset(&ds).unwrap();
        assert_eq!(&bytes[..7], b"DCAPDS1");
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);
        assert_eq!(encode_dataset(&ds).unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = encode_dataset(&toy()).unwrap();
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(Error::Cache(_))));
    }
}
