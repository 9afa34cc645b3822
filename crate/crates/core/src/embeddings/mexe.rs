//! Binary container for subword models.
//!
//! Layout (little endian): magic `MEXE`, `u32` version, `u32` dim,
//! `u32` min_n, `u32` max_n, `u32` buckets, `u64` bucket seed,
//! `u32` vocabulary size, then per word a `u32` byte length, UTF-8 bytes
//! and a `u64` count, the input and output word matrices as `f32`, and the
//! trained bucket rows as a `u32` row count followed by `u32` index and
//! `dim` `f32` values per row.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::subword::{SubwordModel, VocabEntry};
use crate::error::{Error, Result};

pub const MEXE_MAGIC: &[u8; 4] = b"MEXE";
pub const MEXE_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vs: &[f64]) {
    for &v in vs {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn usize_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} does not fit the file format")))
}

pub fn encode_mexe(model: &SubwordModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MEXE_MAGIC);
    put_u32(&mut out, MEXE_VERSION);
    put_u32(&mut out, usize_u32(model.dim, "dimension")?);
    put_u32(&mut out, usize_u32(model.min_n, "min_n")?);
    put_u32(&mut out, usize_u32(model.max_n, "max_n")?);
    put_u32(&mut out, model.buckets);
    put_u64(&mut out, model.bucket_seed);
    put_u32(&mut out, usize_u32(model.vocab.len(), "vocabulary size")?);
    for e in &model.vocab {
        put_u32(&mut out, usize_u32(e.word.len(), "word length")?);
        out.extend_from_slice(e.word.as_bytes());
        put_u64(&mut out, e.count);
    }
    put_f32s(&mut out, &model.word_in);
    put_f32s(&mut out, &model.word_out);
    put_u32(&mut out, usize_u32(model.bucket_rows.len(), "bucket rows")?);
    for (&b, row) in &model.bucket_rows {
        put_u32(&mut out, b);
        put_f32s(&mut out, row);
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated embedding file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("matrix too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode_mexe(bytes: &[u8]) -> Result<SubwordModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MEXE_MAGIC {
        return Err(Error::Format("not a MEXE embedding file".into()));
    }
    let version = c.u32()?;
    if version != MEXE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MEXE_VERSION,
        });
    }
    let dim = c.u32()? as usize;
    let min_n = c.u32()? as usize;
    let max_n = c.u32()? as usize;
    let buckets = c.u32()?;
    let seed = c.u64()?;
    if dim == 0 || buckets == 0 || min_n == 0 || min_n > max_n {
        return Err(Error::Format("invalid embedding header".into()));
    }
    let n = c.u32()? as usize;
    let mut vocab = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = c.u32()? as usize;
        let word = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Format("vocabulary entry is not UTF-8".into()))?
            .to_owned();
        let count = c.u64()?;
        vocab.push(VocabEntry { word, count });
    }
    let word_in = c.f32s(n * dim)?;
    let word_out = c.f32s(n * dim)?;
    let rows = c.u32()? as usize;
    let mut bucket_rows = BTreeMap::new();
    for _ in 0..rows {
        let b = c.u32()?;
        bucket_rows.insert(b, c.f32s(dim)?);
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after embedding data".into()));
    }
    SubwordModel::from_parts((dim, min_n, max_n, buckets, seed), vocab, word_in, word_out, bucket_rows)
}

pub fn save_mexe(model: &SubwordModel, path: &Path) -> Result<()> {
    let bytes = encode_mexe(model)?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn load_mexe(path: &Path) -> Result<SubwordModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_mexe(&bytes)
}

/// Word-per-line text export: a `count dim` header, then the word and its
/// composed vector.
pub fn export_text_vectors(model: &SubwordModel) -> String {
    let mut out = format!("{} {}\n", model.vocab.len(), model.dim);
    for e in &model.vocab {
        out.push_str(&e.word);
        for v in model.embed_word(&e.word) {
            out.push_str(&format!(" {v:.6}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::subword::{train_cbow, CbowConfig};

    fn model() -> SubwordModel {
        let sents: Vec<Vec<String>> = (0..10)
            .map(|_| "Pat. erhielt Prograf 5 mg".split(' ').map(str::to_owned).collect())
            .collect();
        let cfg = CbowConfig {
            dim: 8,
            buckets: 1000,
            min_count: 1,
            epochs: 1,
            ..CbowConfig::default()
        };
        train_cbow(&sents, &cfg).unwrap().0
    }

    #[test]
    fn round_trip_at_f32_precision() {
        let m = model();
        let bytes = encode_mexe(&m).unwrap();
        assert_eq!(&bytes[..4], b"MEXE");
        let back = decode_mexe(&bytes).unwrap();
        assert_eq!(back.vocab(), m.vocab());
        for w in ["Prograf", "Tacrolimus", ""] {
            let (a, b) = (m.embed_word(w), back.embed_word(w));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
        }
        assert_eq!(encode_mexe(&back).unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_mexe(&model()).unwrap();
        assert!(decode_mexe(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_mexe(&bad), Err(Error::Version { found: 9, .. })));
        assert!(decode_mexe(b"NOPE").is_err());
    }

    #[test]
    fn text_export_shape() {
        let m = model();
        let text = export_text_vectors(&m);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("{} 8", m.vocab().len()));
        assert!(lines.all(|l| l.split(' ').count() == 9));
    }
}
