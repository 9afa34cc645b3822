//! Component files: `MEXW` magic, u32 version, u32 kind length, kind,
//! u64 payload length, payload, then the SHA-256 of everything before it.
//! Payloads hold a JSON header followed by little-endian f64 blocks.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Params;

pub const MEXW_MAGIC: &[u8; 4] = b"MEXW";
pub const MEXW_VERSION: u32 = 1;
const DIGEST: usize = 32;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_component(kind: &str, payload: &[u8]) -> Vec<u8> {
    encode_with_version(kind, payload, MEXW_VERSION)
}

pub(crate) fn encode_with_version(kind: &str, payload: &[u8], version: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + kind.len() + 52);
    out.extend_from_slice(MEXW_MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(kind.len() as u32).to_le_bytes());
    out.extend_from_slice(kind.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Verifies checksum, magic, version and kind; returns the payload.
pub fn decode_component<'a>(name: &str, kind: &str, bytes: &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < 4 + 4 + 4 + 8 + DIGEST {
        return Err(Error::Format(format!("{name}: file too short")));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum(name.to_owned()));
    }
    if &body[..4] != MEXW_MAGIC {
        return Err(Error::Format(format!("{name}: bad magic")));
    }
    let mut r = Reader::new(&body[4..]);
    let version = r.u32()?;
    if version != MEXW_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MEXW_VERSION,
        });
    }
    let klen = r.u32()? as usize;
    let found = std::str::from_utf8(r.take(klen)?).map_err(|_| Error::Format(format!("{name}: kind is not UTF-8")))?;
    if found != kind {
        return Err(Error::Format(format!("{name}: expected a {kind} component, found {found}")));
    }
    let len = r.u64()? as usize;
    let payload = r.take(len)?;
    if !r.is_empty() {
        return Err(Error::Format(format!("{name}: trailing bytes")));
    }
    Ok(payload)
}

#[derive(Default)]
pub(crate) struct Writer {
    pub(crate) buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for v in vs {
            self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }

    pub(crate) fn header<T: Serialize>(&mut self, meta: &T) -> Result<()> {
        let json = serde_json::to_vec(meta)?;
        self.u32(json.len() as u32);
        self.buf.extend_from_slice(&json);
        Ok(())
    }

    pub(crate) fn params<P: Params>(&mut self, p: &P) {
        let blocks = p.params();
        self.u32(blocks.len() as u32);
        for b in blocks {
            self.f64s(b);
        }
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated component".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("block too large".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    pub(crate) fn header<T: DeserializeOwned>(&mut self) -> Result<T> {
        let n = self.u32()? as usize;
        Ok(serde_json::from_slice(self.take(n)?)?)
    }

    /// Overwrites every parameter block of `p`, which must already have the right shapes.
    pub(crate) fn params<P: Params>(&mut self, p: &mut P) -> Result<()> {
        let count = self.u32()? as usize;
        let mut blocks = p.params_mut();
        if count != blocks.len() {
            return Err(Error::Format(format!("expected {} weight blocks, found {count}", blocks.len())));
        }
        for b in blocks.iter_mut() {
            let v = self.f64s()?;
            if v.len() != b.len() {
                return Err(Error::LengthMismatch(v.len(), b.len()));
            }
            b.copy_from_slice(&v);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_checks() {
        let bytes = encode_component("pos", b"payload");
        assert_eq!(decode_component("pos.bin", "pos", &bytes).unwrap(), b"payload");
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(matches!(decode_component("pos.bin", "pos", &bad), Err(Error::Checksum(_))));
        }
        let newer = encode_with_version("pos", b"payload", 2);
        let err = decode_component("pos.bin", "pos", &newer).unwrap_err();
        assert!(matches!(err, Error::Version { found: 2, expected: 1 }));
        assert!(decode_component("pos.bin", "concepts", &bytes).is_err());
    }

    #[test]
    fn floats_keep_their_bits() {
        let vals = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let mut w = Writer::default();
        w.f64s(&vals);
        let back = Reader::new(&w.buf).f64s().unwrap();
        assert!(vals.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
