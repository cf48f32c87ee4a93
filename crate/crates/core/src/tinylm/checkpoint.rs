//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "RAATLM\0\0"
//! format_version   u32      currently 1
//! seed             u64
//! d, h, V          u32 each
//! vocab            V × (u32 byte length, UTF-8 bytes), in id order
//! parameters       f64, row-major: embed (V×d), w1 (h×2d), b1 (h),
//!                  w2 (V×h), b2 (V), wc (4×h), bc (4)
//! ```

use std::path::Path;

use super::params::{ModelDims, ModelParams};
use super::vocab::{Vocab, RESERVED};
use super::TinyLm;
use crate::error::{RaatError, Result};

pub const MAGIC: &[u8; 8] = b"RAATLM\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(model: &TinyLm) -> Vec<u8> {
    let dims = model.params.dims();
    let mut buf = Vec::with_capacity(64 + model.params.num_params() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&model.seed.to_le_bytes());
    for v in [dims.d, dims.h, dims.vocab] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for tok in model.vocab.tokens() {
        buf.extend_from_slice(&(tok.len() as u32).to_le_bytes());
        buf.extend_from_slice(tok.as_bytes());
    }
    for t in model.params.tensors() {
        for x in t {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| RaatError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<TinyLm> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(RaatError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(RaatError::Checkpoint(format!("unsupported format version {version}")));
    }
    let seed = r.u64()?;
    let d = r.u32()? as usize;
    let h = r.u32()? as usize;
    let vocab_len = r.u32()? as usize;
    if vocab_len < RESERVED.len() || d == 0 || h == 0 {
        return Err(RaatError::Checkpoint(format!("invalid dimensions d={d} h={h} V={vocab_len}")));
    }
    let mut tokens = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let n = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(n)?).map_err(|e| RaatError::Checkpoint(e.to_string()))?;
        tokens.push(s.to_owned());
    }
    if tokens[..RESERVED.len()] != RESERVED {
        return Err(RaatError::Checkpoint("reserved tokens out of place".into()));
    }
    let mut params = ModelParams::zeros(ModelDims { vocab: vocab_len, d, h });
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = r.f64()?;
        }
    }
    if r.pos != buf.len() {
        return Err(RaatError::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    if !params.is_finite() {
        return Err(RaatError::Checkpoint("non-finite parameter".into()));
    }
    Ok(TinyLm {
        vocab: Vocab::from_tokens(tokens),
        params,
        seed,
    })
}

pub fn save(model: &TinyLm, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| RaatError::io(path, e))
}

pub fn load(path: &Path) -> Result<TinyLm> {
    let buf = std::fs::read(path).map_err(|e| RaatError::io(path, e))?;
    from_bytes(&buf)
}
