//! Versioned binary blobs for trained models.
//!
//! Every blob starts with the magic `CGMB`, a format version byte and a kind
//! byte, followed by a kind-specific payload built from little-endian
//! primitives:
//!
//! * `u8`, `u32`, `u64`, `f64`: fixed width;
//! * sequences (`f64s`, `u32s`, `bytes`): a `u64` length then the items;
//! * strings: `bytes` holding UTF-8.
//!
//! Kind bytes: 1 knn, 2 gaussian_nb, 3 gaussian_process, 4 linear_svm,
//! 5 rbf_svm, 6 random_forest, 7 adaboost, 8 mlp, 32 ensemble. The payload
//! layouts are the field orders written by each model's `encode` method.
//! Layouts may change between format versions; readers reject versions they
//! do not know.

use crate::{Error, Result};

pub const BLOB_MAGIC: &[u8; 4] = b"CGMB";
pub const BLOB_VERSION: u8 = 1;
pub const KIND_ENSEMBLE: u8 = 32;

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer::default()
    }

    /// Starts a blob with magic, version and kind byte.
    pub fn with_header(kind: u8) -> Self {
        let mut w = Writer::new();
        w.buf.extend_from_slice(BLOB_MAGIC);
        w.u8(BLOB_VERSION);
        w.u8(kind);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }

    pub fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        for &x in v {
            self.usize(x);
        }
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.usize(v.len());
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    /// Checks magic and version and returns the kind byte.
    pub fn header(&mut self) -> Result<u8> {
        if self.take(4)? != BLOB_MAGIC {
            return Err(Error::Codec("not a castguard model blob".into()));
        }
        let version = self.u8()?;
        if version != BLOB_VERSION {
            return Err(Error::Codec(format!("unsupported blob version {version}")));
        }
        self.u8()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Codec("unexpected end of blob".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Codec("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len_prefix(&mut self, item_size: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(item_size) > self.buf.len() - self.pos {
            return Err(Error::Codec("sequence length exceeds blob".into()));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.len_prefix(1)?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?).map_err(|_| Error::Codec("string is not UTF-8".into()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Codec(format!(
                "{} trailing bytes after model payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
