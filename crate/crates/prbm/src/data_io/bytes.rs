use std::path::Path;

use crate::error::{Error, Result};

/// Cursor over an in-memory file that reports the byte offset of every failure.
pub(crate) struct ByteReader<'p, 'a> {
    path: &'p Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'p, 'a> ByteReader<'p, 'a> {
    pub(crate) fn new(path: &'p Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn error(&self, offset: u64, message: impl Into<String>) -> Error {
        Error::format(self.path, offset, message)
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(self.error(
                self.bytes.len() as u64,
                format!("truncated {what}: needs {n} bytes from offset {}, file has {remaining}", self.pos),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32_be(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64_le_vec(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| self.error(self.offset(), format!("{what} length overflows")))?;
        let raw = self.take(len, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn magic(&mut self, expected: &[u8]) -> Result<()> {
        let found = self.take(expected.len(), "magic")?;
        if found != expected {
            return Err(self.error(
                0,
                format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(found)
                ),
            ));
        }
        Ok(())
    }

    /// Fails if unread bytes remain.
    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(
                self.offset(),
                format!("{} unexpected trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Packs bits least-significant first within each byte.
pub(crate) fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

/// Inverse of [`pack_bits`]; returns the index of the first set padding bit on failure.
pub(crate) fn unpack_bits(bytes: &[u8], count: usize) -> std::result::Result<Vec<bool>, usize> {
    let bits: Vec<bool> = (0..bytes.len() * 8)
        .map(|i| bytes[i / 8] >> (i % 8) & 1 == 1)
        .collect();
    if let Some(pad) = bits[count..].iter().position(|&b| b) {
        return Err(count + pad);
    }
    Ok(bits[..count].to_vec())
}
