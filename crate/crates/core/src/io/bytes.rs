//! Little-endian primitives shared by the binary formats.

use std::io::Read;

use crate::error::{Error, Result};

pub(crate) struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated file while reading {what}")),
            _ => Error::Io(e),
        })
    }

    /// Reads `len` bytes without trusting `len` for the allocation size.
    pub fn take_vec(&mut self, len: usize, what: &str) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let got = (&mut self.inner).take(len as u64).read_to_end(&mut out)?;
        if got != len {
            return Err(Error::Format(format!("truncated file while reading {what}")));
        }
        Ok(out)
    }

    pub fn at_end(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        Ok(self.inner.read(&mut b)? == 0)
    }
}

pub(crate) fn read_exact<const N: usize>(r: &mut Reader<impl Read>, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.fill(&mut b, what)?;
    Ok(b)
}

pub(crate) fn read_u32(r: &mut Reader<impl Read>, what: &str) -> Result<u32> {
    read_exact::<4>(r, what).map(u32::from_le_bytes)
}

pub(crate) fn read_u64(r: &mut Reader<impl Read>, what: &str) -> Result<u64> {
    read_exact::<8>(r, what).map(u64::from_le_bytes)
}

pub(crate) fn read_f32(r: &mut Reader<impl Read>, what: &str) -> Result<f32> {
    read_exact::<4>(r, what).map(f32::from_le_bytes)
}
