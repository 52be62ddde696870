//! Little-endian framing of row batches.
//!
//! A batch is `u64` row count, then per row: `u64` global row, `u64` entry
//! count, that many `u64` columns and, for numeric batches, that many
//! encoded values.

use crate::error::CommError;
use crate::scalar::Scalar;

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }

    pub(crate) fn scalar<T: Scalar>(&mut self, v: T) {
        v.write_le(&mut self.buf);
    }

    pub(crate) fn row<T: Scalar>(&mut self, row: usize, cols: &[usize], vals: Option<&[T]>) {
        self.u64(row);
        self.u64(cols.len());
        for &c in cols {
            self.u64(c);
        }
        if let Some(vals) = vals {
            debug_assert_eq!(vals.len(), cols.len());
            for &v in vals {
                self.scalar(v);
            }
        }
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CommError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CommError::Malformed(format!("payload truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u64(&mut self) -> Result<usize, CommError> {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(self.take(8)?);
        usize::try_from(u64::from_le_bytes(raw))
            .map_err(|_| CommError::Malformed("index exceeds usize".into()))
    }

    pub(crate) fn scalar<T: Scalar>(&mut self) -> Result<T, CommError> {
        Ok(T::read_le(self.take(T::WIRE_BYTES)?))
    }

    /// Reads one row header and returns views of its column and value
    /// bytes without copying.
    pub(crate) fn row<T: Scalar>(&mut self, with_values: bool) -> Result<WireRow<'a>, CommError> {
        let row = self.u64()?;
        let len = self.u64()?;
        let cols = self.take(len.checked_mul(8).ok_or_else(|| CommError::Malformed("row too long".into()))?)?;
        let vals = if with_values {
            self.take(len * T::WIRE_BYTES)?
        } else {
            &[]
        };
        Ok(WireRow { row, len, cols, vals })
    }

    pub(crate) fn finish(&self) -> Result<(), CommError> {
        if self.pos != self.buf.len() {
            return Err(CommError::Malformed(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// A decoded row header with borrowed column and value bytes.
pub(crate) struct WireRow<'a> {
    pub(crate) row: usize,
    pub(crate) len: usize,
    cols: &'a [u8],
    vals: &'a [u8],
}

impl WireRow<'_> {
    pub(crate) fn col(&self, k: usize) -> usize {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&self.cols[k * 8..k * 8 + 8]);
        u64::from_le_bytes(raw) as usize
    }

    pub(crate) fn val<T: Scalar>(&self, k: usize) -> T {
        T::read_le(&self.vals[k * T::WIRE_BYTES..])
    }

    pub(crate) fn cols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(|k| self.col(k))
    }
}

/// A list of global row ids, as sent in gather requests.
pub(crate) fn encode_indices(rows: &[usize]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(rows.len());
    for &r in rows {
        w.u64(r);
    }
    w.finish()
}

pub(crate) fn decode_indices(buf: &[u8]) -> Result<Vec<usize>, CommError> {
    let mut r = Reader::new(buf);
    let n = r.u64()?;
    let out = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(out)
}
