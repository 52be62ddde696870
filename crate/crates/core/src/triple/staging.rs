//! Send-side rows of the output owned by other ranks, and merging of the
//! rows other ranks send here.

use std::mem::size_of;
use std::ops::Range;

use crate::comm::wire::{Reader, Writer};
use crate::error::{Error, Result};
use crate::partition::{LocalMatrix, RowPartition};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, RowSet};
use crate::spgemm::RowStructure;

/// Where each staged row goes. Staged row `k` is global output row
/// `rows[k]`; rows are ascending, so each destination owns one contiguous
/// range of them.
#[derive(Debug, Clone, Default)]
pub(crate) struct SendPattern {
    pub(crate) rows: Vec<usize>,
    pub(crate) dests: Vec<(usize, Range<usize>)>,
    pub(crate) sources: Vec<usize>,
}

impl SendPattern {
    pub(crate) fn new(rows: &[usize], part: &RowPartition) -> Result<Self> {
        let mut dests: Vec<(usize, Range<usize>)> = Vec::new();
        for (k, &g) in rows.iter().enumerate() {
            let owner = part.owner(g)?;
            match dests.last_mut() {
                Some((d, r)) if *d == owner => r.end = k + 1,
                _ => dests.push((owner, k..k + 1)),
            }
        }
        Ok(Self {
            rows: rows.to_vec(),
            dests,
            sources: Vec::new(),
        })
    }


    /// One payload per destination, in destination order.
    pub(crate) fn encode<T: Scalar>(&self, staging: &CsrMatrix<T>, with_values: bool) -> Vec<(usize, Vec<u8>)> {
        self.dests
            .iter()
            .map(|(d, range)| {
                let mut w = Writer::new();
                w.u64(range.len());
                for k in range.clone() {
                    let vals = with_values.then(|| staging.row_values(k));
                    w.row(self.rows[k], staging.row_cols(k), vals);
                }
                (*d, w.finish())
            })
            .collect()
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        (self.rows.capacity() + 3 * self.dests.capacity() + self.sources.capacity()) * size_of::<usize>()
    }
}

/// Staging matrix shaped by per-row column sets, values zero.
pub(crate) fn staging_from_sets<T: Scalar>(sets: &mut [RowSet], ncols: usize) -> Result<CsrMatrix<T>> {
    let mut offsets = Vec::with_capacity(sets.len() + 1);
    offsets.push(0);
    let mut cols = Vec::with_capacity(sets.iter().map(RowSet::len).sum());
    for s in sets.iter_mut() {
        cols.extend(s.sorted());
        offsets.push(cols.len());
    }
    let nnz = cols.len();
    CsrMatrix::new(sets.len(), ncols, offsets, cols, Some(vec![T::zero(); nnz]))
}

pub(crate) fn sets_bytes(sets: &[RowSet]) -> usize {
    sets.iter().map(RowSet::heap_bytes).sum::<usize>() + std::mem::size_of_val(sets)
}

pub(crate) fn structures_bytes(rows: &[RowStructure]) -> usize {
    rows.iter().map(RowStructure::heap_bytes).sum::<usize>() + std::mem::size_of_val(rows)
}

fn foreign_row(row: usize, owned: &Range<usize>, source: usize) -> Error {
    Error::StructuralDrift(format!(
        "rank {source} sent row {row}, outside the owned rows {owned:?}"
    ))
}

/// Adds received symbolic rows into per-row structures of the owned rows.
pub(crate) fn merge_symbolic(
    payloads: &[(usize, Vec<u8>)],
    rows: &mut [RowStructure],
    owned: Range<usize>,
) -> Result<()> {
    for (source, buf) in payloads {
        let mut rd = Reader::new(buf);
        let n = rd.u64()?;
        for _ in 0..n {
            let row = rd.row::<f64>(false)?;
            if !owned.contains(&row.row) {
                return Err(foreign_row(row.row, &owned, *source));
            }
            let rs = &mut rows[row.row - owned.start];
            for j in row.cols() {
                if owned.contains(&j) {
                    rs.diag_cols.insert(j);
                } else {
                    rs.offdiag_cols.insert(j);
                }
            }
        }
        rd.finish()?;
    }
    Ok(())
}

/// Adds received numeric rows into `c`, sources in the given order.
pub(crate) fn merge_numeric<T: Scalar>(
    payloads: &[(usize, Vec<u8>)],
    c: &mut LocalMatrix<T>,
    touched: &mut [bool],
) -> Result<()> {
    let owned = c.row_range();
    for (source, buf) in payloads {
        let mut rd = Reader::new(buf);
        let n = rd.u64()?;
        for _ in 0..n {
            let row = rd.row::<T>(true)?;
            if !owned.contains(&row.row) {
                return Err(foreign_row(row.row, &owned, *source));
            }
            let entries = (0..row.len).map(|k| (row.col(k), row.val::<T>(k)));
            c.add_row_entries(row.row - owned.start, entries, touched)?;
        }
        rd.finish()?;
    }
    Ok(())
}

pub(crate) fn check_touched(touched: &[bool], what: &str) -> Result<()> {
    match touched.iter().position(|t| !t) {
        None => Ok(()),
        Some(k) => Err(Error::StructuralDrift(format!(
            "{what}: stored entry {k} received no contribution"
        ))),
    }
}
