//! Row-wise sparse products `L * R` where `R` is a distributed matrix whose
//! needed rows are either owned locally or were gathered from other ranks.
//!
//! The driver pair [`symbolic_ap`] / [`numeric_ap`] forms `A * P`; the
//! same kernels with no gathered rows form `P^T * (A * P)` pieces locally.

use std::sync::Arc;
use std::time::Instant;

use crate::comm::{gather_remote_rows_symbolic, update_remote_rows_numeric, RankContext, RemoteRows};
use crate::error::{Error, Result};
use crate::metrics::Phase;
use crate::partition::{build_neighbor_list, LocalMatrix, RowPartition};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, RowAccumulator, RowSet};

/// Structure of one output row, split by ownership of its global columns.
#[derive(Debug, Clone, Default)]
pub struct RowStructure {
    pub diag_cols: RowSet,
    pub offdiag_cols: RowSet,
}

impl RowStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.diag_cols.len() + self.offdiag_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.diag_cols.clear();
        self.offdiag_cols.clear();
    }

    pub fn heap_bytes(&self) -> usize {
        self.diag_cols.heap_bytes() + self.offdiag_cols.heap_bytes()
    }
}

/// The right factor of a row-wise product: locally owned rows plus rows
/// gathered from other ranks, both with the same column partition.
#[derive(Clone, Copy)]
pub(crate) struct RightFactor<'a, T> {
    pub(crate) local: &'a LocalMatrix<T>,
    pub(crate) remote: Option<&'a CsrMatrix<T>>,
}

/// One row of the left factor: entries addressing local rows of the right
/// factor and entries addressing gathered rows.
#[derive(Clone, Copy)]
pub(crate) struct LeftRow<'a, T> {
    pub(crate) local_cols: &'a [usize],
    pub(crate) local_vals: &'a [T],
    pub(crate) remote_cols: &'a [usize],
    pub(crate) remote_vals: &'a [T],
}

impl<'a, T: Scalar> LeftRow<'a, T> {
    pub(crate) fn of_local(m: &'a LocalMatrix<T>, i: usize) -> Self {
        Self {
            local_cols: m.diag().row_cols(i),
            local_vals: m.diag().row_values(i),
            remote_cols: m.offdiag().row_cols(i),
            remote_vals: m.offdiag().row_values(i),
        }
    }

    pub(crate) fn of_csr(m: &'a CsrMatrix<T>, i: usize) -> Self {
        Self {
            local_cols: m.row_cols(i),
            local_vals: m.row_values(i),
            remote_cols: &[],
            remote_vals: &[],
        }
    }

}

impl<T: Scalar> RightFactor<'_, T> {
    pub(crate) fn symbolic_row(&self, left: LeftRow<'_, T>, out: &mut RowStructure) {
        let r = self.local;
        let cols = r.col_range();
        let map = r.col_map();
        for &k in left.local_cols {
            for &c in r.diag().row_cols(k) {
                out.diag_cols.insert(c + cols.start);
            }
            for &c in r.offdiag().row_cols(k) {
                out.offdiag_cols.insert(map[c]);
            }
        }
        if let Some(remote) = self.remote {
            for &k in left.remote_cols {
                for &j in remote.row_cols(k) {
                    if cols.contains(&j) {
                        out.diag_cols.insert(j);
                    } else {
                        out.offdiag_cols.insert(j);
                    }
                }
            }
        }
    }

    pub(crate) fn numeric_row(&self, left: LeftRow<'_, T>, acc: &mut RowAccumulator<T>) {
        let r = self.local;
        let cs = r.col_range().start;
        let map = r.col_map();
        for (&k, &a) in left.local_cols.iter().zip(left.local_vals) {
            let d = r.diag();
            for (&c, &v) in d.row_cols(k).iter().zip(d.row_values(k)) {
                acc.add(c + cs, a * v);
            }
            let o = r.offdiag();
            for (&c, &v) in o.row_cols(k).iter().zip(o.row_values(k)) {
                acc.add(map[c], a * v);
            }
        }
        if let Some(remote) = self.remote {
            for (&k, &a) in left.remote_cols.iter().zip(left.remote_vals) {
                for (&j, &v) in remote.row_cols(k).iter().zip(remote.row_values(k)) {
                    acc.add(j, a * v);
                }
            }
        }
    }
}

/// Accumulates a local matrix row by row from sorted column sets.
#[derive(Debug)]
pub(crate) struct StructureBuilder {
    col_start: usize,
    d_off: Vec<usize>,
    d_cols: Vec<usize>,
    o_off: Vec<usize>,
    o_cols: Vec<usize>,
}

impl StructureBuilder {
    pub(crate) fn new(col_part: &RowPartition, rank: usize, nrows: usize) -> Self {
        let mut d_off = Vec::with_capacity(nrows + 1);
        let mut o_off = Vec::with_capacity(nrows + 1);
        d_off.push(0);
        o_off.push(0);
        Self {
            col_start: col_part.range(rank).start,
            d_off,
            d_cols: Vec::new(),
            o_off,
            o_cols: Vec::new(),
        }
    }

    /// Appends a row; both iterators yield ascending global columns.
    pub(crate) fn push(&mut self, diag: impl Iterator<Item = usize>, offdiag: impl Iterator<Item = usize>) {
        let cs = self.col_start;
        self.d_cols.extend(diag.map(|j| j - cs));
        self.o_cols.extend(offdiag);
        self.d_off.push(self.d_cols.len());
        self.o_off.push(self.o_cols.len());
    }

    pub(crate) fn push_structure(&mut self, rs: &mut RowStructure) {
        let RowStructure {
            diag_cols,
            offdiag_cols,
        } = rs;
        self.push(diag_cols.sorted(), offdiag_cols.sorted());
    }

    /// Finishes with zero values, or symbolic when `numeric` is false.
    pub(crate) fn finish<T: Scalar>(
        self,
        rank: usize,
        row_part: Arc<RowPartition>,
        col_part: Arc<RowPartition>,
        numeric: bool,
    ) -> Result<LocalMatrix<T>> {
        let nrows = self.d_off.len() - 1;
        let ncols_d = col_part.local_len(rank);
        let mut col_map = self.o_cols.clone();
        col_map.sort_unstable();
        col_map.dedup();
        let o_cols: Vec<usize> = self
            .o_cols
            .iter()
            .map(|j| col_map.binary_search(j).expect("collected above"))
            .collect();
        let dn = self.d_cols.len();
        let on = o_cols.len();
        let diag = CsrMatrix::new(nrows, ncols_d, self.d_off, self.d_cols, numeric.then(|| vec![T::zero(); dn]))?;
        let offdiag = CsrMatrix::new(nrows, col_map.len(), self.o_off, o_cols, numeric.then(|| vec![T::zero(); on]))?;
        LocalMatrix::from_parts(rank, row_part, col_part, diag, offdiag, col_map)
    }
}

/// Checks that `A` and `P` conform for `A * P` on this rank.
pub(crate) fn check_conforming<T: Scalar>(a: &LocalMatrix<T>, p: &LocalMatrix<T>) -> Result<()> {
    if a.ncols_global() != p.row_partition().nglobal() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} columns but P has {} rows",
            a.ncols_global(),
            p.row_partition().nglobal()
        )));
    }
    if a.rank() != p.rank() {
        return Err(Error::Partition(format!(
            "A belongs to rank {} and P to rank {}",
            a.rank(),
            p.rank()
        )));
    }
    if **a.col_partition() != **p.row_partition() || **a.row_partition() != **p.row_partition() {
        return Err(Error::Partition(
            "A's row and column partitions must both equal P's row partition".into(),
        ));
    }
    Ok(())
}

/// Structure of row `i` of `A * P` on this rank, classified against the
/// rank's owned columns of `P`.
pub fn symbolic_row_ap<T: Scalar>(
    i: usize,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    rr: &RemoteRows<T>,
    out: &mut RowStructure,
) {
    let right = RightFactor {
        local: p,
        remote: Some(rr.rows()),
    };
    right.symbolic_row(LeftRow::of_local(a, i), out);
}

/// Values of row `i` of `A * P`, keyed by global column.
pub fn numeric_row_ap<T: Scalar>(
    i: usize,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    rr: &RemoteRows<T>,
    acc: &mut RowAccumulator<T>,
) {
    let right = RightFactor {
        local: p,
        remote: Some(rr.rows()),
    };
    right.numeric_row(LeftRow::of_local(a, i), acc);
}

/// Collective: gathers the remote rows of `P` and allocates `A * P` with
/// zero values. Row capacities are exactly the symbolic row sizes.
pub fn symbolic_ap<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
) -> Result<(LocalMatrix<T>, RemoteRows<T>)> {
    let start = Instant::now();
    let (c, rr, _) = symbolic_ap_tracked(ctx, a, p)?;
    ctx.timer_mut().add(Phase::Symbolic, start.elapsed());
    Ok((c, rr))
}

/// As [`symbolic_ap`], also reporting the bytes of the reused row sets.
pub(crate) fn symbolic_ap_tracked<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
) -> Result<(LocalMatrix<T>, RemoteRows<T>, usize)> {
    check_conforming(a, p)?;
    let nb = build_neighbor_list(a, p.row_partition())?;
    let rr = gather_remote_rows_symbolic(ctx, &nb, p)?;
    let mut rs = RowStructure::new();
    let mut b = StructureBuilder::new(p.col_partition(), p.rank(), a.nrows());
    for i in 0..a.nrows() {
        symbolic_row_ap(i, a, p, &rr, &mut rs);
        b.push_structure(&mut rs);
        rs.clear();
    }
    let c = b.finish(p.rank(), p.row_partition().clone(), p.col_partition().clone(), !p.is_symbolic())?;
    Ok((c, rr, rs.heap_bytes()))
}

/// Collective: refreshes the gathered rows and fills `c` (from
/// [`symbolic_ap`]) with the values of `A * P`. Every row must fill its
/// allocation exactly.
pub fn numeric_ap<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    c: &mut LocalMatrix<T>,
    rr: &mut RemoteRows<T>,
) -> Result<()> {
    let start = Instant::now();
    let mut acc = RowAccumulator::new();
    numeric_ap_with(ctx, a, p, c, rr, &mut acc)?;
    ctx.timer_mut().add(Phase::Numeric, start.elapsed());
    Ok(())
}

pub(crate) fn numeric_ap_with<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    c: &mut LocalMatrix<T>,
    rr: &mut RemoteRows<T>,
    acc: &mut RowAccumulator<T>,
) -> Result<()> {
    check_conforming(a, p)?;
    if c.nrows() != a.nrows() {
        return Err(Error::StructuralDrift("A*P allocation has the wrong row count".into()));
    }
    if a.col_map() != rr.source_cols() {
        return Err(Error::StructuralDrift(
            "off-diagonal columns of A changed since the symbolic phase".into(),
        ));
    }
    update_remote_rows_numeric(ctx, rr, p)?;
    for i in 0..a.nrows() {
        numeric_row_ap(i, a, p, rr, acc);
        c.fill_row_exact(i, acc.drain_sorted())?;
    }
    Ok(())
}
