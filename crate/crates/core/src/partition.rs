//! Contiguous block-row ownership and the diagonal/off-diagonal split of a
//! rank's rows.

use std::mem::size_of;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, Triplet};

/// Ownership of a global index range split over `np` ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowPartition {
    offsets: Vec<usize>,
}

impl RowPartition {
    /// Even block split; the first `nglobal % np` ranks own one extra row.
    pub fn new(nglobal: usize, np: usize) -> Result<Self> {
        if np == 0 {
            return Err(Error::Partition("a partition needs at least one rank".into()));
        }
        let base = nglobal / np;
        let extra = nglobal % np;
        let mut offsets = Vec::with_capacity(np + 1);
        offsets.push(0);
        for r in 0..np {
            let size = base + usize::from(r < extra);
            offsets.push(offsets[r] + size);
        }
        Ok(Self { offsets })
    }

    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self> {
        if offsets.len() < 2 || offsets[0] != 0 {
            return Err(Error::Partition(
                "offsets need a leading 0 and at least one rank".into(),
            ));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Partition("offsets must be nondecreasing".into()));
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn np(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nglobal(&self) -> usize {
        self.offsets[self.np()]
    }

    pub fn range(&self, rank: usize) -> Range<usize> {
        self.offsets[rank]..self.offsets[rank + 1]
    }

    pub fn local_len(&self, rank: usize) -> usize {
        self.offsets[rank + 1] - self.offsets[rank]
    }

    pub fn owner(&self, i: usize) -> Result<usize> {
        if i >= self.nglobal() {
            return Err(Error::IndexOutOfRange {
                index: i,
                nglobal: self.nglobal(),
            });
        }
        Ok(self.offsets.partition_point(|&o| o <= i) - 1)
    }
}

pub fn make_partition(nglobal: usize, np: usize) -> Result<RowPartition> {
    RowPartition::new(nglobal, np)
}

pub fn owner(part: &RowPartition, i: usize) -> Result<usize> {
    part.owner(i)
}

/// One rank's rows of a distributed matrix.
///
/// `diag` holds the columns inside the rank's owned column range, indexed
/// locally; `offdiag` holds all other columns through the ascending
/// compact-to-global `col_map`.
#[derive(Debug, Clone)]
pub struct LocalMatrix<T> {
    rank: usize,
    row_part: Arc<RowPartition>,
    col_part: Arc<RowPartition>,
    diag: CsrMatrix<T>,
    offdiag: CsrMatrix<T>,
    col_map: Vec<usize>,
}

impl<T: Scalar> LocalMatrix<T> {
    /// Splits `rows` (the rank's owned rows, global columns) into blocks.
    pub fn from_global_rows(
        rank: usize,
        rows: &CsrMatrix<T>,
        row_part: Arc<RowPartition>,
        col_part: Arc<RowPartition>,
    ) -> Result<Self> {
        check_rank(rank, &row_part, &col_part)?;
        let owned = row_part.local_len(rank);
        if rows.nrows() > owned {
            return Err(Error::UnownedRow {
                rank,
                row: row_part.range(rank).start + owned,
            });
        }
        if rows.nrows() < owned {
            return Err(Error::DimensionMismatch(format!(
                "rank {rank} owns {owned} rows but {} were supplied",
                rows.nrows()
            )));
        }
        if rows.ncols() != col_part.nglobal() {
            return Err(Error::DimensionMismatch(format!(
                "rows have {} columns, column partition covers {}",
                rows.ncols(),
                col_part.nglobal()
            )));
        }
        let cols = col_part.range(rank);
        let mut col_map: Vec<usize> = rows
            .col_indices()
            .iter()
            .copied()
            .filter(|c| !cols.contains(c))
            .collect();
        col_map.sort_unstable();
        col_map.dedup();

        let symbolic = rows.is_symbolic();
        let mut d_off = vec![0usize; owned + 1];
        let mut o_off = vec![0usize; owned + 1];
        let mut d_cols = Vec::new();
        let mut o_cols = Vec::new();
        let mut d_vals = Vec::new();
        let mut o_vals = Vec::new();
        for i in 0..owned {
            let vals = rows.row_values(i);
            for (k, &c) in rows.row_cols(i).iter().enumerate() {
                if cols.contains(&c) {
                    d_cols.push(c - cols.start);
                    if !symbolic {
                        d_vals.push(vals[k]);
                    }
                } else {
                    o_cols.push(col_map.binary_search(&c).expect("collected above"));
                    if !symbolic {
                        o_vals.push(vals[k]);
                    }
                }
            }
            d_off[i + 1] = d_cols.len();
            o_off[i + 1] = o_cols.len();
        }
        let (d_vals, o_vals) = if symbolic {
            (None, None)
        } else {
            (Some(d_vals), Some(o_vals))
        };
        Ok(Self {
            rank,
            diag: CsrMatrix::from_parts_unchecked(owned, cols.len(), d_off, d_cols, d_vals),
            offdiag: CsrMatrix::from_parts_unchecked(owned, col_map.len(), o_off, o_cols, o_vals),
            col_map,
            row_part,
            col_part,
        })
    }

    /// Builds from globally indexed triplets, all of which must lie in the
    /// rank's owned rows.
    pub fn from_triplets(
        rank: usize,
        entries: &[Triplet<T>],
        row_part: Arc<RowPartition>,
        col_part: Arc<RowPartition>,
    ) -> Result<Self> {
        check_rank(rank, &row_part, &col_part)?;
        let rows = row_part.range(rank);
        let mut local = Vec::with_capacity(entries.len());
        for t in entries {
            if !rows.contains(&t.row) {
                return Err(Error::UnownedRow { rank, row: t.row });
            }
            local.push(Triplet::new(t.row - rows.start, t.col, t.val));
        }
        let m = CsrMatrix::from_triplets(rows.len(), col_part.nglobal(), &local)?;
        Self::from_global_rows(rank, &m, row_part, col_part)
    }

    /// Assembles from already split blocks.
    pub fn from_parts(
        rank: usize,
        row_part: Arc<RowPartition>,
        col_part: Arc<RowPartition>,
        diag: CsrMatrix<T>,
        offdiag: CsrMatrix<T>,
        col_map: Vec<usize>,
    ) -> Result<Self> {
        check_rank(rank, &row_part, &col_part)?;
        let owned = row_part.local_len(rank);
        let cols = col_part.range(rank);
        diag.validate()?;
        offdiag.validate()?;
        if diag.nrows() != owned || offdiag.nrows() != owned {
            return Err(Error::DimensionMismatch("block row counts differ from ownership".into()));
        }
        if diag.ncols() != cols.len() || offdiag.ncols() != col_map.len() {
            return Err(Error::DimensionMismatch("block column counts are inconsistent".into()));
        }
        if col_map.windows(2).any(|w| w[0] >= w[1])
            || col_map
                .iter()
                .any(|c| cols.contains(c) || *c >= col_part.nglobal())
        {
            return Err(Error::InvalidStructure(
                "col_map must be ascending and outside the owned column range".into(),
            ));
        }
        Ok(Self {
            rank,
            row_part,
            col_part,
            diag,
            offdiag,
            col_map,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn row_partition(&self) -> &Arc<RowPartition> {
        &self.row_part
    }

    pub fn col_partition(&self) -> &Arc<RowPartition> {
        &self.col_part
    }

    /// Owned global rows.
    pub fn row_range(&self) -> Range<usize> {
        self.row_part.range(self.rank)
    }

    /// Owned global columns (the diagonal block).
    pub fn col_range(&self) -> Range<usize> {
        self.col_part.range(self.rank)
    }

    pub fn nrows(&self) -> usize {
        self.diag.nrows()
    }

    pub fn ncols_global(&self) -> usize {
        self.col_part.nglobal()
    }

    pub fn diag(&self) -> &CsrMatrix<T> {
        &self.diag
    }

    pub fn offdiag(&self) -> &CsrMatrix<T> {
        &self.offdiag
    }



    pub fn col_map(&self) -> &[usize] {
        &self.col_map
    }

    pub fn nnz(&self) -> usize {
        self.diag.nnz() + self.offdiag.nnz()
    }

    pub fn is_symbolic(&self) -> bool {
        self.diag.is_symbolic()
    }

    /// Column indices of local row `i` in global numbering, ascending.
    pub fn global_row_cols(&self, i: usize) -> Vec<usize> {
        let cs = self.col_range().start;
        let mut cols: Vec<usize> = self.diag.row_cols(i).iter().map(|c| c + cs).collect();
        cols.extend(self.offdiag.row_cols(i).iter().map(|&c| self.col_map[c]));
        cols.sort_unstable();
        cols
    }

    /// Calls `f(global_col, k_diag_or_offdiag)` over local row `i` in
    /// ascending global column order. The second argument is `Ok(k)` for a
    /// position in the diagonal block and `Err(k)` for the off-diagonal one.
    pub(crate) fn for_each_global(&self, i: usize, mut f: impl FnMut(usize, std::result::Result<usize, usize>)) {
        let cs = self.col_range().start;
        let orange = self.offdiag.row_range(i);
        let ocols = self.offdiag.row_cols(i);
        let split = ocols.partition_point(|&c| self.col_map[c] < cs);
        for (k, &c) in ocols[..split].iter().enumerate() {
            f(self.col_map[c], Err(orange.start + k));
        }
        for k in self.diag.row_range(i) {
            f(self.diag.col_indices()[k] + cs, Ok(k));
        }
        for (k, &c) in ocols[split..].iter().enumerate() {
            f(self.col_map[c], Err(orange.start + split + k));
        }
    }

    /// Overwrites row `i` with `entries` (global column, value), which must
    /// list exactly the stored columns in ascending order.
    pub(crate) fn fill_row_exact(&mut self, i: usize, entries: impl Iterator<Item = (usize, T)>) -> Result<()> {
        let cols = self.col_range();
        let mut pd = self.diag.row_range(i);
        let mut po = self.offdiag.row_range(i);
        let (dcols, dvals) = self.diag.cols_and_values_mut();
        let (ocols, ovals) = self.offdiag.cols_and_values_mut();
        let dvals = dvals.ok_or_else(symbolic_fill)?;
        let ovals = ovals.ok_or_else(symbolic_fill)?;
        for (j, v) in entries {
            if cols.contains(&j) {
                match pd.next() {
                    Some(k) if dcols[k] + cols.start == j => dvals[k] = v,
                    _ => return Err(drift(self.rank, i, j)),
                }
            } else {
                match po.next() {
                    Some(k) if self.col_map[ocols[k]] == j => ovals[k] = v,
                    _ => return Err(drift(self.rank, i, j)),
                }
            }
        }
        if pd.next().is_some() || po.next().is_some() {
            return Err(Error::StructuralDrift(format!(
                "rank {} row {i}: fill below symbolic capacity",
                self.rank
            )));
        }
        Ok(())
    }

    /// Adds `entries` (ascending global columns, each already stored) into
    /// row `i`, marking the positions in `touched` (diagonal positions
    /// first, then off-diagonal ones offset by the diagonal nnz).
    pub(crate) fn add_row_entries(
        &mut self,
        i: usize,
        entries: impl Iterator<Item = (usize, T)>,
        touched: &mut [bool],
    ) -> Result<()> {
        let cols = self.col_range();
        let dnnz = self.diag.nnz();
        let dr = self.diag.row_range(i);
        let or = self.offdiag.row_range(i);
        let (mut pd, mut po) = (dr.start, or.start);
        let (dcols, dvals) = self.diag.cols_and_values_mut();
        let (ocols, ovals) = self.offdiag.cols_and_values_mut();
        let dvals = dvals.ok_or_else(symbolic_fill)?;
        let ovals = ovals.ok_or_else(symbolic_fill)?;
        for (j, v) in entries {
            if cols.contains(&j) {
                let local = j - cols.start;
                while pd < dr.end && dcols[pd] < local {
                    pd += 1;
                }
                if pd == dr.end || dcols[pd] != local {
                    return Err(drift(self.rank, i, j));
                }
                dvals[pd] += v;
                touched[pd] = true;
            } else {
                while po < or.end && self.col_map[ocols[po]] < j {
                    po += 1;
                }
                if po == or.end || self.col_map[ocols[po]] != j {
                    return Err(drift(self.rank, i, j));
                }
                ovals[po] += v;
                touched[dnnz + po] = true;
            }
        }
        Ok(())
    }

    pub(crate) fn zero_values(&mut self) {
        self.diag.fill_values(T::zero());
        self.offdiag.fill_values(T::zero());
    }

    /// Merges the two blocks back into the rank's rows with global columns.
    pub fn to_global_rows(&self) -> CsrMatrix<T> {
        let cs = self.col_range().start;
        let symbolic = self.is_symbolic();
        let n = self.nrows();
        let mut offsets = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(if symbolic { 0 } else { self.nnz() });
        for i in 0..n {
            let mut row: Vec<(usize, Option<T>)> = Vec::new();
            let dv = self.diag.row_values(i);
            for (k, &c) in self.diag.row_cols(i).iter().enumerate() {
                row.push((c + cs, dv.get(k).copied()));
            }
            let ov = self.offdiag.row_values(i);
            for (k, &c) in self.offdiag.row_cols(i).iter().enumerate() {
                row.push((self.col_map[c], ov.get(k).copied()));
            }
            row.sort_unstable_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                if let Some(v) = v {
                    vals.push(v);
                }
            }
            offsets[i + 1] = cols.len();
        }
        CsrMatrix::from_parts_unchecked(
            n,
            self.ncols_global(),
            offsets,
            cols,
            (!symbolic).then_some(vals),
        )
    }

    pub fn scale(&mut self, alpha: T) {
        self.diag.scale(alpha);
        self.offdiag.scale(alpha);
    }

    pub fn map_values(&self, f: impl Fn(T) -> T + Copy) -> Self {
        let mut out = self.clone();
        out.diag = self.diag.map_values(f);
        out.offdiag = self.offdiag.map_values(f);
        out
    }

    pub fn same_structure(&self, other: &Self) -> bool {
        self.diag.same_structure(&other.diag)
            && self.offdiag.same_structure(&other.offdiag)
            && self.col_map == other.col_map
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.col_map == other.col_map && self.diag.bit_eq(&other.diag) && self.offdiag.bit_eq(&other.offdiag)
    }

    pub fn heap_bytes(&self) -> usize {
        self.diag.heap_bytes() + self.offdiag.heap_bytes() + self.col_map.len() * size_of::<usize>()
    }
}

fn symbolic_fill() -> Error {
    Error::InvalidStructure("numeric fill into a symbolic matrix".into())
}

fn drift(rank: usize, row: usize, col: usize) -> Error {
    Error::StructuralDrift(format!(
        "rank {rank} row {row}: column {col} was not predicted by the symbolic phase"
    ))
}

fn check_rank(rank: usize, row_part: &RowPartition, col_part: &RowPartition) -> Result<()> {
    if rank >= row_part.np() || row_part.np() != col_part.np() {
        return Err(Error::Partition(format!(
            "rank {rank} invalid for row/column partitions over {}/{} ranks",
            row_part.np(),
            col_part.np()
        )));
    }
    Ok(())
}

pub fn split_local<T: Scalar>(
    rank: usize,
    rows: &CsrMatrix<T>,
    row_part: Arc<RowPartition>,
    col_part: Arc<RowPartition>,
) -> Result<LocalMatrix<T>> {
    LocalMatrix::from_global_rows(rank, rows, row_part, col_part)
}

/// Remote ranks a local matrix couples to, with the global columns needed
/// from each.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborList {
    pub ranks: Vec<usize>,
    pub cols: Vec<Vec<usize>>,
}

impl NeighborList {
    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn cols_of(&self, rank: usize) -> Option<&[usize]> {
        self.ranks
            .binary_search(&rank)
            .ok()
            .map(|k| self.cols[k].as_slice())
    }
}

/// Groups the off-diagonal column map by owning rank under `col_part`.
pub fn build_neighbor_list<T: Scalar>(m: &LocalMatrix<T>, col_part: &RowPartition) -> Result<NeighborList> {
    let mut out = NeighborList::default();
    for &c in m.col_map() {
        let r = col_part.owner(c)?;
        if out.ranks.last() != Some(&r) {
            out.ranks.push(r);
            out.cols.push(Vec::new());
        }
        out.cols.last_mut().expect("pushed above").push(c);
    }
    Ok(out)
}

/// A matrix distributed over all ranks, one `LocalMatrix` per rank.
///
/// This is a harness-side container; inside a rank program only the rank's
/// own `LocalMatrix` is touched.
#[derive(Debug, Clone)]
pub struct DistMatrix<T> {
    row_part: Arc<RowPartition>,
    col_part: Arc<RowPartition>,
    locals: Vec<LocalMatrix<T>>,
}

impl<T: Scalar> DistMatrix<T> {
    pub fn from_global(
        global: &CsrMatrix<T>,
        row_part: Arc<RowPartition>,
        col_part: Arc<RowPartition>,
    ) -> Result<Self> {
        if global.nrows() != row_part.nglobal() || global.ncols() != col_part.nglobal() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix against {}x{} partitions",
                global.nrows(),
                global.ncols(),
                row_part.nglobal(),
                col_part.nglobal()
            )));
        }
        let locals = (0..row_part.np())
            .map(|r| {
                let rows = slice_rows(global, row_part.range(r));
                LocalMatrix::from_global_rows(r, &rows, row_part.clone(), col_part.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            row_part,
            col_part,
            locals,
        })
    }

    pub fn from_locals(locals: Vec<LocalMatrix<T>>) -> Result<Self> {
        let first = locals
            .first()
            .ok_or_else(|| Error::Partition("no local matrices".into()))?;
        let row_part = first.row_part.clone();
        let col_part = first.col_part.clone();
        if locals.len() != row_part.np() {
            return Err(Error::Partition("one local matrix per rank is required".into()));
        }
        for (r, l) in locals.iter().enumerate() {
            if l.rank != r || *l.row_part != *row_part || *l.col_part != *col_part {
                return Err(Error::Partition(format!("local matrix {r} has a foreign layout")));
            }
        }
        Ok(Self {
            row_part,
            col_part,
            locals,
        })
    }

    pub fn row_partition(&self) -> &Arc<RowPartition> {
        &self.row_part
    }

    pub fn col_partition(&self) -> &Arc<RowPartition> {
        &self.col_part
    }

    pub fn np(&self) -> usize {
        self.row_part.np()
    }

    pub fn nrows(&self) -> usize {
        self.row_part.nglobal()
    }

    pub fn ncols(&self) -> usize {
        self.col_part.nglobal()
    }

    pub fn local(&self, rank: usize) -> &LocalMatrix<T> {
        &self.locals[rank]
    }

    pub fn locals(&self) -> &[LocalMatrix<T>] {
        &self.locals
    }

    pub fn into_locals(self) -> Vec<LocalMatrix<T>> {
        self.locals
    }

    pub fn nnz(&self) -> usize {
        self.locals.iter().map(LocalMatrix::nnz).sum()
    }

    /// Stacks every rank's rows into one global matrix.
    pub fn assemble(&self) -> CsrMatrix<T> {
        let symbolic = self.locals.iter().any(LocalMatrix::is_symbolic);
        let mut offsets = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for l in &self.locals {
            let rows = l.to_global_rows();
            let base = cols.len();
            offsets.extend(rows.row_offsets()[1..].iter().map(|o| o + base));
            cols.extend_from_slice(rows.col_indices());
            if let Some(v) = rows.values() {
                vals.extend_from_slice(v);
            }
        }
        CsrMatrix::from_parts_unchecked(
            self.nrows(),
            self.ncols(),
            offsets,
            cols,
            (!symbolic).then_some(vals),
        )
    }

    pub fn map_values(&self, f: impl Fn(T) -> T + Copy) -> Self {
        Self {
            row_part: self.row_part.clone(),
            col_part: self.col_part.clone(),
            locals: self.locals.iter().map(|l| l.map_values(f)).collect(),
        }
    }
}

/// Rows `range` of `m` as their own matrix.
pub fn slice_rows<T: Scalar>(m: &CsrMatrix<T>, range: Range<usize>) -> CsrMatrix<T> {
    let lo = m.row_offsets()[range.start];
    let hi = m.row_offsets()[range.end];
    let offsets = m.row_offsets()[range.start..=range.end]
        .iter()
        .map(|o| o - lo)
        .collect();
    CsrMatrix::from_parts_unchecked(
        range.len(),
        m.ncols(),
        offsets,
        m.col_indices()[lo..hi].to_vec(),
        m.values().map(|v| v[lo..hi].to_vec()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 6x6 operator pattern of the toy row-partitioning example.
    pub(crate) fn toy_a() -> CsrMatrix<f64> {
        let pattern = [
            (0, 0),
            (0, 1),
            (0, 4),
            (1, 1),
            (1, 2),
            (1, 4),
            (2, 0),
            (2, 3),
            (2, 4),
            (3, 1),
            (3, 3),
            (4, 3),
            (4, 4),
            (5, 1),
            (5, 4),
            (5, 5),
        ];
        let t: Vec<_> = pattern.iter().map(|&(r, c)| Triplet::new(r, c, 1.0)).collect();
        CsrMatrix::from_triplets(6, 6, &t).unwrap()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(RowPartition::new(6, 3).unwrap().offsets(), &[0, 2, 4, 6]);
        assert_eq!(RowPartition::new(7, 3).unwrap().offsets(), &[0, 3, 5, 7]);
        assert_eq!(RowPartition::new(5, 1).unwrap().offsets(), &[0, 5]);
        assert!(matches!(RowPartition::new(5, 0), Err(Error::Partition(_))));
    }

    #[test]
    fn owner_lookup() {
        let p = RowPartition::new(6, 3).unwrap();
        assert_eq!(p.owner(4).unwrap(), 2);
        let q = RowPartition::new(7, 3).unwrap();
        assert_eq!(q.owner(2).unwrap(), 0);
        assert_eq!(q.owner(6).unwrap(), 2);
        assert!(matches!(q.owner(7), Err(Error::IndexOutOfRange { .. })));
        // Empty trailing ranks never own anything.
        let r = RowPartition::new(2, 4).unwrap();
        assert_eq!(r.offsets(), &[0, 1, 2, 2, 2]);
        assert_eq!(r.owner(1).unwrap(), 1);
    }

    #[test]
    fn toy_rank0_split_and_neighbors() {
        let part = Arc::new(RowPartition::new(6, 3).unwrap());
        let a = toy_a();
        let l = LocalMatrix::from_global_rows(0, &slice_rows(&a, 0..2), part.clone(), part.clone())
            .unwrap();
        assert_eq!(l.col_map(), &[2, 4]);
        assert_eq!(l.diag().row_cols(0), &[0, 1]);
        assert_eq!(l.diag().row_cols(1), &[1]);
        // Row 0 hits global column 4, row 1 hits 2 and 4.
        assert_eq!(l.offdiag().row_cols(0), &[1]);
        assert_eq!(l.offdiag().row_cols(1), &[0, 1]);
        let nb = build_neighbor_list(&l, &part).unwrap();
        assert_eq!(nb.ranks, vec![1, 2]);
        assert_eq!(nb.cols, vec![vec![2], vec![4]]);
    }

    #[test]
    fn block_diagonal_has_no_offdiag() {
        let part = Arc::new(RowPartition::new(4, 2).unwrap());
        let m = CsrMatrix::from_triplets(
            4,
            4,
            &[
                Triplet::new(0, 1, 1.0),
                Triplet::new(1, 0, 1.0),
                Triplet::new(2, 3, 1.0),
                Triplet::new(3, 2, 1.0),
            ],
        )
        .unwrap();
        let d = DistMatrix::from_global(&m, part.clone(), part.clone()).unwrap();
        for l in d.locals() {
            assert_eq!(l.offdiag().nnz(), 0);
            assert!(l.col_map().is_empty());
            assert!(build_neighbor_list(l, &part).unwrap().is_empty());
        }
    }

    #[test]
    fn single_remote_owner() {
        let part = Arc::new(RowPartition::new(6, 3).unwrap());
        let m = CsrMatrix::from_triplets(
            6,
            6,
            &[Triplet::new(0, 4, 1.0), Triplet::new(1, 5, 2.0)],
        )
        .unwrap();
        let d = DistMatrix::from_global(&m, part.clone(), part.clone()).unwrap();
        let nb = build_neighbor_list(d.local(0), &part).unwrap();
        assert_eq!(nb.ranks, vec![2]);
        assert_eq!(nb.cols_of(2), Some(&[4usize, 5][..]));
    }

    #[test]
    fn unowned_rows_are_rejected() {
        let part = Arc::new(RowPartition::new(6, 3).unwrap());
        let err = LocalMatrix::from_triplets(1, &[Triplet::new(0, 0, 1.0)], part.clone(), part.clone())
            .unwrap_err();
        assert!(matches!(err, Error::UnownedRow { rank: 1, row: 0 }));
        let err = LocalMatrix::from_global_rows(0, &slice_rows(&toy_a(), 0..3), part.clone(), part)
            .unwrap_err();
        assert!(matches!(err, Error::UnownedRow { rank: 0, row: 2 }));
    }
}
