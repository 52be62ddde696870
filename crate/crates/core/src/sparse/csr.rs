use std::mem::size_of;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One `(row, col, val)` entry used for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet<T> {
    pub row: usize,
    pub col: usize,
    pub val: T,
}

impl<T> Triplet<T> {
    pub fn new(row: usize, col: usize, val: T) -> Self {
        Self { row, col, val }
    }
}

/// Compressed sparse row matrix.
///
/// Rows are column-sorted with no duplicates. `values` is `None` for
/// structure-only (symbolic) matrices. Explicit zeros are never pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Option<Vec<T>>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from raw arrays, checking every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Option<Vec<T>>,
    ) -> Result<Self> {
        let m = Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Option<Vec<T>>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), nrows + 1);
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// An all-zero matrix with numeric storage.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Some(Vec::new()))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(
            n,
            n,
            (0..=n).collect(),
            (0..n).collect(),
            Some(vec![T::one(); n]),
        )
    }

    /// Assembles from triplets, summing duplicates and sorting each row.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[Triplet<T>]) -> Result<Self> {
        for t in entries {
            if t.row >= nrows || t.col >= ncols {
                return Err(Error::Assembly {
                    row: t.row,
                    col: t.col,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<Triplet<T>> = entries.to_vec();
        sorted.sort_by_key(|t| (t.row, t.col));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for t in sorted {
            if last == Some((t.row, t.col)) {
                *values.last_mut().expect("duplicate follows an entry") += t.val;
                continue;
            }
            last = Some((t.row, t.col));
            row_offsets[t.row + 1] += 1;
            col_indices.push(t.col);
            values.push(t.val);
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self::from_parts_unchecked(
            nrows,
            ncols,
            row_offsets,
            col_indices,
            Some(values),
        ))
    }

    /// Structure-only assembly from `(row, col)` pairs; duplicates collapse.
    pub fn from_pattern(nrows: usize, ncols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let triplets: Vec<Triplet<T>> = pairs
            .iter()
            .map(|&(row, col)| Triplet::new(row, col, T::one()))
            .collect();
        Ok(Self::from_triplets(nrows, ncols, &triplets)?.into_symbolic())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStructure(msg));
        if self.row_offsets.len() != self.nrows + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.nrows + 1
            ));
        }
        if self.row_offsets[0] != 0 {
            return bad("row_offsets[0] != 0".into());
        }
        if self.row_offsets[self.nrows] != self.col_indices.len() {
            return bad("row_offsets[nrows] != nnz".into());
        }
        for i in 0..self.nrows {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if lo > hi {
                return bad(format!("row_offsets decreases at row {i}"));
            }
            let cols = &self.col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} columns are not strictly increasing"));
            }
            if let Some(&c) = cols.last() {
                if c >= self.ncols {
                    return bad(format!("row {i} has column {c} >= ncols {}", self.ncols));
                }
            }
        }
        if let Some(v) = &self.values {
            if v.len() != self.col_indices.len() {
                return bad("values length differs from nnz".into());
            }
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> Option<&[T]> {
        self.values.as_deref()
    }

    pub fn values_mut(&mut self) -> Option<&mut [T]> {
        self.values.as_deref_mut()
    }

    /// Column indices alongside mutable values, for in-place fills.
    pub(crate) fn cols_and_values_mut(&mut self) -> (&[usize], Option<&mut [T]>) {
        (&self.col_indices, self.values.as_deref_mut())
    }

    pub fn is_symbolic(&self) -> bool {
        self.values.is_none()
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    #[inline]
    pub fn row_len(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    #[inline]
    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_range(i)]
    }

    /// Values of row `i`; empty for symbolic matrices.
    #[inline]
    pub fn row_values(&self, i: usize) -> &[T] {
        match &self.values {
            Some(v) => &v[self.row_range(i)],
            None => &[],
        }
    }

    /// Value at `(i, j)` if stored.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let cols = self.row_cols(i);
        let pos = cols.binary_search(&j).ok()?;
        self.values.as_ref().map(|v| v[self.row_offsets[i] + pos])
    }

    /// Drops the values, keeping the structure.
    pub fn into_symbolic(mut self) -> Self {
        self.values = None;
        self
    }

    pub fn to_symbolic(&self) -> Self {
        Self::from_parts_unchecked(
            self.nrows,
            self.ncols,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            None,
        )
    }

    /// Gives a symbolic matrix zero-initialised value storage.
    pub fn with_zero_values(mut self) -> Self {
        self.values = Some(vec![T::zero(); self.col_indices.len()]);
        self
    }

    pub fn fill_values(&mut self, val: T) {
        if let Some(v) = &mut self.values {
            v.iter_mut().for_each(|x| *x = val);
        }
    }

    pub fn scale(&mut self, alpha: T) {
        if let Some(v) = &mut self.values {
            v.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        if let Some(v) = &mut out.values {
            v.iter_mut().for_each(|x| *x = f(*x));
        }
        out
    }

    /// Expands to triplets in row-major order. Symbolic entries get value one.
    pub fn to_triplets(&self) -> Vec<Triplet<T>> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let val = self.values.as_ref().map_or(T::one(), |v| v[k]);
                out.push(Triplet::new(i, self.col_indices[k], val));
            }
        }
        out
    }

    /// Row-major dense copy; absent entries are zero.
    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for t in self.to_triplets() {
            dense[t.row * self.ncols + t.col] = t.val;
        }
        dense
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut cursor = counts;
        let nnz = self.nnz();
        let mut col_indices = vec![0usize; nnz];
        let mut values = self.values.as_ref().map(|_| vec![T::zero(); nnz]);
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let j = self.col_indices[k];
                let dst = cursor[j];
                cursor[j] += 1;
                col_indices[dst] = i;
                if let (Some(out), Some(src)) = (&mut values, &self.values) {
                    out[dst] = src[k];
                }
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, row_offsets, col_indices, values)
    }

    /// Refreshes the values of `dst`, a previously computed transpose of a
    /// matrix with this structure. `cursor` is scratch space reused across
    /// calls.
    pub fn transpose_values_into(&self, dst: &mut Self, cursor: &mut Vec<usize>) -> Result<()> {
        if dst.nrows != self.ncols || dst.ncols != self.nrows || dst.nnz() != self.nnz() {
            return Err(Error::StructuralDrift(
                "transpose target does not match source shape".into(),
            ));
        }
        let src = self
            .values
            .as_ref()
            .ok_or_else(|| Error::InvalidStructure("numeric transpose of a symbolic matrix".into()))?;
        cursor.clear();
        cursor.extend_from_slice(&dst.row_offsets[..dst.nrows]);
        let out = dst.values.get_or_insert_with(Vec::new);
        out.resize(src.len(), T::zero());
        for (i, w) in self.row_offsets.windows(2).enumerate() {
            let r = w[0]..w[1];
            for (&j, &v) in self.col_indices[r.clone()].iter().zip(&src[r]) {
                let pos = cursor[j];
                if pos >= dst.row_offsets[j + 1] || dst.col_indices[pos] != i {
                    return Err(Error::StructuralDrift(format!(
                        "entry ({i}, {j}) not present in the cached transpose"
                    )));
                }
                cursor[j] += 1;
                out[pos] = v;
            }
        }
        Ok(())
    }

    /// Overwrites row `i` with `entries`, which must list exactly the
    /// stored columns in ascending order.
    pub(crate) fn fill_row_exact(&mut self, i: usize, entries: impl Iterator<Item = (usize, T)>) -> Result<()> {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        let vals = self
            .values
            .as_mut()
            .ok_or_else(|| Error::InvalidStructure("numeric fill into a symbolic matrix".into()))?;
        let mut pos = range.clone();
        for (j, v) in entries {
            match pos.next() {
                Some(k) if self.col_indices[k] == j => vals[k] = v,
                _ => {
                    return Err(Error::StructuralDrift(format!(
                        "row {i}: column {j} was not predicted by the symbolic phase"
                    )))
                }
            }
        }
        if pos.next().is_some() {
            return Err(Error::StructuralDrift(format!("row {i}: fill below symbolic capacity")));
        }
        Ok(())
    }

    /// Adds `entries` (ascending columns, each already stored) into row
    /// `i` and marks their positions in `touched`.
    pub(crate) fn add_row_entries(
        &mut self,
        i: usize,
        entries: impl Iterator<Item = (usize, T)>,
        touched: &mut [bool],
    ) -> Result<()> {
        let end = self.row_offsets[i + 1];
        let mut k = self.row_offsets[i];
        let vals = self
            .values
            .as_mut()
            .ok_or_else(|| Error::InvalidStructure("numeric fill into a symbolic matrix".into()))?;
        for (j, v) in entries {
            while k < end && self.col_indices[k] < j {
                k += 1;
            }
            if k == end || self.col_indices[k] != j {
                return Err(Error::StructuralDrift(format!(
                    "row {i}: column {j} was not predicted by the symbolic phase"
                )));
            }
            vals[k] += v;
            touched[k] = true;
        }
        Ok(())
    }

    /// `y = M x` for a dense `x`.
    pub fn spmv(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "spmv dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let mut acc = T::zero();
                for (c, v) in self.row_cols(i).iter().zip(self.row_values(i)) {
                    acc += *v * x[*c];
                }
                acc
            })
            .collect()
    }

    pub fn same_structure(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// Structure equal and every value bitwise equal.
    pub fn bit_eq(&self, other: &Self) -> bool {
        if !self.same_structure(other) {
            return false;
        }
        match (&self.values, &other.values) {
            (None, None) => true,
            (Some(a), Some(b)) => a.iter().zip(b).all(|(x, y)| x.bit_eq(*y)),
            _ => false,
        }
    }

    /// Bytes held by the index and value arrays.
    pub fn heap_bytes(&self) -> usize {
        (self.row_offsets.len() + self.col_indices.len()) * size_of::<usize>()
            + self.values.as_ref().map_or(0, |v| v.len() * size_of::<T>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn toy_p_triplets() -> Vec<Triplet<f64>> {
        [
            (0, 0),
            (0, 3),
            (1, 1),
            (2, 2),
            (2, 3),
            (3, 2),
            (4, 1),
            (4, 3),
            (5, 2),
        ]
        .iter()
        .map(|&(r, c)| Triplet::new(r, c, 1.0))
        .collect()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            &[Triplet::new(0, 0, 1.0), Triplet::new(0, 0, 2.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), Some(3.0));
    }

    #[test]
    fn toy_p_pattern_offsets() {
        let m = CsrMatrix::from_triplets(6, 4, &toy_p_triplets()).unwrap();
        assert_eq!(m.row_offsets(), &[0, 2, 3, 5, 6, 8, 9]);
    }

    #[test]
    fn empty_matrix() {
        let m = CsrMatrix::<f64>::from_triplets(3, 3, &[]).unwrap();
        assert_eq!(m.row_offsets(), &[0, 0, 0, 0]);
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn out_of_range_triplet_is_named() {
        let err = CsrMatrix::from_triplets(2, 3, &[Triplet::new(1, 3, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Assembly { row: 1, col: 3, .. }));
        assert!(err.to_string().contains("(1, 3)"));
    }

    #[test]
    fn identity_transposes_to_itself() {
        let id = CsrMatrix::<f64>::identity(3);
        assert!(id.transpose().bit_eq(&id));
    }

    #[test]
    fn transpose_of_toy_p() {
        let p = CsrMatrix::from_triplets(6, 4, &toy_p_triplets()).unwrap();
        let pt = p.transpose();
        assert_eq!((pt.nrows(), pt.ncols()), (4, 6));
        assert_eq!(pt.row_cols(3), &[0, 2, 4]);
    }

    #[test]
    fn symbolic_transpose_stays_symbolic() {
        let p = CsrMatrix::<f64>::from_pattern(2, 3, &[(0, 2), (1, 0)]).unwrap();
        let pt = p.transpose();
        assert!(pt.is_symbolic());
        assert_eq!(pt.row_cols(2), &[0]);
    }

    #[test]
    fn validate_rejects_unsorted_row() {
        let err = CsrMatrix::<f64>::new(1, 3, vec![0, 2], vec![2, 1], None).unwrap_err();
        assert!(matches!(err, Error::InvalidStructure(_)));
    }

    #[test]
    fn numeric_transpose_refresh() {
        let p = CsrMatrix::from_triplets(6, 4, &toy_p_triplets()).unwrap();
        let mut pt = p.transpose();
        let p2 = p.map_values(|v| v * 2.0 + 1.0);
        let mut cursor = Vec::new();
        p2.transpose_values_into(&mut pt, &mut cursor).unwrap();
        assert!(pt.bit_eq(&p2.transpose()));
    }

    fn triplets_strategy() -> impl Strategy<Value = (usize, usize, Vec<Triplet<f64>>)> {
        (1usize..10, 1usize..10).prop_flat_map(|(r, c)| {
            let entry = (0..r, 0..c, -4i32..5).prop_map(|(i, j, v)| Triplet::new(i, j, v as f64));
            (Just(r), Just(c), prop::collection::vec(entry, 0..40))
        })
    }

    proptest! {
        #[test]
        fn triplet_round_trip((r, c, entries) in triplets_strategy()) {
            let m = CsrMatrix::from_triplets(r, c, &entries).unwrap();
            m.validate().unwrap();
            // Duplicate-summed, sorted reference built with a map.
            let mut reference = std::collections::BTreeMap::new();
            for t in &entries {
                *reference.entry((t.row, t.col)).or_insert(0.0) += t.val;
            }
            let back: Vec<_> = m.to_triplets().iter().map(|t| ((t.row, t.col), t.val)).collect();
            let expect: Vec<_> = reference.into_iter().collect();
            prop_assert_eq!(back, expect);
        }

        #[test]
        fn transpose_is_an_involution((r, c, entries) in triplets_strategy()) {
            let m = CsrMatrix::from_triplets(r, c, &entries).unwrap();
            let t = m.transpose();
            t.validate().unwrap();
            prop_assert!(t.transpose().bit_eq(&m));
        }
    }
}
