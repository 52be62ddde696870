#![allow(dead_code)]

use std::sync::Arc;

use ptap_core::problems::{oracle_ptap, OracleMatrix};
use ptap_core::{CsrMatrix, DistMatrix, RowPartition, Scalar, Triplet};

pub fn csr(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> CsrMatrix<f64> {
    let t: Vec<_> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    CsrMatrix::from_triplets(rows, cols, &t).unwrap()
}

pub fn pattern(rows: usize, cols: usize, rows_cols: &[&[usize]]) -> CsrMatrix<f64> {
    let mut e = Vec::new();
    for (r, cs) in rows_cols.iter().enumerate() {
        for &c in cs.iter() {
            e.push((r, c, 1.0));
        }
    }
    csr(rows, cols, &e)
}

/// The 6x6 operator pattern of the small worked example.
pub fn toy_a() -> CsrMatrix<f64> {
    pattern(6, 6, &[&[0, 1, 4], &[1, 2, 4], &[0, 3, 4], &[1, 3], &[3, 4], &[1, 4, 5]])
}

/// The 6x4 interpolation pattern of the small worked example.
pub fn toy_p() -> CsrMatrix<f64> {
    pattern(6, 4, &[&[0, 3], &[1], &[2, 3], &[2], &[1, 3], &[2]])
}

pub fn distribute<T: Scalar>(a: &CsrMatrix<T>, p: &CsrMatrix<T>, np: usize) -> (DistMatrix<T>, DistMatrix<T>) {
    let rows = Arc::new(RowPartition::new(a.nrows(), np).unwrap());
    let cols = Arc::new(RowPartition::new(p.ncols(), np).unwrap());
    (
        DistMatrix::from_global(a, rows.clone(), rows.clone()).unwrap(),
        DistMatrix::from_global(p, rows, cols).unwrap(),
    )
}

pub fn dense_product(a: &CsrMatrix<f64>, p: &CsrMatrix<f64>) -> OracleMatrix<f64> {
    oracle_ptap(&OracleMatrix::from_csr(a).unwrap(), &OracleMatrix::from_csr(p).unwrap()).unwrap()
}

/// Structure of `P^T A P` from boolean dense products.
pub fn boolean_support(a: &CsrMatrix<f64>, p: &CsrMatrix<f64>) -> Vec<Vec<usize>> {
    let ones = |m: &CsrMatrix<f64>| m.map_values(|_| 1.0);
    let c = dense_product(&ones(a), &ones(p));
    (0..c.nrows())
        .map(|i| (0..c.ncols()).filter(|&j| c.get(i, j) != 0.0).collect())
        .collect()
}

pub fn rows_of(m: &CsrMatrix<f64>) -> Vec<Vec<usize>> {
    (0..m.nrows()).map(|i| m.row_cols(i).to_vec()).collect()
}
