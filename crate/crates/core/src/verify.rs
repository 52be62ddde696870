//! Entry-wise comparison of computed products.
//!
//! Floating-point error in `P^T A P` is bounded by the product of the
//! absolute values, so each entry is compared against
//! `tol * (|P|^T |A| |P|)(i,j)` rather than against its own magnitude,
//! which may be zero after cancellation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{oracle_ptap, OracleMatrix};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Default tolerance for products checked against the dense reference.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub tolerance: f64,
    /// Largest `|x - y| / scale` over all entries.
    pub max_scaled_error: f64,
    pub max_abs_error: f64,
    pub entries: usize,
    /// False when the sparse structures being compared differ.
    pub structure_ok: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.structure_ok && self.max_scaled_error <= self.tolerance
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "match ≤ {:e}", self.tolerance)
        } else if !self.structure_ok {
            f.write_str("mismatch (structure)")
        } else {
            write!(f, "mismatch ({:.3e} > {:e})", self.max_scaled_error, self.tolerance)
        }
    }
}

struct Tally {
    tol: f64,
    scaled: f64,
    abs: f64,
    entries: usize,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            scaled: 0.0,
            abs: 0.0,
            entries: 0,
        }
    }

    fn add(&mut self, x: f64, y: f64, scale: f64) {
        let d = (x - y).abs();
        let s = if d == 0.0 {
            0.0
        } else if scale > 0.0 {
            d / scale
        } else {
            f64::INFINITY
        };
        self.scaled = self.scaled.max(if s.is_nan() { f64::INFINITY } else { s });
        self.abs = self.abs.max(d);
        self.entries += 1;
    }

    fn finish(self, structure_ok: bool) -> Verification {
        Verification {
            tolerance: self.tol,
            max_scaled_error: self.scaled,
            max_abs_error: self.abs,
            entries: self.entries,
            structure_ok,
        }
    }
}

/// Per-entry error scale for comparisons.
pub trait EntryScale {
    fn shape(&self) -> (usize, usize);
    fn scale(&self, i: usize, j: usize) -> f64;
}

impl EntryScale for OracleMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    fn scale(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Entries outside the structure have scale zero.
impl EntryScale for CsrMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    fn scale(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(0.0)
    }
}

fn dense_abs<T: Scalar>(m: &CsrMatrix<T>) -> Result<OracleMatrix<f64>> {
    let mut d = OracleMatrix::zeros(m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        for (&j, &v) in m.row_cols(i).iter().zip(m.row_values(i)) {
            d.set(i, j, v.as_f64().abs());
        }
    }
    Ok(d)
}

/// `|P|^T |A| |P|` densely.
pub fn magnitude_scale<T: Scalar>(a: &CsrMatrix<T>, p: &CsrMatrix<T>) -> Result<OracleMatrix<f64>> {
    oracle_ptap(&dense_abs(a)?, &dense_abs(p)?)
}

fn check_shape<T: Scalar>(c: &CsrMatrix<T>, rows: usize, cols: usize) -> Result<()> {
    if c.nrows() != rows || c.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "computed {}x{}, reference {rows}x{cols}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// Compares a sparse result with a dense reference; entries outside the
/// sparse structure are taken as zero.
pub fn compare_to_dense<T: Scalar>(
    c: &CsrMatrix<T>,
    want: &OracleMatrix<T>,
    scale: &impl EntryScale,
    tol: f64,
) -> Result<Verification> {
    check_shape(c, want.nrows(), want.ncols())?;
    let (r, k) = scale.shape();
    check_shape(c, r, k)?;
    let mut t = Tally::new(tol);
    for i in 0..c.nrows() {
        let (cols, vals) = (c.row_cols(i), c.row_values(i));
        let mut k = 0;
        for j in 0..c.ncols() {
            let got = if k < cols.len() && cols[k] == j {
                k += 1;
                vals[k - 1].as_f64()
            } else {
                0.0
            };
            t.add(got, want.get(i, j).as_f64(), scale.scale(i, j));
        }
    }
    Ok(t.finish(true))
}

/// Compares two sparse results entry by entry; their structures must match.
pub fn compare_sparse<T: Scalar>(
    x: &CsrMatrix<T>,
    y: &CsrMatrix<T>,
    scale: &impl EntryScale,
    tol: f64,
) -> Result<Verification> {
    check_shape(x, y.nrows(), y.ncols())?;
    let (r, k) = scale.shape();
    check_shape(x, r, k)?;
    let mut t = Tally::new(tol);
    if !x.same_structure(y) {
        return Ok(t.finish(false));
    }
    for i in 0..x.nrows() {
        for ((&j, &u), &v) in x.row_cols(i).iter().zip(x.row_values(i)).zip(y.row_values(i)) {
            t.add(u.as_f64(), v.as_f64(), scale.scale(i, j));
        }
    }
    Ok(t.finish(true))
}

/// Checks `c` against the dense product of `a` and `p`.
pub fn verify_ptap<T: Scalar>(
    c: &CsrMatrix<T>,
    a: &CsrMatrix<T>,
    p: &CsrMatrix<T>,
    tol: f64,
) -> Result<Verification> {
    let want = oracle_ptap(&OracleMatrix::from_csr(a)?, &OracleMatrix::from_csr(p)?)?;
    let scale = magnitude_scale(a, p)?;
    compare_to_dense(c, &want, &scale, tol)
}
