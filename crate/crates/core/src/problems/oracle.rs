//! Dense sequential reference for small products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Largest row or column count the dense oracle accepts.
pub const ORACLE_CAP: usize = 2000;

/// Small dense matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

fn check_cap(nrows: usize, ncols: usize) -> Result<()> {
    let n = nrows.max(ncols);
    if n > ORACLE_CAP {
        return Err(Error::OracleCap(format!(
            "dense reference limited to {ORACLE_CAP} rows and columns, got {n}"
        )));
    }
    Ok(())
}

impl<T: Scalar> OracleMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Result<Self> {
        check_cap(nrows, ncols)?;
        Ok(Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        })
    }

    pub fn from_csr(m: &CsrMatrix<T>) -> Result<Self> {
        check_cap(m.nrows(), m.ncols())?;
        Ok(Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            data: m.to_dense(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// `C(i,j) = sum_I P(I,i) sum_J A(I,J) P(J,j)` by plain dense loops.
pub fn oracle_ptap<T: Scalar>(a: &OracleMatrix<T>, p: &OracleMatrix<T>) -> Result<OracleMatrix<T>> {
    let (n, m) = (p.nrows, p.ncols);
    if a.nrows != n || a.ncols != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, P is {n}x{m}",
            a.nrows, a.ncols
        )));
    }
    let mut ap = OracleMatrix::zeros(n, m)?;
    for big_i in 0..n {
        for j in 0..m {
            let mut s = T::zero();
            for big_j in 0..n {
                s += a.get(big_i, big_j) * p.get(big_j, j);
            }
            ap.set(big_i, j, s);
        }
    }
    let mut c = OracleMatrix::zeros(m, m)?;
    for i in 0..m {
        for j in 0..m {
            let mut s = T::zero();
            for big_i in 0..n {
                s += p.get(big_i, i) * ap.get(big_i, j);
            }
            c.set(i, j, s);
        }
    }
    Ok(c)
}
