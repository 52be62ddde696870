//! Structured-grid model problem.
//!
//! The coarse grid has `nx x ny x nz` points; the fine grid is its uniform
//! refinement with `2n - 1` points per dimension. Both grids are numbered
//! lexicographically with x fastest. The fine operator is the 27-point
//! graph Laplacian and the interpolation is trilinear.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{DistMatrix, LocalMatrix, RowPartition};
use crate::scalar::{inverse_power_of_two, Scalar};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let g = Self { nx, ny, nz };
        g.validate()?;
        Ok(g)
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || self.nz < 2 {
            return Err(Error::Config(format!(
                "coarse grid {self} needs at least 2 points per dimension"
            )));
        }
        Ok(())
    }

    pub fn coarse(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn fine(&self) -> [usize; 3] {
        [2 * self.nx - 1, 2 * self.ny - 1, 2 * self.nz - 1]
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.nx, self.ny, self.nz)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("grid '{s}': {e}")))?;
        match dims[..] {
            [nx, ny, nz] => Self::new(nx, ny, nz),
            _ => Err(Error::Config(format!("grid '{s}' must be NX,NY,NZ"))),
        }
    }
}

/// `(fine unknowns, coarse unknowns)` by integer arithmetic alone.
pub fn grid_dims(g: &GridSpec) -> Result<(u64, u64)> {
    g.validate()?;
    let overflow = || Error::Config(format!("grid {g} overflows 64-bit counts"));
    let prod = |d: [u64; 3]| {
        d[0].checked_mul(d[1])
            .and_then(|x| x.checked_mul(d[2]))
            .ok_or_else(overflow)
    };
    let c = [g.nx as u64, g.ny as u64, g.nz as u64];
    let f = [2 * c[0] - 1, 2 * c[1] - 1, 2 * c[2] - 1];
    Ok((prod(f)?, prod(c)?))
}

fn counts(g: &GridSpec) -> Result<(usize, usize)> {
    let (f, c) = grid_dims(g)?;
    let fit = |v: u64| usize::try_from(v).map_err(|_| Error::Config(format!("grid {g} is too large to build")));
    Ok((fit(f)?, fit(c)?))
}

fn check_len(part: &RowPartition, n: usize, what: &str) -> Result<()> {
    if part.nglobal() != n {
        return Err(Error::Partition(format!(
            "{what} partition covers {} rows, the grid has {n}",
            part.nglobal()
        )));
    }
    Ok(())
}

fn small<T: Scalar>(k: usize) -> T {
    T::from_usize(k).expect("small integers are representable")
}

/// The fine-grid 27-point graph Laplacian: `-1` to every lattice neighbor,
/// the neighbor count on the diagonal. Each rank builds its own rows.
pub fn build_model_operator<T: Scalar>(g: &GridSpec, part: Arc<RowPartition>) -> Result<DistMatrix<T>> {
    let (n, _) = counts(g)?;
    check_len(&part, n, "operator")?;
    let [fx, fy, fz] = g.fine();
    let locals = (0..part.np())
        .map(|r| {
            let range = part.range(r);
            let mut offsets = Vec::with_capacity(range.len() + 1);
            offsets.push(0);
            let mut cols = Vec::with_capacity(27 * range.len());
            let mut vals = Vec::with_capacity(27 * range.len());
            for row in range.clone() {
                let (x, y, z) = (row % fx, (row / fx) % fy, row / (fx * fy));
                let start = cols.len();
                let mut diag_at = 0;
                for zz in z.saturating_sub(1)..=(z + 1).min(fz - 1) {
                    for yy in y.saturating_sub(1)..=(y + 1).min(fy - 1) {
                        for xx in x.saturating_sub(1)..=(x + 1).min(fx - 1) {
                            let col = xx + fx * (yy + fy * zz);
                            if col == row {
                                diag_at = cols.len();
                            }
                            cols.push(col);
                            vals.push(-T::one());
                        }
                    }
                }
                vals[diag_at] = small(cols.len() - start - 1);
                offsets.push(cols.len());
            }
            let rows = CsrMatrix::new(range.len(), n, offsets, cols, Some(vals))?;
            LocalMatrix::from_global_rows(r, &rows, part.clone(), part.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    DistMatrix::from_locals(locals)
}

/// Coarse points a fine coordinate interpolates from along one axis.
fn parents(f: usize) -> (usize, Option<usize>) {
    if f.is_multiple_of(2) {
        (f / 2, None)
    } else {
        (f / 2, Some(f / 2 + 1))
    }
}

/// Trilinear interpolation from the coarse grid to the fine grid. Fine
/// rows follow `fine_part`, coarse columns `coarse_part`.
pub fn build_interpolation<T: Scalar>(
    g: &GridSpec,
    fine_part: Arc<RowPartition>,
    coarse_part: Arc<RowPartition>,
) -> Result<DistMatrix<T>> {
    let (n, m) = counts(g)?;
    check_len(&fine_part, n, "fine")?;
    check_len(&coarse_part, m, "coarse")?;
    if fine_part.np() != coarse_part.np() {
        return Err(Error::Partition(format!(
            "fine partition has {} ranks, coarse partition {}",
            fine_part.np(),
            coarse_part.np()
        )));
    }
    let [fx, fy, _] = g.fine();
    let [cx, cy, _] = g.coarse();
    let weights: Vec<T> = (0..=3).map(inverse_power_of_two).collect();
    let locals = (0..fine_part.np())
        .map(|r| {
            let range = fine_part.range(r);
            let mut offsets = Vec::with_capacity(range.len() + 1);
            offsets.push(0);
            let mut cols = Vec::with_capacity(8 * range.len());
            let mut vals = Vec::with_capacity(8 * range.len());
            for row in range.clone() {
                let (x, y, z) = (row % fx, (row / fx) % fy, row / (fx * fy));
                let axes = [parents(x), parents(y), parents(z)];
                let w = weights[axes.iter().filter(|a| a.1.is_some()).count()];
                let list = |(lo, hi): (usize, Option<usize>)| std::iter::once(lo).chain(hi);
                for zz in list(axes[2]) {
                    for yy in list(axes[1]) {
                        for xx in list(axes[0]) {
                            cols.push(xx + cx * (yy + cy * zz));
                            vals.push(w);
                        }
                    }
                }
                offsets.push(cols.len());
            }
            let rows = CsrMatrix::new(range.len(), m, offsets, cols, Some(vals))?;
            LocalMatrix::from_global_rows(r, &rows, fine_part.clone(), coarse_part.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    DistMatrix::from_locals(locals)
}

/// Operator and interpolation on `np` ranks with the default block
/// partitions of the fine and coarse grids.
pub fn model_problem<T: Scalar>(g: &GridSpec, np: usize) -> Result<(DistMatrix<T>, DistMatrix<T>)> {
    let (n, m) = counts(g)?;
    let fine = Arc::new(RowPartition::new(n, np)?);
    let coarse = Arc::new(RowPartition::new(m, np)?);
    let a = build_model_operator(g, fine.clone())?;
    let p = build_interpolation(g, fine, coarse)?;
    Ok((a, p))
}
