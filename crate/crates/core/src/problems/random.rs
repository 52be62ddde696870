//! Seeded random conforming inputs.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::partition::{DistMatrix, RowPartition};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

fn convert<T: Scalar>(v: f64) -> Result<T> {
    T::from_f64(v).ok_or_else(|| Error::Config(format!("{v} is not representable")))
}

/// Global `A` (`n x n`) and `P` (`n x m`). Every entry of both is present
/// with probability `density` except the diagonal of `A`, which is always
/// present and nonzero. Values are uniform in `[-1, 1]`.
pub fn random_global<T: Scalar>(
    n: usize,
    m: usize,
    density: f64,
    seed: u64,
) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("density {density} must lie in (0, 1]")));
    }
    if n == 0 || m == 0 {
        return Err(Error::Config("random instances need n, m >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut build = |nrows: usize, ncols: usize, diagonal: bool| -> Result<CsrMatrix<T>> {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let on_diag = diagonal && i == j;
                if on_diag || rng.gen_bool(density) {
                    let mut v = uniform(&mut rng);
                    if on_diag && v == 0.0 {
                        v = 1.0;
                    }
                    cols.push(j);
                    vals.push(convert(v)?);
                }
            }
            offsets.push(cols.len());
        }
        CsrMatrix::new(nrows, ncols, offsets, cols, Some(vals))
    };
    let a = build(n, n, true)?;
    let p = build(n, m, false)?;
    Ok((a, p))
}

/// [`random_global`] distributed over `np` ranks with block partitions.
pub fn random_instance<T: Scalar>(
    n: usize,
    m: usize,
    density: f64,
    seed: u64,
    np: usize,
) -> Result<(DistMatrix<T>, DistMatrix<T>)> {
    let (a, p) = random_global(n, m, density, seed)?;
    let rows = Arc::new(RowPartition::new(n, np)?);
    let cols = Arc::new(RowPartition::new(m, np)?);
    Ok((
        DistMatrix::from_global(&a, rows.clone(), rows.clone())?,
        DistMatrix::from_global(&p, rows, cols)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrices() {
        let (a1, p1) = random_global::<f64>(30, 10, 0.2, 11).unwrap();
        let (a2, p2) = random_global::<f64>(30, 10, 0.2, 11).unwrap();
        assert!(a1.bit_eq(&a2) && p1.bit_eq(&p2));
        let (a3, _) = random_global::<f64>(30, 10, 0.2, 12).unwrap();
        assert!(!a1.bit_eq(&a3));
    }

    #[test]
    fn full_density_is_dense() {
        let (a, p) = random_global::<f64>(7, 3, 1.0, 0).unwrap();
        assert_eq!(a.nnz(), 49);
        assert_eq!(p.nnz(), 21);
    }

    #[test]
    fn fill_close_to_density() {
        let (_, p) = random_global::<f64>(50, 20, 0.2, 7).unwrap();
        let nm = 50.0 * 20.0;
        assert!((0.1 * nm..=0.3 * nm).contains(&(p.nnz() as f64)));
    }

    #[test]
    fn diagonal_always_present() {
        let (a, _) = random_global::<f64>(40, 5, 0.05, 3).unwrap();
        assert!((0..40).all(|i| a.get(i, i).is_some_and(|v| v != 0.0)));
        assert!(a.values().unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn bad_density() {
        assert!(random_global::<f64>(4, 2, 0.0, 1).is_err());
        assert!(random_global::<f64>(4, 2, 1.5, 1).is_err());
    }
}
