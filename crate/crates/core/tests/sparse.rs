use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use ptap_core::sparse::{RowAccumulator, RowSet};
use ptap_core::{CsrMatrix, Error, Triplet};

fn triplets() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, i32)>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
        (
            Just(r),
            Just(c),
            prop::collection::vec((0..r, 0..c, -8i32..8), 0..60),
        )
    })
}

proptest! {
    #[test]
    fn assembly_sums_like_a_dense_array((r, c, e) in triplets()) {
        let t: Vec<_> = e.iter().map(|&(i, j, v)| Triplet::new(i, j, f64::from(v))).collect();
        let m = CsrMatrix::from_triplets(r, c, &t).unwrap();
        m.validate().unwrap();
        let mut dense = vec![0.0; r * c];
        let mut present = BTreeSet::new();
        for &(i, j, v) in &e {
            dense[i * c + j] += f64::from(v);
            present.insert((i, j));
        }
        prop_assert_eq!(m.to_dense(), dense);
        prop_assert_eq!(m.nnz(), present.len());
    }

    #[test]
    fn transpose_matches_vector_products((r, c, e) in triplets()) {
        let t: Vec<_> = e.iter().map(|&(i, j, v)| Triplet::new(i, j, f64::from(v))).collect();
        let m = CsrMatrix::from_triplets(r, c, &t).unwrap();
        let mt = m.transpose();
        // y^T (M x) == (M^T y)^T x on integer data, so exact.
        let x: Vec<f64> = (0..c).map(|k| (k % 5) as f64 - 2.0).collect();
        let y: Vec<f64> = (0..r).map(|k| (k % 3) as f64 - 1.0).collect();
        let lhs: f64 = m.spmv(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = mt.spmv(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn row_set_is_a_set(keys in prop::collection::vec(0usize..500, 0..300)) {
        let mut s = RowSet::new();
        let mut want = BTreeSet::new();
        for &k in &keys {
            prop_assert_eq!(s.insert(k), want.insert(k));
        }
        prop_assert_eq!(s.len(), want.len());
        prop_assert!(want.iter().all(|&k| s.contains(k)));
        prop_assert_eq!(s.sorted().collect::<Vec<_>>(), want.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn accumulator_sums_per_key(entries in prop::collection::vec((0usize..200, -4i32..4), 0..300)) {
        let mut acc = RowAccumulator::<f64>::new();
        let mut want = BTreeMap::new();
        for &(k, v) in &entries {
            acc.add(k, f64::from(v));
            *want.entry(k).or_insert(0.0) += f64::from(v);
        }
        let got: Vec<_> = acc.drain_sorted().collect();
        prop_assert_eq!(got, want.into_iter().collect::<Vec<_>>());
        prop_assert!(acc.is_empty());
    }
}

#[test]
fn reused_accumulator_stops_growing() {
    let mut acc = RowAccumulator::<f64>::new();
    for k in 0..100 {
        acc.add(k * 7, 1.0);
    }
    let _ = acc.drain_sorted().count();
    let (cap, grows) = (acc.capacity(), acc.grow_events());
    for round in 0..20 {
        for k in 0..100 {
            acc.add(k * 7 + round, 1.0);
        }
        assert_eq!(acc.drain_sorted().count(), 100);
    }
    assert_eq!((acc.capacity(), acc.grow_events()), (cap, grows));
}

#[test]
fn explicit_zeros_are_kept() {
    let m = CsrMatrix::from_triplets(2, 2, &[Triplet::new(0, 1, 1.0), Triplet::new(0, 1, -1.0)]).unwrap();
    assert_eq!(m.nnz(), 1);
    assert_eq!(m.get(0, 1), Some(0.0));
}

#[test]
fn bad_triplets_are_rejected() {
    let err = CsrMatrix::from_triplets(2, 2, &[Triplet::new(2, 0, 1.0)]).unwrap_err();
    assert!(matches!(err, Error::Assembly { row: 2, col: 0, .. }));
}
