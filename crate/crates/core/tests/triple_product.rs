mod common;

use common::*;
use num_rational::Rational64;
use proptest::prelude::*;
use ptap_core::comm::{Harness, MessageKind};
use ptap_core::metrics::MemCategory;
use ptap_core::problems::{model_problem, random_global, GridSpec};
use ptap_core::triple::{aao_numeric, aao_symbolic, merged_numeric, merged_symbolic, ptap, ptap_numeric};
use ptap_core::verify::{compare_sparse, magnitude_scale, verify_ptap};
use ptap_core::{Algorithm, CachePolicy, CsrMatrix, Error};

fn run(a: &CsrMatrix<f64>, p: &CsrMatrix<f64>, np: usize, alg: Algorithm) -> CsrMatrix<f64> {
    let (da, dp) = distribute(a, p, np);
    ptap(&Harness::new(np), &da, &dp, alg, CachePolicy::FreeAfterSolve)
        .unwrap()
        .c
        .assemble()
}

fn tridiag3() -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let a = csr(
        3,
        3,
        &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)],
    );
    let p = csr(3, 1, &[(0, 0, 0.5), (1, 0, 1.0), (2, 0, 0.5)]);
    (a, p)
}

#[test]
fn one_coarse_point_gives_one() {
    let (a, p) = tridiag3();
    for alg in Algorithm::ALL {
        for np in [1, 2, 3] {
            let c = run(&a, &p, np, alg);
            assert_eq!(c.nnz(), 1);
            assert_eq!(c.get(0, 0), Some(1.0), "{alg} np={np}");
        }
    }
}

#[test]
fn identity_interpolation_reproduces_operator() {
    let a = toy_a().map_values(|v| v * 1.5);
    let i = CsrMatrix::identity(6);
    for alg in Algorithm::ALL {
        for np in [1, 2, 3] {
            let c = run(&a, &i, np, alg);
            assert!(c.bit_eq(&a), "{alg} np={np}");
        }
    }
}

#[test]
fn toy_structure_matches_boolean_product() {
    // Mirror the operator pattern so it is symmetric.
    let a = toy_a();
    let mut e = Vec::new();
    for t in a.to_triplets() {
        e.push((t.row, t.col, 1.0));
        e.push((t.col, t.row, 1.0));
    }
    let sym = csr(6, 6, &e).map_values(|_| 1.0);
    let p = toy_p();
    let want = boolean_support(&sym, &p);
    for alg in Algorithm::ALL {
        let c = run(&sym, &p, 3, alg);
        assert_eq!(rows_of(&c), want, "{alg}");
    }
}

#[test]
fn contribution_batches_follow_offdiagonal_columns() {
    let (a, p) = (toy_a(), toy_p());
    let (da, dp) = distribute(&a, &p, 3);
    for alg in [Algorithm::AllAtOnce, Algorithm::MergedAllAtOnce] {
        let out = ptap(&Harness::new(3), &da, &dp, alg, CachePolicy::FreeAfterSolve).unwrap();
        for src in 0..3 {
            for dst in 0..3 {
                if src == dst {
                    continue;
                }
                let owned = dp.col_partition().range(dst);
                let expects = dp.local(src).col_map().iter().any(|c| owned.contains(c));
                let sent = out
                    .trace
                    .iter()
                    .any(|t| t.kind == MessageKind::Contribution && t.sender == src && t.receiver == dst);
                assert_eq!(sent, expects, "{alg}: {src} -> {dst}");
            }
        }
    }
}

#[test]
fn scaling_through_a_cached_plan() {
    let (a, p) = random_global::<f64>(40, 15, 0.2, 5).unwrap();
    let (da, dp) = distribute(&a, &p, 4);
    for alg in Algorithm::ALL {
        let h = Harness::new(4);
        let first = ptap(&h, &da, &dp, alg, CachePolicy::CacheIntermediate).unwrap();
        let c1 = first.c.assemble();
        let tripled = ptap_numeric(&h, &da.map_values(|v| 3.0 * v), &dp, first.plans).unwrap();
        let c3 = tripled.c.assemble();
        assert!(c3.same_structure(&c1));
        let scale = magnitude_scale(&a, &p).unwrap().map(|v| 3.0 * v);
        let want = c1.map_values(|v| 3.0 * v);
        assert!(compare_sparse(&c3, &want, &scale, 1e-14).unwrap().passed(), "{alg}");

        let zeroed = ptap_numeric(&h, &da.map_values(|_| 0.0), &dp, tripled.plans).unwrap();
        let c0 = zeroed.c.assemble();
        assert!(c0.same_structure(&c1));
        assert!(c0.values().unwrap().iter().all(|&v| v == 0.0), "{alg}");
    }
}

#[test]
fn single_rank_sends_nothing() {
    let (a, p) = random_global::<f64>(20, 8, 0.3, 1).unwrap();
    let (da, dp) = distribute(&a, &p, 1);
    for alg in Algorithm::ALL {
        let out = ptap(&Harness::new(1), &da, &dp, alg, CachePolicy::FreeAfterSolve).unwrap();
        assert!(out.trace.is_empty());
    }
}

#[test]
fn merged_equals_allatonce_on_one_rank() {
    let (a, p) = random_global::<f64>(60, 20, 0.2, 9).unwrap();
    let (da, dp) = distribute(&a, &p, 1);
    let out = Harness::new(1)
        .run(|ctx| {
            let (al, pl) = (da.local(0), dp.local(0));
            let mut x = aao_symbolic(ctx, al, pl)?;
            let mut y = merged_symbolic(ctx, al, pl)?;
            let cx = aao_numeric(ctx, al, pl, &mut x)?.clone();
            let cy = merged_numeric(ctx, al, pl, &mut y)?.clone();
            Ok(cx.bit_eq(&cy))
        })
        .unwrap();
    assert!(out.results[0]);
}

#[test]
fn kernel_counts_of_the_merged_loop() {
    for (np, seed) in [(1, 1), (2, 2), (3, 3), (5, 4)] {
        let (a, p) = random_global::<f64>(50, 20, 0.1, seed).unwrap();
        let (da, dp) = distribute(&a, &p, np);
        let counts = |alg| {
            ptap(&Harness::new(np), &da, &dp, alg, CachePolicy::CacheIntermediate)
                .unwrap()
                .plans
                .iter()
                .map(|pl| (pl.stats().symbolic_row_kernels, pl.stats().numeric_row_kernels))
                .collect::<Vec<_>>()
        };
        let (aao, merged) = (counts(Algorithm::AllAtOnce), counts(Algorithm::MergedAllAtOnce));
        for r in 0..np {
            let pl = dp.local(r);
            let both = (0..pl.nrows()).any(|i| pl.diag().row_len(i) > 0 && pl.offdiag().row_len(i) > 0);
            assert!(merged[r].0 <= aao[r].0);
            assert_eq!(merged[r].0 == aao[r].0, !both, "np={np} rank {r}");
            assert_eq!(merged[r], (merged[r].0, merged[r].0));
        }
    }
}

#[test]
fn rational_model_problem_is_exact() {
    let g = GridSpec::new(3, 3, 2).unwrap();
    let (a, p) = model_problem::<Rational64>(&g, 3).unwrap();
    let mut outs = Vec::new();
    for alg in Algorithm::ALL {
        let c = ptap(&Harness::new(3), &a, &p, alg, CachePolicy::FreeAfterSolve)
            .unwrap()
            .c
            .assemble();
        for i in 0..c.nrows() {
            let s: Rational64 = c.row_values(i).iter().copied().sum();
            assert_eq!(s, Rational64::from_integer(0), "{alg} row {i}");
            for (&j, &v) in c.row_cols(i).iter().zip(c.row_values(i)) {
                assert_eq!(c.get(j, i), Some(v));
            }
        }
        outs.push(c);
    }
    assert!(outs[0].bit_eq(&outs[1]) && outs[1].bit_eq(&outs[2]));
}

#[test]
fn single_precision_runs() {
    let g = GridSpec::cube(3).unwrap();
    let (a, p) = model_problem::<f32>(&g, 2).unwrap();
    let c = ptap(&Harness::new(2), &a, &p, Algorithm::MergedAllAtOnce, CachePolicy::FreeAfterSolve)
        .unwrap()
        .c
        .assemble();
    let (a64, p64) = model_problem::<f64>(&g, 1).unwrap();
    let c64 = run(&a64.assemble(), &p64.assemble(), 1, Algorithm::TwoStep);
    assert_eq!(c.row_offsets(), c64.row_offsets());
    assert_eq!(c.col_indices(), c64.col_indices());
    for (x, y) in c.values().unwrap().iter().zip(c64.values().unwrap()) {
        assert!((f64::from(*x) - y).abs() <= 1e-5 * y.abs().max(1.0));
    }
}

#[test]
fn galerkin_consistency_with_matrix_vector_products() {
    let g = GridSpec::new(4, 3, 3).unwrap();
    let (da, dp) = model_problem::<f64>(&g, 4).unwrap();
    let (a, p) = (da.assemble(), dp.assemble());
    let c = run(&a, &p, 4, Algorithm::MergedAllAtOnce);
    let x: Vec<f64> = (0..p.ncols()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let px = p.spmv(&x);
    let apx = a.spmv(&px);
    let pt = p.transpose();
    let want = pt.spmv(&apx);
    let got = c.spmv(&x);
    let norm = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12 * norm);
    }
}

#[test]
fn mismatched_dimensions_are_reported() {
    let a = toy_a();
    let p = csr(5, 2, &[(0, 0, 1.0)]);
    let (da, _) = distribute(&a, &CsrMatrix::identity(6), 2);
    let (_, dp) = distribute(&CsrMatrix::identity(5), &p, 2);
    let err = ptap(&Harness::new(2), &da, &dp, Algorithm::AllAtOnce, CachePolicy::FreeAfterSolve).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)));
}

#[test]
fn free_policy_keeps_only_the_output() {
    let (a, p) = random_global::<f64>(30, 10, 0.3, 2).unwrap();
    let (da, dp) = distribute(&a, &p, 3);
    for alg in Algorithm::ALL {
        let out = ptap(&Harness::new(3), &da, &dp, alg, CachePolicy::FreeAfterSolve).unwrap();
        for pl in &out.plans {
            let l = pl.ledger();
            assert_eq!(l.current(MemCategory::PlanCache), 0);
            assert_eq!(l.current(MemCategory::AuxiliaryMatrices), 0);
            assert_eq!(l.current(MemCategory::OutputMatrix), pl.output().heap_bytes());
            assert!(pl.remote_rows().is_none());
        }
    }
}

#[test]
fn drift_in_the_interpolation_is_detected() {
    let (a, p) = random_global::<f64>(30, 10, 0.3, 4).unwrap();
    let (_, p2) = random_global::<f64>(30, 10, 0.3, 5).unwrap();
    let (da, dp) = distribute(&a, &p, 2);
    let (_, dp2) = distribute(&a, &p2, 2);
    for alg in Algorithm::ALL {
        let h = Harness::new(2);
        let out = ptap(&h, &da, &dp, alg, CachePolicy::CacheIntermediate).unwrap();
        let err = ptap_numeric(&h, &da, &dp2, out.plans).unwrap_err();
        assert!(matches!(err, Error::StructuralDrift(_)), "{alg}: {err}");
    }
}

fn instance() -> impl Strategy<Value = (usize, usize, f64, u64, usize)> {
    (2usize..40)
        .prop_flat_map(|n| (Just(n), 1..=n))
        .prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                prop::sample::select(vec![0.05, 0.2, 0.5]),
                any::<u64>(),
                prop::sample::select(vec![1usize, 2, 3, 5, 8]),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn algorithms_agree_with_the_dense_product((n, m, density, seed, np) in instance()) {
        let (a, p) = random_global::<f64>(n, m, density, seed).unwrap();
        let scale = magnitude_scale(&a, &p).unwrap();
        let outs: Vec<_> = Algorithm::ALL.iter().map(|&alg| run(&a, &p, np, alg)).collect();
        for c in &outs {
            prop_assert!(verify_ptap(c, &a, &p, 1e-12).unwrap().passed());
            prop_assert!(compare_sparse(c, &outs[0], &scale, 1e-12).unwrap().passed());
        }
        prop_assert!(outs[1].bit_eq(&outs[2]));
        prop_assert_eq!(rows_of(&outs[0]), boolean_support(&a, &p));
    }

    #[test]
    fn output_does_not_depend_on_layout((n, m, density, seed, np) in instance()) {
        let (a, p) = random_global::<f64>(n, m, density, seed).unwrap();
        let scale = magnitude_scale(&a, &p).unwrap();
        for alg in Algorithm::ALL {
            let one = run(&a, &p, 1, alg);
            let many = run(&a, &p, np, alg);
            prop_assert!(compare_sparse(&one, &many, &scale, 1e-13).unwrap().passed());
        }
    }
}
