mod common;

use common::*;
use proptest::prelude::*;
use ptap_core::comm::Harness;
use ptap_core::problems::{random_global, OracleMatrix};
use ptap_core::spgemm::{numeric_ap, symbolic_ap};
use ptap_core::{CsrMatrix, DistMatrix};

fn ap(a: &CsrMatrix<f64>, p: &CsrMatrix<f64>, np: usize) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let (da, dp) = distribute(a, p, np);
    let run = Harness::new(np)
        .run(|ctx| {
            let r = ctx.rank();
            let (mut c, mut rr) = symbolic_ap(ctx, da.local(r), dp.local(r))?;
            let sym = c.clone();
            numeric_ap(ctx, da.local(r), dp.local(r), &mut c, &mut rr)?;
            Ok((sym, c))
        })
        .unwrap();
    let (sym, num): (Vec<_>, Vec<_>) = run.results.into_iter().unzip();
    (
        DistMatrix::from_locals(sym).unwrap().assemble(),
        DistMatrix::from_locals(num).unwrap().assemble(),
    )
}

fn dense_ap(a: &CsrMatrix<f64>, p: &CsrMatrix<f64>) -> Vec<f64> {
    let (ad, pd) = (OracleMatrix::from_csr(a).unwrap(), OracleMatrix::from_csr(p).unwrap());
    let (n, m) = (p.nrows(), p.ncols());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[i * m + j] = (0..n).map(|k| ad.get(i, k) * pd.get(k, j)).sum();
        }
    }
    out
}

#[test]
fn toy_symbolic_product_pattern() {
    let (sym, _) = ap(&toy_a(), &toy_p(), 3);
    let want: Vec<Vec<usize>> = vec![
        vec![0, 1, 3],
        vec![1, 2, 3],
        vec![0, 1, 2, 3],
        vec![1, 2],
        vec![1, 2, 3],
        vec![1, 2, 3],
    ];
    assert_eq!(rows_of(&sym), want);
}

#[test]
fn toy_unit_values() {
    let (_, num) = ap(&toy_a(), &toy_p(), 3);
    assert_eq!(num.row_values(2), &[1.0, 1.0, 1.0, 2.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn product_matches_dense(n in 1usize..30, m in 1usize..15, np in 1usize..6, seed in any::<u64>()) {
        let m = m.min(n);
        let (a, p) = random_global::<f64>(n, m, 0.2, seed).unwrap();
        let (sym, num) = ap(&a, &p, np);
        prop_assert!(sym.same_structure(&num));
        let want = dense_ap(&a, &p);
        for (g, w) in num.to_dense().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
        // Structure is the boolean product.
        let ones = |x: &CsrMatrix<f64>| x.map_values(|_| 1.0);
        let support = dense_ap(&ones(&a), &ones(&p));
        for i in 0..n {
            let cols: Vec<usize> = (0..m).filter(|&j| support[i * m + j] != 0.0).collect();
            prop_assert_eq!(sym.row_cols(i), &cols[..]);
        }
    }
}
