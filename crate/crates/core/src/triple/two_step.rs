//! `A*P` first, then `P^T (A*P)` with an explicit transpose of `P`.

use super::staging::{check_touched, merge_numeric, merge_symbolic, structures_bytes, SendPattern};
use super::{build_output, Internals, PlanStats, Scratch, TripleProductPlan, TwoStepState};
use crate::comm::{start_cached_exchange, start_discovering_exchange, RankContext};
use crate::error::{Error, Result};
use crate::metrics::{MemCategory, MemoryLedger};
use crate::partition::LocalMatrix;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;
use crate::spgemm::{numeric_ap_with, symbolic_ap_tracked, LeftRow, RightFactor, RowStructure};
use crate::triple::Algorithm;

pub(super) fn symbolic<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    mut ledger: MemoryLedger,
) -> Result<TripleProductPlan<T>> {
    let (ap, remote, rs_bytes) = symbolic_ap_tracked(ctx, a, p)?;
    ledger.set(MemCategory::TransientHash, rs_bytes);
    ledger.set(MemCategory::PlanCache, remote.heap_bytes());
    let pt_diag = p.diag().transpose();
    let pt_off = p.offdiag().transpose();

    let right = RightFactor { local: &ap, remote: None };
    let mut rs = RowStructure::new();
    let mut offsets = Vec::with_capacity(pt_off.nrows() + 1);
    offsets.push(0);
    let mut cols = Vec::new();
    for k in 0..pt_off.nrows() {
        right.symbolic_row(LeftRow::of_csr(&pt_off, k), &mut rs);
        let start = cols.len();
        cols.extend(rs.diag_cols.iter());
        cols.extend(rs.offdiag_cols.iter());
        cols[start..].sort_unstable();
        offsets.push(cols.len());
        rs.clear();
    }
    let nnz = cols.len();
    let cs = CsrMatrix::new(pt_off.nrows(), p.ncols_global(), offsets, cols, Some(vec![T::zero(); nnz]))?;
    let mut send = SendPattern::new(p.col_map(), p.col_partition())?;
    ledger.set(
        MemCategory::AuxiliaryMatrices,
        ap.heap_bytes() + pt_diag.heap_bytes() + pt_off.heap_bytes() + cs.heap_bytes(),
    );

    let pending = start_discovering_exchange(ctx, send.encode(&cs, false), false)?;
    send.sources = pending.sources().to_vec();

    let owned = p.col_range();
    let mut rows: Vec<RowStructure> = (0..owned.len()).map(|_| RowStructure::new()).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        right.symbolic_row(LeftRow::of_csr(&pt_diag, i), row);
    }
    ledger.set(MemCategory::TransientHash, structures_bytes(&rows) + rs.heap_bytes());
    let payloads = pending.complete_raw(ctx)?;
    merge_symbolic(&payloads, &mut rows, owned)?;
    drop(payloads);
    ledger.set(MemCategory::TransientHash, structures_bytes(&rows) + rs.heap_bytes());
    let c = build_output(&mut rows, p)?;
    drop(rows);

    Ok(TripleProductPlan {
        algorithm: Algorithm::TwoStep,
        c,
        remote: Some(remote),
        internals: Internals::TwoStep(Box::new(TwoStepState {
            ap,
            pt_diag,
            pt_off,
            cs,
            send,
        })),
        scratch: Scratch::new(),
        stats: PlanStats {
            symbolic_row_kernels: a.nrows(),
            ..PlanStats::default()
        },
        ledger,
    })
}

pub(super) fn numeric<T: Scalar>(
    plan: &mut TripleProductPlan<T>,
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
) -> Result<()> {
    let TripleProductPlan {
        c,
        remote,
        internals,
        scratch,
        stats,
        ..
    } = plan;
    let (Internals::TwoStep(st), Some(remote)) = (internals, remote.as_mut()) else {
        return Err(Error::Config("plan does not hold two-step state".into()));
    };
    if p.col_map() != st.send.rows.as_slice() {
        return Err(Error::StructuralDrift(
            "off-diagonal columns of P changed since the symbolic phase".into(),
        ));
    }
    let Scratch {
        acc, touched_c, cursor, ..
    } = scratch;

    numeric_ap_with(ctx, a, p, &mut st.ap, remote, acc)?;
    stats.numeric_row_kernels += a.nrows();
    p.diag().transpose_values_into(&mut st.pt_diag, cursor)?;
    p.offdiag().transpose_values_into(&mut st.pt_off, cursor)?;

    let right = RightFactor { local: &st.ap, remote: None };
    for k in 0..st.pt_off.nrows() {
        right.numeric_row(LeftRow::of_csr(&st.pt_off, k), acc);
        st.cs.fill_row_exact(k, acc.drain_sorted())?;
    }
    let pending = start_cached_exchange(ctx, &st.send.sources, st.send.encode(&st.cs, true), true)?;

    c.zero_values();
    touched_c.fill(false);
    for i in 0..st.pt_diag.nrows() {
        right.numeric_row(LeftRow::of_csr(&st.pt_diag, i), acc);
        c.add_row_entries(i, acc.drain_sorted(), touched_c)?;
    }
    let payloads = pending.complete_raw(ctx)?;
    merge_numeric(&payloads, c, touched_c)?;
    check_touched(touched_c, "C")
}
