//! Row-wise outer products `P(I,:)^T (A*P)(I,:)` without storing `A*P`.
//!
//! With `merged` off, rows feeding other ranks are formed in a first loop
//! and sent before a second loop forms the local part; rows of `A*P` whose
//! `P` row has both parts are formed twice. With `merged` on, one loop does
//! both and the send follows it.

use super::staging::{
    check_touched, merge_numeric, merge_symbolic, sets_bytes, staging_from_sets, structures_bytes, SendPattern,
};
use super::{build_output, Internals, OuterState, PlanStats, Scratch, TripleProductPlan};
use crate::comm::{
    gather_remote_rows_symbolic, start_cached_exchange, start_discovering_exchange, update_remote_rows_numeric,
    RankContext,
};
use crate::error::{Error, Result};
use crate::metrics::{MemCategory, MemoryLedger};
use crate::partition::{build_neighbor_list, LocalMatrix};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, RowSet};
use crate::spgemm::{LeftRow, RightFactor, RowStructure};
use crate::triple::Algorithm;

fn feed_send(rs: &RowStructure, targets: &[usize], sets: &mut [RowSet]) {
    for &c in targets {
        let s = &mut sets[c];
        for j in rs.diag_cols.iter().chain(rs.offdiag_cols.iter()) {
            s.insert(j);
        }
    }
}

fn feed_local(rs: &RowStructure, targets: &[usize], rows: &mut [RowStructure]) {
    for &i in targets {
        let t = &mut rows[i];
        for j in rs.diag_cols.iter() {
            t.diag_cols.insert(j);
        }
        for j in rs.offdiag_cols.iter() {
            t.offdiag_cols.insert(j);
        }
    }
}

pub(super) fn symbolic<T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    merged: bool,
    mut ledger: MemoryLedger,
) -> Result<TripleProductPlan<T>> {
    let nb = build_neighbor_list(a, p.row_partition())?;
    let remote = gather_remote_rows_symbolic(ctx, &nb, p)?;
    ledger.set(MemCategory::PlanCache, remote.heap_bytes());
    let right = RightFactor {
        local: p,
        remote: Some(remote.rows()),
    };
    let (pd, po) = (p.diag(), p.offdiag());
    let owned = p.col_range();
    let mut send_sets: Vec<RowSet> = (0..p.col_map().len()).map(|_| RowSet::new()).collect();
    let mut local_rows: Vec<RowStructure> = (0..owned.len()).map(|_| RowStructure::new()).collect();
    let mut rs = RowStructure::new();
    let mut kernels = 0;
    let transient = |s: &[RowSet], l: &[RowStructure], rs: &RowStructure| {
        sets_bytes(s) + structures_bytes(l) + rs.heap_bytes()
    };

    let pending;
    let staging: CsrMatrix<T>;
    let mut send;
    if merged {
        for i in 0..a.nrows() {
            let (to_send, to_keep) = (po.row_cols(i), pd.row_cols(i));
            if to_send.is_empty() && to_keep.is_empty() {
                continue;
            }
            right.symbolic_row(LeftRow::of_local(a, i), &mut rs);
            kernels += 1;
            feed_send(&rs, to_send, &mut send_sets);
            feed_local(&rs, to_keep, &mut local_rows);
            rs.clear();
        }
        ledger.set(MemCategory::TransientHash, transient(&send_sets, &local_rows, &rs));
        staging = staging_from_sets(&mut send_sets, p.ncols_global())?;
        send = SendPattern::new(p.col_map(), p.col_partition())?;
        pending = start_discovering_exchange(ctx, send.encode(&staging, false), false)?;
    } else {
        for i in 0..a.nrows() {
            let to_send = po.row_cols(i);
            if to_send.is_empty() {
                continue;
            }
            right.symbolic_row(LeftRow::of_local(a, i), &mut rs);
            kernels += 1;
            feed_send(&rs, to_send, &mut send_sets);
            rs.clear();
        }
        staging = staging_from_sets(&mut send_sets, p.ncols_global())?;
        send = SendPattern::new(p.col_map(), p.col_partition())?;
        pending = start_discovering_exchange(ctx, send.encode(&staging, false), false)?;
        for i in 0..a.nrows() {
            let to_keep = pd.row_cols(i);
            if to_keep.is_empty() {
                continue;
            }
            right.symbolic_row(LeftRow::of_local(a, i), &mut rs);
            kernels += 1;
            feed_local(&rs, to_keep, &mut local_rows);
            rs.clear();
        }
        ledger.set(MemCategory::TransientHash, transient(&send_sets, &local_rows, &rs));
    }
    send.sources = pending.sources().to_vec();
    ledger.set(
        MemCategory::PlanCache,
        remote.heap_bytes() + staging.heap_bytes() + send.heap_bytes(),
    );
    let payloads = pending.complete_raw(ctx)?;
    merge_symbolic(&payloads, &mut local_rows, owned)?;
    drop(payloads);
    ledger.set(MemCategory::TransientHash, transient(&send_sets, &local_rows, &rs));
    let c = build_output(&mut local_rows, p)?;
    drop(local_rows);
    drop(send_sets);

    Ok(TripleProductPlan {
        algorithm: if merged {
            Algorithm::MergedAllAtOnce
        } else {
            Algorithm::AllAtOnce
        },
        c,
        remote: Some(remote),
        internals: Internals::Outer(OuterState { staging, send }),
        scratch: Scratch::new(),
        stats: PlanStats {
            symbolic_row_kernels: kernels,
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
    let merged = plan.algorithm == Algorithm::MergedAllAtOnce;
    let TripleProductPlan {
        c,
        remote,
        internals,
        scratch,
        stats,
        ..
    } = plan;
    let (Internals::Outer(st), Some(remote)) = (internals, remote.as_mut()) else {
        return Err(Error::Config("plan does not hold outer-product state".into()));
    };
    if p.col_map() != st.send.rows.as_slice() {
        return Err(Error::StructuralDrift(
            "off-diagonal columns of P changed since the symbolic phase".into(),
        ));
    }
    if a.col_map() != remote.source_cols() {
        return Err(Error::StructuralDrift(
            "off-diagonal columns of A changed since the symbolic phase".into(),
        ));
    }
    update_remote_rows_numeric(ctx, remote, p)?;
    let Scratch {
        acc,
        row_cols,
        row_vals,
        touched_c,
        touched_s,
        ..
    } = scratch;
    let right = RightFactor {
        local: p,
        remote: Some(remote.rows()),
    };
    let (pd, po) = (p.diag(), p.offdiag());
    st.staging.fill_values(T::zero());
    touched_s.fill(false);
    c.zero_values();
    touched_c.fill(false);

    let mut form_row = |i: usize, row_cols: &mut Vec<usize>, row_vals: &mut Vec<T>| {
        right.numeric_row(LeftRow::of_local(a, i), acc);
        row_cols.clear();
        row_vals.clear();
        for (j, v) in acc.drain_sorted() {
            row_cols.push(j);
            row_vals.push(v);
        }
    };
    let scatter_send = |i: usize, cols: &[usize], vals: &[T], staging: &mut CsrMatrix<T>, touched: &mut [bool]| {
        for (&k, &pv) in po.row_cols(i).iter().zip(po.row_values(i)) {
            let entries = cols.iter().zip(vals).map(|(&j, &v)| (j, pv * v));
            staging.add_row_entries(k, entries, touched)?;
        }
        Ok::<(), Error>(())
    };
    let scatter_local = |i: usize, cols: &[usize], vals: &[T], c: &mut LocalMatrix<T>, touched: &mut [bool]| {
        for (&k, &pv) in pd.row_cols(i).iter().zip(pd.row_values(i)) {
            let entries = cols.iter().zip(vals).map(|(&j, &v)| (j, pv * v));
            c.add_row_entries(k, entries, touched)?;
        }
        Ok::<(), Error>(())
    };

    let mut kernels = 0;
    let pending;
    if merged {
        for i in 0..a.nrows() {
            if po.row_len(i) == 0 && pd.row_len(i) == 0 {
                continue;
            }
            form_row(i, row_cols, row_vals);
            kernels += 1;
            scatter_send(i, row_cols, row_vals, &mut st.staging, touched_s)?;
            scatter_local(i, row_cols, row_vals, c, touched_c)?;
        }
        check_touched(touched_s, "send rows")?;
        pending = start_cached_exchange(ctx, &st.send.sources, st.send.encode(&st.staging, true), true)?;
    } else {
        for i in 0..a.nrows() {
            if po.row_len(i) == 0 {
                continue;
            }
            form_row(i, row_cols, row_vals);
            kernels += 1;
            scatter_send(i, row_cols, row_vals, &mut st.staging, touched_s)?;
        }
        check_touched(touched_s, "send rows")?;
        pending = start_cached_exchange(ctx, &st.send.sources, st.send.encode(&st.staging, true), true)?;
        for i in 0..a.nrows() {
            if pd.row_len(i) == 0 {
                continue;
            }
            form_row(i, row_cols, row_vals);
            kernels += 1;
            scatter_local(i, row_cols, row_vals, c, touched_c)?;
        }
    }
    stats.numeric_row_kernels += kernels;
    let payloads = pending.complete_raw(ctx)?;
    merge_numeric(&payloads, c, touched_c)?;
    check_touched(touched_c, "C")
}
