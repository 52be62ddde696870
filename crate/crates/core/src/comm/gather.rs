//! Sparse gather of the remote rows of `P` that a rank's operator couples
//! to: one request and one reply per neighbor pair.

use std::mem::size_of;
use std::ops::Range;
use std::time::Instant;

use super::harness::{MessageKind, RankContext};
use super::wire::{decode_indices, encode_indices, Reader, Writer};
use crate::error::{CommError, Error, Result};
use crate::metrics::Phase;
use crate::partition::{LocalMatrix, NeighborList};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Who talks to whom in a gather, kept so value refreshes can be checked
/// against the structure seen in the symbolic phase.
#[derive(Debug, Clone, Default)]
struct GatherPattern {
    neighbors: Vec<usize>,
    segments: Vec<Range<usize>>,
    requesters: Vec<usize>,
    served: Vec<Vec<usize>>,
    served_lens: Vec<Vec<usize>>,
}

/// Copies of `P` rows owned elsewhere, one per off-diagonal column of `A`.
#[derive(Debug, Clone)]
pub struct RemoteRows<T> {
    source_cols: Vec<usize>,
    rows: CsrMatrix<T>,
    pattern: GatherPattern,
}

impl<T: Scalar> RemoteRows<T> {
    pub fn empty(ncols: usize, symbolic: bool) -> Self {
        let rows = CsrMatrix::zeros(0, ncols);
        Self {
            source_cols: Vec::new(),
            rows: if symbolic { rows.into_symbolic() } else { rows },
            pattern: GatherPattern::default(),
        }
    }

    /// Global row of `P` behind each gathered row.
    pub fn source_cols(&self) -> &[usize] {
        &self.source_cols
    }

    /// Gathered rows with global column indices.
    pub fn rows(&self) -> &CsrMatrix<T> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.source_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_cols.is_empty()
    }

    /// Ranks rows were requested from, ascending.
    pub fn neighbors(&self) -> &[usize] {
        &self.pattern.neighbors
    }

    /// Ranks this rank serves rows to, ascending.
    pub fn requesters(&self) -> &[usize] {
        &self.pattern.requesters
    }

    /// Gathered rows plus the cached communication pattern.
    pub fn heap_bytes(&self) -> usize {
        let p = &self.pattern;
        let words = self.source_cols.len()
            + p.neighbors.len()
            + 2 * p.segments.len()
            + p.requesters.len()
            + p.served.iter().map(Vec::len).sum::<usize>()
            + p.served_lens.iter().map(Vec::len).sum::<usize>();
        self.rows.heap_bytes() + words * size_of::<usize>()
    }
}

fn check_requests<T: Scalar>(neighbors: &NeighborList, p: &LocalMatrix<T>) -> Result<()> {
    let part = p.row_partition();
    for (&r, cols) in neighbors.ranks.iter().zip(&neighbors.cols) {
        for &c in cols {
            let owner = part.owner(c)?;
            if owner != r {
                return Err(Error::Partition(format!(
                    "row {c} listed under rank {r} but owned by rank {owner}"
                )));
            }
        }
        if r == p.rank() {
            return Err(CommError::BadPeer { rank: r, peer: r }.into());
        }
    }
    Ok(())
}

/// Serves `rows` (global ids owned here) as a reply batch.
fn encode_served<T: Scalar>(p: &LocalMatrix<T>, rank: usize, rows: &[usize], lens: &mut Vec<usize>) -> Result<Vec<u8>> {
    let range = p.row_range();
    let numeric = !p.is_symbolic();
    let mut w = Writer::new();
    w.u64(rows.len());
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for &g in rows {
        if !range.contains(&g) {
            return Err(Error::UnownedRow { rank, row: g });
        }
        let i = g - range.start;
        cols.clear();
        vals.clear();
        p.for_each_global(i, |c, pos| {
            cols.push(c);
            if numeric {
                vals.push(value_at(p, pos));
            }
        });
        lens.push(cols.len());
        w.row(g, &cols, numeric.then_some(vals.as_slice()));
    }
    Ok(w.finish())
}

#[inline]
fn value_at<T: Scalar>(p: &LocalMatrix<T>, pos: std::result::Result<usize, usize>) -> T {
    match pos {
        Ok(k) => p.diag().values().expect("numeric")[k],
        Err(k) => p.offdiag().values().expect("numeric")[k],
    }
}

/// Collective: fetches the rows of `P` named in `neighbors` (structure and
/// current values) and serves the rows other ranks ask for.
pub fn gather_remote_rows_symbolic<T: Scalar>(
    ctx: &mut RankContext<'_>,
    neighbors: &NeighborList,
    p: &LocalMatrix<T>,
) -> Result<RemoteRows<T>> {
    let start = Instant::now();
    let out = gather_inner(ctx, neighbors, p);
    ctx.timer_mut().add(Phase::Gather, start.elapsed());
    out
}

fn gather_inner<T: Scalar>(
    ctx: &mut RankContext<'_>,
    neighbors: &NeighborList,
    p: &LocalMatrix<T>,
) -> Result<RemoteRows<T>> {
    let ncols = p.ncols_global();
    let symbolic = p.is_symbolic();
    if ctx.np() == 1 {
        if !neighbors.is_empty() {
            return Err(Error::Partition("single rank cannot have remote neighbors".into()));
        }
        return Ok(RemoteRows::empty(ncols, symbolic));
    }
    check_requests(neighbors, p)?;
    ctx.begin_round();
    let requesters = ctx.discover_sources(&neighbors.ranks)?;

    for (&r, cols) in neighbors.ranks.iter().zip(&neighbors.cols) {
        ctx.send(r, MessageKind::Request, encode_indices(cols))?;
    }
    let mut served = Vec::with_capacity(requesters.len());
    let mut served_lens = Vec::with_capacity(requesters.len());
    for &q in &requesters {
        let rows = decode_indices(&ctx.recv(q, MessageKind::Request)?)?;
        let mut lens = Vec::with_capacity(rows.len());
        let reply = encode_served(p, ctx.rank(), &rows, &mut lens)?;
        ctx.send(q, MessageKind::Reply, reply)?;
        served.push(rows);
        served_lens.push(lens);
    }

    let mut source_cols = Vec::new();
    let mut offsets = vec![0usize];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut segments = Vec::with_capacity(neighbors.len());
    for (&r, wanted) in neighbors.ranks.iter().zip(&neighbors.cols) {
        let buf = ctx.recv(r, MessageKind::Reply)?;
        let mut rd = Reader::new(&buf);
        let n = rd.u64()?;
        if n != wanted.len() {
            return Err(CommError::Malformed(format!(
                "rank {r} replied with {n} rows, {} requested",
                wanted.len()
            ))
            .into());
        }
        let seg_start = source_cols.len();
        for &g in wanted {
            let row = rd.row::<T>(!symbolic)?;
            if row.row != g {
                return Err(CommError::Malformed(format!("expected row {g}, got {}", row.row)).into());
            }
            for k in 0..row.len {
                let c = row.col(k);
                if c >= ncols {
                    return Err(Error::IndexOutOfRange { index: c, nglobal: ncols });
                }
                cols.push(c);
                if !symbolic {
                    vals.push(row.val::<T>(k));
                }
            }
            offsets.push(cols.len());
            source_cols.push(g);
        }
        rd.finish()?;
        segments.push(seg_start..source_cols.len());
    }
    let rows = CsrMatrix::new(
        source_cols.len(),
        ncols,
        offsets,
        cols,
        (!symbolic).then_some(vals),
    )?;
    Ok(RemoteRows {
        source_cols,
        rows,
        pattern: GatherPattern {
            neighbors: neighbors.ranks.clone(),
            segments,
            requesters,
            served,
            served_lens,
        },
    })
}

/// Collective: refreshes the values of `rr` in place. Replies carry values
/// only; any change in the structure of `P` since the symbolic gather is
/// reported as drift.
pub fn update_remote_rows_numeric<T: Scalar>(
    ctx: &mut RankContext<'_>,
    rr: &mut RemoteRows<T>,
    p: &LocalMatrix<T>,
) -> Result<()> {
    let start = Instant::now();
    let out = update_inner(ctx, rr, p);
    ctx.timer_mut().add(Phase::Gather, start.elapsed());
    out
}

fn update_inner<T: Scalar>(ctx: &mut RankContext<'_>, rr: &mut RemoteRows<T>, p: &LocalMatrix<T>) -> Result<()> {
    if p.is_symbolic() {
        return Err(Error::InvalidStructure("numeric gather from a symbolic P".into()));
    }
    if ctx.np() == 1 {
        return Ok(());
    }
    ctx.begin_round();
    let pat = &rr.pattern;
    for (&r, seg) in pat.neighbors.iter().zip(&pat.segments) {
        ctx.send(r, MessageKind::Request, encode_indices(&rr.source_cols[seg.clone()]))?;
    }
    let range = p.row_range();
    for (k, &q) in pat.requesters.iter().enumerate() {
        let rows = decode_indices(&ctx.recv(q, MessageKind::Request)?)?;
        if rows != pat.served[k] {
            return Err(Error::StructuralDrift(format!(
                "rank {q} requested a different row set than in the symbolic phase"
            )));
        }
        let mut w = Writer::new();
        w.u64(pat.served_lens[k].iter().sum());
        for (&g, &len) in rows.iter().zip(&pat.served_lens[k]) {
            let i = g - range.start;
            if p.diag().row_len(i) + p.offdiag().row_len(i) != len {
                return Err(Error::StructuralDrift(format!("row {g} of P changed length")));
            }
            p.for_each_global(i, |_, pos| w.scalar(value_at(p, pos)));
        }
        ctx.send(q, MessageKind::Reply, w.finish())?;
    }

    let offsets = rr.rows.row_offsets().to_vec();
    let vals = rr
        .rows
        .values_mut()
        .ok_or_else(|| Error::InvalidStructure("remote rows were gathered symbolically".into()))?;
    for (&r, seg) in pat.neighbors.iter().zip(&pat.segments) {
        let buf = ctx.recv(r, MessageKind::Reply)?;
        let mut rd = Reader::new(&buf);
        let lo = offsets[seg.start];
        let hi = offsets[seg.end];
        let n = rd.u64()?;
        if n != hi - lo {
            return Err(Error::StructuralDrift(format!(
                "rank {r} sent {n} values, {} expected",
                hi - lo
            )));
        }
        for v in &mut vals[lo..hi] {
            *v = rd.scalar()?;
        }
        rd.finish()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::comm::harness::{spawn_ranks, Harness};
    use crate::partition::{build_neighbor_list, DistMatrix, RowPartition};
    use crate::sparse::Triplet;

    fn toy() -> (DistMatrix<f64>, DistMatrix<f64>) {
        let a_pat = [
            (0, 0), (0, 1), (0, 4), (1, 1), (1, 2), (1, 4), (2, 0), (2, 3), (2, 4),
            (3, 1), (3, 3), (4, 3), (4, 4), (5, 1), (5, 4), (5, 5),
        ];
        let p_pat = [(0, 0), (0, 3), (1, 1), (2, 2), (2, 3), (3, 2), (4, 1), (4, 3), (5, 2)];
        let t = |pat: &[(usize, usize)]| pat.iter().map(|&(r, c)| Triplet::new(r, c, 1.0 + r as f64)).collect::<Vec<_>>();
        let a = CsrMatrix::from_triplets(6, 6, &t(&a_pat)).unwrap();
        let p = CsrMatrix::from_triplets(6, 4, &t(&p_pat)).unwrap();
        let rows = Arc::new(RowPartition::new(6, 3).unwrap());
        let cols = Arc::new(RowPartition::new(4, 3).unwrap());
        (
            DistMatrix::from_global(&a, rows.clone(), rows.clone()).unwrap(),
            DistMatrix::from_global(&p, rows, cols).unwrap(),
        )
    }

    #[test]
    fn toy_rank0_fetches_rows_2_and_4() {
        let (a, p) = toy();
        let out = spawn_ranks(3, |ctx| {
            let r = ctx.rank();
            let nb = build_neighbor_list(a.local(r), p.local(r).row_partition())?;
            gather_remote_rows_symbolic(ctx, &nb, p.local(r))
        })
        .unwrap();
        let rr = &out[0];
        assert_eq!(rr.source_cols(), &[2, 4]);
        assert_eq!(rr.rows().row_cols(0), &[2, 3]);
        assert_eq!(rr.rows().row_cols(1), &[1, 3]);
        assert_eq!(rr.rows().row_values(1), &[5.0, 5.0]);
    }

    #[test]
    fn empty_neighbors_send_nothing() {
        let part = Arc::new(RowPartition::new(4, 2).unwrap());
        let p = DistMatrix::from_global(&CsrMatrix::<f64>::identity(4), part.clone(), part).unwrap();
        let run = Harness::new(2)
            .run(|ctx| gather_remote_rows_symbolic(ctx, &NeighborList::default(), p.local(ctx.rank())))
            .unwrap();
        assert!(run.results.iter().all(RemoteRows::is_empty));
        assert!(run.trace.is_empty());
    }

    #[test]
    fn numeric_update_tracks_scaling_and_detects_drift() {
        let (a, p) = toy();
        let p2 = p.map_values(|v| 2.0 * v);
        let out = spawn_ranks(3, |ctx| {
            let r = ctx.rank();
            let nb = build_neighbor_list(a.local(r), p.local(r).row_partition())?;
            let mut rr = gather_remote_rows_symbolic(ctx, &nb, p.local(r))?;
            let before = rr.rows().clone();
            update_remote_rows_numeric(ctx, &mut rr, p.local(r))?;
            assert!(rr.rows().bit_eq(&before));
            update_remote_rows_numeric(ctx, &mut rr, p2.local(r))?;
            Ok((before, rr.rows().clone()))
        })
        .unwrap();
        for (before, after) in out {
            assert!(before.same_structure(&after));
            assert!(before.map_values(|v| 2.0 * v).bit_eq(&after));
        }

        // Rank 1 owns P rows 2 and 3; drop an entry from row 2.
        let global = p.assemble();
        let mut t = global.to_triplets();
        t.retain(|e| !(e.row == 2 && e.col == 3));
        let changed = CsrMatrix::from_triplets(6, 4, &t).unwrap();
        let changed = DistMatrix::from_global(&changed, p.row_partition().clone(), p.col_partition().clone()).unwrap();
        let err = spawn_ranks(3, |ctx| {
            let r = ctx.rank();
            let nb = build_neighbor_list(a.local(r), p.local(r).row_partition())?;
            let mut rr = gather_remote_rows_symbolic(ctx, &nb, p.local(r))?;
            update_remote_rows_numeric(ctx, &mut rr, changed.local(r))
        })
        .unwrap_err();
        assert!(matches!(err, Error::StructuralDrift(_)), "{err}");
    }
}
