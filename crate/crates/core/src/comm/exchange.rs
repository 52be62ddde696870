//! Owner-directed exchange of contribution rows.
//!
//! Sending and receiving are split: [`start_exchange`] posts every outgoing
//! batch and returns a [`PendingExchange`]; the caller may do local work
//! before calling [`PendingExchange::complete`]. Received batches are
//! returned in ascending source-rank order whatever order they arrived in.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::harness::{MessageKind, RankContext};
use super::wire::{Reader, Writer};
use crate::error::{CommError, Error, Result};
use crate::metrics::Phase;
use crate::partition::RowPartition;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow<T> {
    pub row: usize,
    pub cols: Vec<usize>,
    /// `None` in symbolic batches.
    pub vals: Option<Vec<T>>,
}

/// Partial rows of the output produced on `source` and owned by
/// `destination`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionBatch<T> {
    pub source: usize,
    pub destination: usize,
    pub rows: Vec<BatchRow<T>>,
}

impl<T: Scalar> ContributionBatch<T> {
    pub fn new(source: usize, destination: usize) -> Self {
        Self {
            source,
            destination,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: usize, cols: Vec<usize>, vals: Option<Vec<T>>) {
        self.rows.push(BatchRow { row, cols, vals });
    }

    pub fn is_symbolic(&self) -> bool {
        self.rows.iter().all(|r| r.vals.is_none())
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(|r| r.cols.len()).sum()
    }

    /// Flattened `(row, col, value)` entries; symbolic entries carry `None`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Option<T>)> + '_ {
        self.rows.iter().flat_map(|r| {
            r.cols
                .iter()
                .enumerate()
                .map(move |(k, &c)| (r.row, c, r.vals.as_ref().map(|v| v[k])))
        })
    }

    pub(crate) fn encode(&self, with_values: bool) -> Result<Vec<u8>> {
        let mut w = Writer::new();
        w.u64(self.rows.len());
        for r in &self.rows {
            let vals = match (&r.vals, with_values) {
                (Some(v), true) if v.len() == r.cols.len() => Some(v.as_slice()),
                (None, false) => None,
                _ => {
                    return Err(Error::InvalidStructure(format!(
                        "row {} of a batch mixes symbolic and numeric entries",
                        r.row
                    )))
                }
            };
            w.row(r.row, &r.cols, vals);
        }
        Ok(w.finish())
    }

    pub(crate) fn decode(source: usize, destination: usize, buf: &[u8], with_values: bool) -> Result<Self, CommError> {
        let mut rd = Reader::new(buf);
        let n = rd.u64()?;
        let mut out = Self::new(source, destination);
        for _ in 0..n {
            let row = rd.row::<T>(with_values)?;
            let cols = row.cols().collect();
            let vals = with_values.then(|| (0..row.len).map(|k| row.val::<T>(k)).collect());
            out.push_row(row.row, cols, vals);
        }
        rd.finish()?;
        Ok(out)
    }
}

/// An exchange whose sends are posted but whose receives are outstanding.
#[derive(Debug)]
#[must_use = "an exchange must be completed"]
pub struct PendingExchange {
    sources: Vec<usize>,
    with_values: bool,
}

impl PendingExchange {
    /// Ranks a batch will arrive from, ascending.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Receives one payload per source, ascending by source rank.
    pub(crate) fn complete_raw(self, ctx: &mut RankContext<'_>) -> Result<Vec<(usize, Vec<u8>)>> {
        let start = Instant::now();
        let out = self
            .sources
            .iter()
            .map(|&s| Ok((s, ctx.recv(s, MessageKind::Contribution)?)))
            .collect::<Result<Vec<_>>>();
        ctx.timer_mut().add(Phase::Exchange, start.elapsed());
        out
    }

    pub fn complete<T: Scalar>(self, ctx: &mut RankContext<'_>) -> Result<Vec<ContributionBatch<T>>> {
        let me = ctx.rank();
        let with_values = self.with_values;
        self.complete_raw(ctx)?
            .into_iter()
            .map(|(s, buf)| Ok(ContributionBatch::decode(s, me, &buf, with_values)?))
            .collect()
    }
}

fn check_batch<T: Scalar>(ctx: &RankContext<'_>, part: &RowPartition, b: &ContributionBatch<T>) -> Result<()> {
    if b.source != ctx.rank() {
        return Err(Error::Config(format!(
            "rank {} sends a batch labelled with source {}",
            ctx.rank(),
            b.source
        )));
    }
    if b.destination >= ctx.np() {
        return Err(CommError::BadPeer {
            rank: ctx.rank(),
            peer: b.destination,
        }
        .into());
    }
    let owned = part.range(b.destination);
    for r in &b.rows {
        if !owned.contains(&r.row) {
            return Err(Error::UnownedRow {
                rank: b.destination,
                row: r.row,
            });
        }
    }
    Ok(())
}

/// Collective: validates `outgoing` against `part`, learns which ranks will
/// send here, and posts every batch. Batches must have distinct
/// destinations and must all be symbolic or all numeric, matching
/// `with_values`.
pub fn start_exchange<T: Scalar>(
    ctx: &mut RankContext<'_>,
    part: &RowPartition,
    outgoing: &[ContributionBatch<T>],
    with_values: bool,
) -> Result<PendingExchange> {
    let start = Instant::now();
    let mut dests: Vec<usize> = Vec::with_capacity(outgoing.len());
    for b in outgoing {
        check_batch(ctx, part, b)?;
        dests.push(b.destination);
    }
    let mut sorted = dests.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("two batches share a destination".into()));
    }
    let payloads = outgoing
        .iter()
        .map(|b| Ok((b.destination, b.encode(with_values)?)))
        .collect::<Result<Vec<_>>>()?;
    ctx.begin_round();
    let sources = ctx.discover_sources(&sorted)?;
    for (d, buf) in payloads {
        ctx.send(d, MessageKind::Contribution, buf)?;
    }
    ctx.timer_mut().add(Phase::Exchange, start.elapsed());
    Ok(PendingExchange { sources, with_values })
}

/// Posts pre-encoded payloads to a destination set fixed in an earlier
/// exchange; no source discovery is needed.
pub(crate) fn start_cached_exchange(
    ctx: &mut RankContext<'_>,
    sources: &[usize],
    payloads: impl IntoIterator<Item = (usize, Vec<u8>)>,
    with_values: bool,
) -> Result<PendingExchange> {
    let start = Instant::now();
    ctx.begin_round();
    for (d, buf) in payloads {
        ctx.send(d, MessageKind::Contribution, buf)?;
    }
    ctx.timer_mut().add(Phase::Exchange, start.elapsed());
    Ok(PendingExchange {
        sources: sources.to_vec(),
        with_values,
    })
}

/// Posts pre-encoded payloads and discovers the sending ranks.
pub(crate) fn start_discovering_exchange(
    ctx: &mut RankContext<'_>,
    payloads: Vec<(usize, Vec<u8>)>,
    with_values: bool,
) -> Result<PendingExchange> {
    let start = Instant::now();
    ctx.begin_round();
    let dests: Vec<usize> = payloads.iter().map(|p| p.0).collect();
    let sources = ctx.discover_sources(&dests)?;
    for (d, buf) in payloads {
        ctx.send(d, MessageKind::Contribution, buf)?;
    }
    ctx.timer_mut().add(Phase::Exchange, start.elapsed());
    Ok(PendingExchange { sources, with_values })
}

/// Collective: delivers every batch to its destination and returns the
/// batches addressed here, ascending by source rank. All ranks must agree
/// on `with_values`.
pub fn exchange_contributions<T: Scalar>(
    ctx: &mut RankContext<'_>,
    part: &RowPartition,
    outgoing: &[ContributionBatch<T>],
    with_values: bool,
) -> Result<Vec<ContributionBatch<T>>> {
    start_exchange(ctx, part, outgoing, with_values)?.complete(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::harness::{spawn_ranks, Harness};

    #[test]
    fn single_batch_arrives() {
        let part = RowPartition::new(4, 2).unwrap();
        let out = spawn_ranks(2, |ctx| {
            let mut out = Vec::new();
            if ctx.rank() == 0 {
                let mut b = ContributionBatch::new(0, 1);
                b.push_row(3, vec![0, 2], Some(vec![1.5f64, -1.0]));
                out.push(b);
            }
            exchange_contributions(ctx, &part, &out, true)
        })
        .unwrap();
        assert!(out[0].is_empty());
        assert_eq!(out[1].len(), 1);
        assert_eq!(out[1][0].source, 0);
        assert_eq!(out[1][0].rows[0].cols, vec![0, 2]);
        assert_eq!(out[1][0].rows[0].vals, Some(vec![1.5, -1.0]));
    }

    #[test]
    fn nothing_to_send() {
        let part = RowPartition::new(6, 3).unwrap();
        let run = Harness::new(3)
            .run(|ctx| exchange_contributions::<f64>(ctx, &part, &[], true))
            .unwrap();
        assert!(run.results.iter().all(Vec::is_empty));
        assert!(run.trace.is_empty());
    }

    #[test]
    fn unowned_row_fails_at_send() {
        let part = RowPartition::new(4, 2).unwrap();
        let err = spawn_ranks(2, |ctx| {
            let mut out = Vec::new();
            if ctx.rank() == 0 {
                let mut b = ContributionBatch::<f64>::new(0, 1);
                b.push_row(0, vec![0], Some(vec![1.0]));
                out.push(b);
            }
            exchange_contributions(ctx, &part, &out, true)
        })
        .unwrap_err();
        assert!(matches!(err, Error::UnownedRow { rank: 1, row: 0 }));
    }

    #[test]
    fn symbolic_batches_carry_no_values() {
        let part = RowPartition::new(2, 2).unwrap();
        let out = spawn_ranks(2, |ctx| {
            let me = ctx.rank();
            let mut b = ContributionBatch::<f64>::new(me, 1 - me);
            b.push_row(1 - me, vec![me], None);
            let pending = start_exchange(ctx, &part, &[b], false)?;
            pending.complete::<f64>(ctx)
        })
        .unwrap();
        assert_eq!(out[0][0].rows[0].row, 0);
        assert!(out[0][0].is_symbolic());
    }
}
