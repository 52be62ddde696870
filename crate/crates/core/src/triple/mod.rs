//! The Galerkin triple product `C = P^T A P` on row-distributed matrices.
//!
//! Three algorithms share one plan type:
//!
//! * [`Algorithm::TwoStep`] forms `A*P`, transposes `P` explicitly and
//!   multiplies the transpose into the stored product.
//! * [`Algorithm::AllAtOnce`] sums outer products `P(I,:)^T (A*P)(I,:)`
//!   row by row without storing `A*P` or `P^T`: one pass for rows that
//!   feed other ranks, a second for rows that stay local.
//! * [`Algorithm::MergedAllAtOnce`] does both passes in one loop, forming
//!   each row of `A*P` once.
//!
//! `C` rows and columns both follow the column partition of `P`.

mod outer;
mod staging;
mod two_step;

use std::fmt;
use std::mem::size_of;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::comm::{Harness, RankContext, RemoteRows, TraceRecord};
use crate::error::{Error, Result};
use crate::metrics::{MemCategory, MemoryLedger, Phase, PhaseTimer};
use crate::partition::{DistMatrix, LocalMatrix};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, RowAccumulator};
use crate::spgemm::{check_conforming, RowStructure};

use staging::SendPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "two-step")]
    TwoStep,
    #[serde(rename = "allatonce")]
    AllAtOnce,
    #[serde(rename = "merged")]
    MergedAllAtOnce,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::TwoStep, Algorithm::AllAtOnce, Algorithm::MergedAllAtOnce];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::TwoStep => "two-step",
            Algorithm::AllAtOnce => "allatonce",
            Algorithm::MergedAllAtOnce => "merged",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}' (two-step, allatonce, merged)")))
    }
}

/// What happens to plan internals after a numeric pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CachePolicy {
    /// Drop everything but `C`; another product needs a new symbolic pass.
    #[default]
    #[serde(rename = "free")]
    FreeAfterSolve,
    /// Keep the plan so further numeric passes skip all symbolic work.
    #[serde(rename = "keep")]
    CacheIntermediate,
}

impl CachePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CachePolicy::FreeAfterSolve => "free",
            CachePolicy::CacheIntermediate => "keep",
        }
    }
}

impl fmt::Display for CachePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CachePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(CachePolicy::FreeAfterSolve),
            "keep" => Ok(CachePolicy::CacheIntermediate),
            _ => Err(Error::Config(format!("unknown cache policy '{s}' (free, keep)"))),
        }
    }
}

/// Instrumented counters of one rank's plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStats {
    pub symbolic_passes: usize,
    pub numeric_passes: usize,
    /// Rows of `A*P` formed structurally.
    pub symbolic_row_kernels: usize,
    /// Rows of `A*P` formed numerically.
    pub numeric_row_kernels: usize,
}

#[derive(Debug)]
struct Scratch<T> {
    acc: RowAccumulator<T>,
    row_cols: Vec<usize>,
    row_vals: Vec<T>,
    touched_c: Vec<bool>,
    touched_s: Vec<bool>,
    cursor: Vec<usize>,
}

impl<T: Scalar> Scratch<T> {
    fn new() -> Self {
        Self {
            acc: RowAccumulator::new(),
            row_cols: Vec::new(),
            row_vals: Vec::new(),
            touched_c: Vec::new(),
            touched_s: Vec::new(),
            cursor: Vec::new(),
        }
    }

    /// Everything but the accumulator, which counts as hash memory.
    fn plain_bytes(&self) -> usize {
        self.row_cols.capacity() * size_of::<usize>()
            + self.row_vals.capacity() * size_of::<T>()
            + self.touched_c.capacity()
            + self.touched_s.capacity()
            + self.cursor.capacity() * size_of::<usize>()
    }
}

#[derive(Debug)]
struct TwoStepState<T> {
    ap: LocalMatrix<T>,
    pt_diag: CsrMatrix<T>,
    pt_off: CsrMatrix<T>,
    /// `P_o^T (A*P)`, one row per off-diagonal column of `P`, global columns.
    cs: CsrMatrix<T>,
    send: SendPattern,
}

#[derive(Debug)]
struct OuterState<T> {
    /// Send-side rows shaped by the symbolic pass, global columns.
    staging: CsrMatrix<T>,
    send: SendPattern,
}

#[derive(Debug)]
enum Internals<T> {
    TwoStep(Box<TwoStepState<T>>),
    Outer(OuterState<T>),
    Released,
}

/// One rank's symbolic state for repeated numeric triple products, plus the
/// output matrix they fill.
#[derive(Debug)]
pub struct TripleProductPlan<T> {
    algorithm: Algorithm,
    c: LocalMatrix<T>,
    remote: Option<RemoteRows<T>>,
    internals: Internals<T>,
    scratch: Scratch<T>,
    stats: PlanStats,
    ledger: MemoryLedger,
}

impl<T: Scalar> TripleProductPlan<T> {
    /// Collective: runs the symbolic phase of `algorithm` and allocates `C`
    /// with zero values.
    pub fn symbolic(
        ctx: &mut RankContext<'_>,
        a: &LocalMatrix<T>,
        p: &LocalMatrix<T>,
        algorithm: Algorithm,
    ) -> Result<Self> {
        check_conforming(a, p)?;
        let start = Instant::now();
        let mut ledger = MemoryLedger::new();
        ledger.set(MemCategory::InputMatrices, a.heap_bytes() + p.heap_bytes());
        let mut plan = match algorithm {
            Algorithm::TwoStep => two_step::symbolic(ctx, a, p, ledger)?,
            Algorithm::AllAtOnce => outer::symbolic(ctx, a, p, false, ledger)?,
            Algorithm::MergedAllAtOnce => outer::symbolic(ctx, a, p, true, ledger)?,
        };
        plan.stats.symbolic_passes = 1;
        plan.scratch.touched_c = vec![false; plan.c.nnz()];
        if let Internals::Outer(st) = &plan.internals {
            plan.scratch.touched_s = vec![false; st.staging.nnz()];
        }
        plan.account();
        let elapsed = start.elapsed();
        ctx.timer_mut().add(Phase::Symbolic, elapsed);
        ctx.timer_mut().add(Phase::Total, elapsed);
        Ok(plan)
    }

    /// Collective: recomputes the values of `C` for the current values of
    /// `A` and `P`, whose structure must match the symbolic phase.
    pub fn numeric(&mut self, ctx: &mut RankContext<'_>, a: &LocalMatrix<T>, p: &LocalMatrix<T>) -> Result<&LocalMatrix<T>> {
        check_conforming(a, p)?;
        if a.is_symbolic() || p.is_symbolic() {
            return Err(Error::InvalidStructure("numeric triple product of symbolic inputs".into()));
        }
        let start = Instant::now();
        match self.internals {
            Internals::TwoStep(_) => two_step::numeric(self, ctx, a, p)?,
            Internals::Outer(_) => outer::numeric(self, ctx, a, p)?,
            Internals::Released => {
                return Err(Error::Config(
                    "plan internals were released; run the symbolic phase again".into(),
                ))
            }
        }
        self.stats.numeric_passes += 1;
        self.account();
        let elapsed = start.elapsed();
        ctx.timer_mut().add(Phase::Numeric, elapsed);
        ctx.timer_mut().add(Phase::Total, elapsed);
        Ok(&self.c)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn output(&self) -> &LocalMatrix<T> {
        &self.c
    }

    pub fn into_output(self) -> LocalMatrix<T> {
        self.c
    }

    pub fn stats(&self) -> &PlanStats {
        &self.stats
    }

    pub fn ledger(&self) -> &MemoryLedger {
        &self.ledger
    }

    pub fn is_released(&self) -> bool {
        matches!(self.internals, Internals::Released)
    }

    /// The gathered rows of `P`, while the plan holds them.
    pub fn remote_rows(&self) -> Option<&RemoteRows<T>> {
        self.remote.as_ref()
    }

    /// Drops every internal structure except `C`.
    pub fn release(&mut self) {
        self.internals = Internals::Released;
        self.remote = None;
        self.scratch = Scratch::new();
        self.account();
    }

    fn aux_bytes(&self) -> usize {
        match &self.internals {
            Internals::TwoStep(st) => {
                st.ap.heap_bytes() + st.pt_diag.heap_bytes() + st.pt_off.heap_bytes() + st.cs.heap_bytes()
            }
            _ => 0,
        }
    }

    fn plan_bytes(&self) -> usize {
        let internal = match &self.internals {
            Internals::TwoStep(st) => st.send.heap_bytes(),
            Internals::Outer(st) => st.staging.heap_bytes() + st.send.heap_bytes(),
            Internals::Released => 0,
        };
        internal + self.remote.as_ref().map_or(0, RemoteRows::heap_bytes) + self.scratch.plain_bytes()
    }

    /// Records the current size of every persistent category.
    fn account(&mut self) {
        let aux = self.aux_bytes();
        let plan = self.plan_bytes();
        self.ledger.set(MemCategory::OutputMatrix, self.c.heap_bytes());
        self.ledger.set(MemCategory::AuxiliaryMatrices, aux);
        self.ledger.set(MemCategory::PlanCache, plan);
        self.ledger.set(MemCategory::TransientHash, self.scratch.acc.heap_bytes());
    }
}

fn expect_algorithm<T>(plan: &TripleProductPlan<T>, want: Algorithm) -> Result<()> {
    if plan.algorithm != want {
        return Err(Error::Config(format!(
            "plan was built for {}, not {}",
            plan.algorithm, want
        )));
    }
    Ok(())
}

pub fn two_step_symbolic<T: Scalar>(ctx: &mut RankContext<'_>, a: &LocalMatrix<T>, p: &LocalMatrix<T>) -> Result<TripleProductPlan<T>> {
    TripleProductPlan::symbolic(ctx, a, p, Algorithm::TwoStep)
}

pub fn two_step_numeric<'p, T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    plan: &'p mut TripleProductPlan<T>,
) -> Result<&'p LocalMatrix<T>> {
    expect_algorithm(plan, Algorithm::TwoStep)?;
    plan.numeric(ctx, a, p)
}

pub fn aao_symbolic<T: Scalar>(ctx: &mut RankContext<'_>, a: &LocalMatrix<T>, p: &LocalMatrix<T>) -> Result<TripleProductPlan<T>> {
    TripleProductPlan::symbolic(ctx, a, p, Algorithm::AllAtOnce)
}

pub fn aao_numeric<'p, T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    plan: &'p mut TripleProductPlan<T>,
) -> Result<&'p LocalMatrix<T>> {
    expect_algorithm(plan, Algorithm::AllAtOnce)?;
    plan.numeric(ctx, a, p)
}

pub fn merged_symbolic<T: Scalar>(ctx: &mut RankContext<'_>, a: &LocalMatrix<T>, p: &LocalMatrix<T>) -> Result<TripleProductPlan<T>> {
    TripleProductPlan::symbolic(ctx, a, p, Algorithm::MergedAllAtOnce)
}

pub fn merged_numeric<'p, T: Scalar>(
    ctx: &mut RankContext<'_>,
    a: &LocalMatrix<T>,
    p: &LocalMatrix<T>,
    plan: &'p mut TripleProductPlan<T>,
) -> Result<&'p LocalMatrix<T>> {
    expect_algorithm(plan, Algorithm::MergedAllAtOnce)?;
    plan.numeric(ctx, a, p)
}

/// Result of a distributed triple product.
#[derive(Debug)]
pub struct PtapOutput<T> {
    pub c: DistMatrix<T>,
    /// Per-rank plans; released ones still hold their part of `C`.
    pub plans: Vec<TripleProductPlan<T>>,
    pub timers: Vec<PhaseTimer>,
    pub trace: Vec<TraceRecord>,
}

fn check_global<T: Scalar>(a: &DistMatrix<T>, p: &DistMatrix<T>) -> Result<()> {
    if a.ncols() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} but P has {} rows",
            a.nrows(),
            a.ncols(),
            p.nrows()
        )));
    }
    if a.np() != p.np() {
        return Err(Error::Partition(format!(
            "A is spread over {} ranks and P over {}",
            a.np(),
            p.np()
        )));
    }
    Ok(())
}

fn collect<T: Scalar>(run: crate::comm::HarnessRun<TripleProductPlan<T>>) -> Result<PtapOutput<T>> {
    let c = DistMatrix::from_locals(run.results.iter().map(|pl| pl.output().clone()).collect())?;
    Ok(PtapOutput {
        c,
        plans: run.results,
        timers: run.timers,
        trace: run.trace,
    })
}

/// Runs one symbolic and one numeric pass on every rank of `harness`.
pub fn ptap<T: Scalar>(
    harness: &Harness,
    a: &DistMatrix<T>,
    p: &DistMatrix<T>,
    algorithm: Algorithm,
    cache: CachePolicy,
) -> Result<PtapOutput<T>> {
    check_global(a, p)?;
    if harness.np() != a.np() {
        return Err(Error::Partition(format!(
            "harness has {} ranks, matrices are spread over {}",
            harness.np(),
            a.np()
        )));
    }
    let run = harness.run(|ctx| {
        let r = ctx.rank();
        let mut plan = TripleProductPlan::symbolic(ctx, a.local(r), p.local(r), algorithm)?;
        plan.numeric(ctx, a.local(r), p.local(r))?;
        if cache == CachePolicy::FreeAfterSolve {
            plan.release();
        }
        Ok(plan)
    })?;
    collect(run)
}

/// Runs one more numeric pass on cached plans.
pub fn ptap_numeric<T: Scalar>(
    harness: &Harness,
    a: &DistMatrix<T>,
    p: &DistMatrix<T>,
    plans: Vec<TripleProductPlan<T>>,
) -> Result<PtapOutput<T>> {
    check_global(a, p)?;
    if plans.len() != harness.np() || a.np() != harness.np() {
        return Err(Error::Partition("one plan per rank is required".into()));
    }
    let slots: Vec<Mutex<Option<TripleProductPlan<T>>>> = plans.into_iter().map(|pl| Mutex::new(Some(pl))).collect();
    let run = harness.run(|ctx| {
        let r = ctx.rank();
        let mut plan = slots[r]
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .take()
            .expect("each rank takes its plan once");
        plan.numeric(ctx, a.local(r), p.local(r))?;
        Ok(plan)
    })?;
    collect(run)
}

/// Sorted per-row structures into a local matrix with zero values.
fn build_output<T: Scalar>(rows: &mut [RowStructure], p: &LocalMatrix<T>) -> Result<LocalMatrix<T>> {
    let part = p.col_partition();
    let mut b = crate::spgemm::StructureBuilder::new(part, p.rank(), rows.len());
    for rs in rows.iter_mut() {
        b.push_structure(rs);
    }
    b.finish(p.rank(), part.clone(), part.clone(), true)
}
