//! Benchmark driver: one symbolic and repeated numeric products on a
//! simulated set of ranks, with memory, timing and optional verification.

mod report;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comm::{Harness, Scheduler, TraceRecord};
use crate::error::{Error, Result};
use crate::io::read_matrix_market;
use crate::metrics::{MemoryLedger, Phase, PhaseTimer};
use crate::partition::{DistMatrix, RowPartition};
use crate::problems::{model_problem, random_instance, GridSpec, ORACLE_CAP};
use crate::sparse::CsrMatrix;
use crate::triple::{ptap, Algorithm, CachePolicy, PlanStats, TripleProductPlan};
use crate::verify::{compare_sparse, verify_ptap, Verification, DEFAULT_TOLERANCE};

pub use report::{
    read_csv, read_json, write_csv, write_json, write_report, write_table, MemBreakdown, MessageSummary,
    ReportFormat, ReportRow, RunReport, VerifyStatus, CSV_COLUMNS,
};

/// Repeats of the numeric product when none are given.
pub const DEFAULT_REPEATS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSpec {
    Grid(GridSpec),
    Random { n: usize, m: usize, density: f64, seed: u64 },
    Files { a: PathBuf, p: PathBuf },
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Grid(g) => write!(f, "grid {g}"),
            ProblemSpec::Random { n, m, density, seed } => write!(f, "random {n},{m},{density},{seed}"),
            ProblemSpec::Files { a, p } => write!(f, "files {} {}", a.display(), p.display()),
        }
    }
}

impl ProblemSpec {
    /// Parses `n,m,density,seed`.
    pub fn parse_random(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = |what: &str| Error::Config(format!("random instance '{s}': bad {what}"));
        match parts[..] {
            [n, m, d, seed] => Ok(ProblemSpec::Random {
                n: n.parse().map_err(|_| bad("n"))?,
                m: m.parse().map_err(|_| bad("m"))?,
                density: d.parse().map_err(|_| bad("density"))?,
                seed: seed.parse().map_err(|_| bad("seed"))?,
            }),
            _ => Err(Error::Config(format!("random instance '{s}' must be n,m,density,seed"))),
        }
    }

    /// Builds `A` and `P` over `np` ranks.
    pub fn build(&self, np: usize) -> Result<(DistMatrix<f64>, DistMatrix<f64>)> {
        match self {
            ProblemSpec::Grid(g) => model_problem(g, np),
            ProblemSpec::Random { n, m, density, seed } => random_instance(*n, *m, *density, *seed, np),
            ProblemSpec::Files { a, p } => {
                let a: CsrMatrix<f64> = read_matrix_market(a)?;
                let p: CsrMatrix<f64> = read_matrix_market(p)?;
                if a.nrows() != a.ncols() || a.ncols() != p.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "A is {}x{}, P is {}x{}",
                        a.nrows(),
                        a.ncols(),
                        p.nrows(),
                        p.ncols()
                    )));
                }
                let rows = Arc::new(RowPartition::new(a.nrows(), np)?);
                let cols = Arc::new(RowPartition::new(p.ncols(), np)?);
                Ok((
                    DistMatrix::from_global(&a, rows.clone(), rows.clone())?,
                    DistMatrix::from_global(&p, rows, cols)?,
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub algorithm: Algorithm,
    pub problem: ProblemSpec,
    pub ranks: usize,
    pub repeats: usize,
    pub cache: CachePolicy,
    pub verify: bool,
    pub scheduler: Scheduler,
    pub tolerance: f64,
}

impl BenchConfig {
    pub fn new(algorithm: Algorithm, problem: ProblemSpec, ranks: usize) -> Self {
        Self {
            algorithm,
            problem,
            ranks,
            repeats: DEFAULT_REPEATS,
            cache: CachePolicy::CacheIntermediate,
            verify: false,
            scheduler: Scheduler::Sequential,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ranks == 0 {
            return Err(Error::Config("at least one rank is required".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("at least one numeric repeat is required".into()));
        }
        Ok(())
    }
}

/// A finished run: the report plus what it was computed from.
#[derive(Debug)]
pub struct BenchOutcome {
    pub report: RunReport,
    /// Assembled output of the last numeric pass.
    pub c: CsrMatrix<f64>,
    pub trace: Vec<TraceRecord>,
}

struct RankRun {
    c: crate::partition::LocalMatrix<f64>,
    ledger: MemoryLedger,
    stats: PlanStats,
}

fn check_oracle_size(a: &DistMatrix<f64>, p: &DistMatrix<f64>) -> Result<()> {
    let n = a.nrows().max(p.ncols());
    if n > ORACLE_CAP {
        return Err(Error::OracleCap(format!(
            "verification needs the dense reference, which is limited to {ORACLE_CAP} rows; this problem has {n}"
        )));
    }
    Ok(())
}

/// Runs the configured protocol on prebuilt matrices.
pub fn run_on(cfg: &BenchConfig, a: &DistMatrix<f64>, p: &DistMatrix<f64>) -> Result<BenchOutcome> {
    cfg.validate()?;
    if a.np() != cfg.ranks || p.np() != cfg.ranks {
        return Err(Error::Partition(format!(
            "matrices are spread over {} ranks, the run asks for {}",
            a.np(),
            cfg.ranks
        )));
    }
    if cfg.verify {
        check_oracle_size(a, p)?;
    }
    let harness = Harness::new(cfg.ranks).with_scheduler(cfg.scheduler);
    let run = harness.run(|ctx| {
        let r = ctx.rank();
        let (al, pl) = (a.local(r), p.local(r));
        match cfg.cache {
            CachePolicy::CacheIntermediate => {
                let mut plan = TripleProductPlan::symbolic(ctx, al, pl, cfg.algorithm)?;
                for _ in 0..cfg.repeats {
                    plan.numeric(ctx, al, pl)?;
                }
                Ok(RankRun {
                    ledger: plan.ledger().clone(),
                    stats: *plan.stats(),
                    c: plan.into_output(),
                })
            }
            CachePolicy::FreeAfterSolve => {
                let mut ledger = MemoryLedger::new();
                let mut stats = PlanStats::default();
                let mut c = None;
                for _ in 0..cfg.repeats {
                    let mut plan = TripleProductPlan::symbolic(ctx, al, pl, cfg.algorithm)?;
                    plan.numeric(ctx, al, pl)?;
                    plan.release();
                    ledger.absorb(plan.ledger());
                    let s = plan.stats();
                    stats.symbolic_passes += s.symbolic_passes;
                    stats.numeric_passes += s.numeric_passes;
                    stats.symbolic_row_kernels += s.symbolic_row_kernels;
                    stats.numeric_row_kernels += s.numeric_row_kernels;
                    c = Some(plan.into_output());
                }
                Ok(RankRun {
                    c: c.expect("repeats >= 1"),
                    ledger,
                    stats,
                })
            }
        }
    })?;

    let ledgers: Vec<MemoryLedger> = run.results.iter().map(|r| r.ledger.clone()).collect();
    let mut stats = PlanStats::default();
    for r in &run.results {
        stats.symbolic_passes += r.stats.symbolic_passes;
        stats.numeric_passes += r.stats.numeric_passes;
        stats.symbolic_row_kernels += r.stats.symbolic_row_kernels;
        stats.numeric_row_kernels += r.stats.numeric_row_kernels;
    }
    let c = DistMatrix::from_locals(run.results.into_iter().map(|r| r.c).collect())?.assemble();
    let verification = if cfg.verify {
        Some(verify_ptap(&c, &a.assemble(), &p.assemble(), cfg.tolerance)?)
    } else {
        None
    };
    let (timing_rank, timer) = slowest(&run.timers);
    let (max, mem_avg) = report::mem_row(&ledgers);
    let row = ReportRow {
        np: cfg.ranks,
        algorithm: cfg.algorithm,
        mem_input: max[0],
        mem_output: max[1],
        mem_aux: max[2],
        mem_transient_peak: max[3],
        mem_plan: max[4],
        time_sym_s: timer.secs(Phase::Symbolic),
        time_num_s: timer.secs(Phase::Numeric),
        time_total_s: timer.secs(Phase::Total),
        repeats: cfg.repeats,
        verified: VerifyStatus::of(verification.as_ref()),
    };
    Ok(BenchOutcome {
        report: RunReport {
            row,
            problem: cfg.problem.to_string(),
            cache: cfg.cache,
            scheduler: cfg.scheduler,
            mem_avg,
            timing_rank,
            messages: MessageSummary::of(&run.trace),
            stats,
            verification,
        },
        c,
        trace: run.trace,
    })
}

fn slowest(timers: &[PhaseTimer]) -> (usize, PhaseTimer) {
    timers
        .iter()
        .copied()
        .enumerate()
        .max_by_key(|(_, t)| t.get(Phase::Total))
        .unwrap_or_default()
}

/// Builds the configured problem and runs it.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let (a, p) = cfg.problem.build(cfg.ranks)?;
    run_on(cfg, &a, &p)
}

/// The same problem under every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<RunReport>,
    /// Triple-product memory of the two-step method over all-at-once.
    pub memory_ratio: f64,
    /// Worst pairwise agreement of the outputs with the two-step result.
    pub agreement: Verification,
}

impl Comparison {
    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `|P|^T |A| |P|` through the distributed product itself, for problems
/// too large for the dense reference.
pub fn sparse_magnitude_scale(
    a: &DistMatrix<f64>,
    p: &DistMatrix<f64>,
    scheduler: Scheduler,
) -> Result<CsrMatrix<f64>> {
    let harness = Harness::new(a.np()).with_scheduler(scheduler);
    let out = ptap(
        &harness,
        &a.map_values(f64::abs),
        &p.map_values(f64::abs),
        Algorithm::MergedAllAtOnce,
        CachePolicy::FreeAfterSolve,
    )?;
    Ok(out.c.assemble())
}

/// Runs all three algorithms on identical inputs and compares the outputs
/// entry by entry.
pub fn compare_algorithms(cfg: &BenchConfig) -> Result<Comparison> {
    cfg.validate()?;
    let (a, p) = cfg.problem.build(cfg.ranks)?;
    let mut outcomes = Vec::new();
    for alg in Algorithm::ALL {
        let c = BenchConfig {
            algorithm: alg,
            ..cfg.clone()
        };
        outcomes.push(run_on(&c, &a, &p)?);
    }
    let scale = sparse_magnitude_scale(&a, &p, cfg.scheduler)?;
    let mut agreement = compare_sparse(&outcomes[0].c, &outcomes[0].c, &scale, cfg.tolerance)?;
    for o in &outcomes[1..] {
        let v = compare_sparse(&outcomes[0].c, &o.c, &scale, cfg.tolerance)?;
        if (agreement.passed() && !v.passed()) || v.max_scaled_error > agreement.max_scaled_error {
            agreement = v;
        }
    }
    let mem = |alg: Algorithm| {
        outcomes
            .iter()
            .find(|o| o.report.row.algorithm == alg)
            .map_or(0, |o| o.report.row.triple_product_memory())
    };
    let memory_ratio = mem(Algorithm::TwoStep) as f64 / mem(Algorithm::AllAtOnce).max(1) as f64;
    Ok(Comparison {
        reports: outcomes.into_iter().map(|o| o.report).collect(),
        memory_ratio,
        agreement,
    })
}
