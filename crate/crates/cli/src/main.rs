//! `ptap-bench`: runs and compares the distributed triple-product
//! algorithms on generated or loaded matrices.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ptap_core::bench::{
    compare_algorithms, run_benchmark, write_csv, write_report, write_table, BenchConfig, ProblemSpec,
    ReportFormat, RunReport, DEFAULT_REPEATS,
};
use ptap_core::comm::{write_trace, Scheduler};
use ptap_core::problems::GridSpec;
use ptap_core::triple::{Algorithm, CachePolicy};

#[derive(Parser)]
#[command(name = "ptap-bench", version, about = "Distributed sparse triple-product benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm.
    Run {
        #[arg(long, value_enum)]
        algorithm: AlgArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run all three algorithms on the same input and report the memory ratio.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Coarse grid NX,NY,NZ of the model problem.
    #[arg(long, group = "input")]
    grid: Option<String>,
    /// Random instance n,m,density,seed.
    #[arg(long, group = "input")]
    random: Option<String>,
    /// Operator in Matrix Market format (needs --load-p).
    #[arg(long, group = "input", requires = "load_p")]
    load_a: Option<PathBuf>,
    /// Interpolation in Matrix Market format.
    #[arg(long, requires = "load_a")]
    load_p: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    ranks: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, value_enum, default_value_t = CacheArg::Keep)]
    cache: CacheArg,
    /// Check the result against the dense reference product.
    #[arg(long)]
    verify: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = SchedArg::Sequential)]
    scheduler: SchedArg,
    /// Write every message as one JSON line.
    #[arg(long)]
    trace_messages: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    #[value(name = "two-step")]
    TwoStep,
    #[value(name = "allatonce")]
    AllAtOnce,
    Merged,
}

#[derive(Clone, Copy, ValueEnum)]
enum CacheArg {
    Free,
    Keep,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedArg {
    Sequential,
    Concurrent,
}

impl Common {
    fn problem(&self) -> Result<ProblemSpec> {
        if let Some(g) = &self.grid {
            return Ok(ProblemSpec::Grid(g.parse::<GridSpec>()?));
        }
        if let Some(r) = &self.random {
            return Ok(ProblemSpec::parse_random(r)?);
        }
        match (&self.load_a, &self.load_p) {
            (Some(a), Some(p)) => Ok(ProblemSpec::Files {
                a: a.clone(),
                p: p.clone(),
            }),
            _ => bail!("one of --grid, --random or --load-a/--load-p is required"),
        }
    }

    fn config(&self, algorithm: Algorithm) -> Result<BenchConfig> {
        let mut cfg = BenchConfig::new(algorithm, self.problem()?, self.ranks);
        cfg.repeats = self.repeats;
        cfg.cache = match self.cache {
            CacheArg::Free => CachePolicy::FreeAfterSolve,
            CacheArg::Keep => CachePolicy::CacheIntermediate,
        };
        cfg.verify = self.verify;
        cfg.scheduler = match self.scheduler {
            SchedArg::Sequential => Scheduler::Sequential,
            SchedArg::Concurrent => Scheduler::Concurrent,
        };
        Ok(cfg)
    }

    fn format(&self) -> ReportFormat {
        match self.format {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Table => ReportFormat::Table,
        }
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.report {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn algorithm(a: AlgArg) -> Algorithm {
    match a {
        AlgArg::TwoStep => Algorithm::TwoStep,
        AlgArg::AllAtOnce => Algorithm::AllAtOnce,
        AlgArg::Merged => Algorithm::MergedAllAtOnce,
    }
}

fn mismatched(reports: &[RunReport]) -> bool {
    reports
        .iter()
        .any(|r| r.verification.is_some_and(|v| !v.passed()))
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { algorithm: alg, common } => {
            let cfg = common.config(algorithm(alg))?;
            let out = run_benchmark(&cfg)?;
            if let Some(path) = &common.trace_messages {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_trace(&out.trace, BufWriter::new(f))?;
            }
            let reports = [out.report];
            let mut sink = common.sink()?;
            write_report(&reports, common.format(), &mut sink)?;
            sink.flush()?;
            Ok(!mismatched(&reports))
        }
        Command::Compare { common } => {
            if common.trace_messages.is_some() {
                bail!("--trace-messages applies to `run` only");
            }
            let cfg = common.config(Algorithm::TwoStep)?;
            let cmp = compare_algorithms(&cfg)?;
            let mut sink = common.sink()?;
            match common.format() {
                ReportFormat::Csv => write_csv(&cmp.reports, &mut sink)?,
                ReportFormat::Json => cmp.write_json(&mut sink)?,
                ReportFormat::Table => {
                    write_table(&cmp.reports, &mut sink)?;
                    writeln!(sink, "memory ratio two-step/allatonce: {:.3}", cmp.memory_ratio)?;
                    writeln!(sink, "cross-algorithm agreement: {}", cmp.agreement)?;
                }
            }
            sink.flush()?;
            Ok(cmp.agreement.passed() && !mismatched(&cmp.reports))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification mismatch");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
