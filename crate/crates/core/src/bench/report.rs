//! Benchmark reports and their CSV, JSON and text-table forms.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::comm::{MessageKind, Scheduler, TraceRecord};
use crate::error::{Error, Result};
use crate::metrics::{MemCategory, MemoryLedger};
use crate::triple::{Algorithm, CachePolicy, PlanStats};
use crate::verify::Verification;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyStatus {
    NotRun,
    Match,
    Mismatch,
}

impl VerifyStatus {
    pub fn of(v: Option<&Verification>) -> Self {
        match v {
            None => VerifyStatus::NotRun,
            Some(v) if v.passed() => VerifyStatus::Match,
            Some(_) => VerifyStatus::Mismatch,
        }
    }
}

impl fmt::Display for VerifyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifyStatus::NotRun => "not-run",
            VerifyStatus::Match => "match",
            VerifyStatus::Mismatch => "mismatch",
        })
    }
}

/// Bytes per ledger category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MemBreakdown {
    pub mem_input: f64,
    pub mem_output: f64,
    pub mem_aux: f64,
    pub mem_transient_peak: f64,
    pub mem_plan: f64,
}

/// One line of a report: the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub np: usize,
    pub algorithm: Algorithm,
    pub mem_input: u64,
    pub mem_output: u64,
    pub mem_aux: u64,
    pub mem_transient_peak: u64,
    pub mem_plan: u64,
    pub time_sym_s: f64,
    pub time_num_s: f64,
    pub time_total_s: f64,
    pub repeats: usize,
    pub verified: VerifyStatus,
}

impl ReportRow {
    /// Bytes attributable to the triple product itself: the output, stored
    /// intermediates and the state kept between numeric passes.
    pub fn triple_product_memory(&self) -> u64 {
        self.mem_output + self.mem_aux + self.mem_plan
    }
}

pub const CSV_COLUMNS: [&str; 12] = [
    "np",
    "algorithm",
    "mem_input",
    "mem_output",
    "mem_aux",
    "mem_transient_peak",
    "mem_plan",
    "time_sym_s",
    "time_num_s",
    "time_total_s",
    "repeats",
    "verified",
];

/// Message counts of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub messages: usize,
    pub bytes: usize,
    pub requests: usize,
    pub replies: usize,
    pub contributions: usize,
}

impl MessageSummary {
    pub fn of(trace: &[TraceRecord]) -> Self {
        let mut s = Self::default();
        for t in trace {
            s.messages += 1;
            s.bytes += t.bytes;
            match t.kind {
                MessageKind::Request => s.requests += 1,
                MessageKind::Reply => s.replies += 1,
                MessageKind::Contribution => s.contributions += 1,
            }
        }
        s
    }
}

/// Everything one benchmark run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub row: ReportRow,
    pub problem: String,
    pub cache: CachePolicy,
    pub scheduler: Scheduler,
    /// Per-category bytes averaged over ranks; the row holds the maximum.
    pub mem_avg: MemBreakdown,
    /// Rank whose phase times the row reports: the one with the longest
    /// total.
    pub timing_rank: usize,
    pub messages: MessageSummary,
    /// Counters summed over ranks.
    pub stats: PlanStats,
    pub verification: Option<Verification>,
}

pub(crate) fn mem_row(ledgers: &[MemoryLedger]) -> ([u64; 5], MemBreakdown) {
    let mut max = [0u64; 5];
    let mut sum = [0f64; 5];
    for l in ledgers {
        for (k, cat) in MemCategory::ALL.into_iter().enumerate() {
            max[k] = max[k].max(l.peak(cat) as u64);
            sum[k] += l.peak(cat) as f64;
        }
    }
    let n = ledgers.len().max(1) as f64;
    let avg = MemBreakdown {
        mem_input: sum[0] / n,
        mem_output: sum[1] / n,
        mem_aux: sum[2] / n,
        mem_transient_peak: sum[3] / n,
        mem_plan: sum[4] / n,
    };
    (max, avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            _ => Err(Error::Config(format!("unknown report format '{s}' (csv, json, table)"))),
        }
    }
}

pub fn write_csv<W: Write>(reports: &[RunReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if reports.is_empty() {
        out.write_record(CSV_COLUMNS)?;
    }
    for r in reports {
        out.serialize(&r.row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Config(format!(
            "unexpected report columns: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rd.deserialize().map(|row| Ok(row?)).collect()
}

pub fn write_json<W: Write>(reports: &[RunReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<Vec<RunReport>> {
    Ok(serde_json::from_reader(r)?)
}

fn mib(bytes: u64) -> String {
    format!("{:.3}", bytes as f64 / (1024.0 * 1024.0))
}

/// Fixed-width table: run columns, then ledger categories in MiB.
pub fn write_table<W: Write>(reports: &[RunReport], mut w: W) -> Result<()> {
    let header = [
        "np", "Algorithm", "Mem", "Time_sym", "Time_num", "Time", "input", "output", "aux", "transient", "plan",
        "verified",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in reports {
        let x = &r.row;
        rows.push(vec![
            x.np.to_string(),
            x.algorithm.to_string(),
            mib(x.triple_product_memory()),
            format!("{:.4}", x.time_sym_s),
            format!("{:.4}", x.time_num_s),
            format!("{:.4}", x.time_total_s),
            mib(x.mem_input),
            mib(x.mem_output),
            mib(x.mem_aux),
            mib(x.mem_transient_peak),
            mib(x.mem_plan),
            r.verification.map_or_else(|| x.verified.to_string(), |v| v.to_string()),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &wd)| format!("{cell:>wd$}"))
            .collect();
        writeln!(w, "{}", cells.join("  "))?;
    }
    writeln!(w, "Mem = output + aux + plan, MiB, max over ranks")?;
    Ok(())
}

pub fn write_report<W: Write>(reports: &[RunReport], format: ReportFormat, w: W) -> Result<()> {
    match format {
        ReportFormat::Csv => write_csv(reports, w),
        ReportFormat::Json => write_json(reports, w),
        ReportFormat::Table => write_table(reports, w),
    }
}
