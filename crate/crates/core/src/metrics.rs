//! Byte accounting by storage category and per-phase wall time.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemCategory {
    /// The operator and interpolation a rank owns.
    InputMatrices,
    /// The coarse operator being produced.
    OutputMatrix,
    /// Stored intermediate matrices: `A*P`, an explicit transpose of `P`,
    /// and stored send-side product rows.
    AuxiliaryMatrices,
    /// Hash sets and accumulators used while forming rows.
    TransientHash,
    /// Everything else a cached plan keeps between numeric passes: gathered
    /// remote rows, send staging buffers and communication patterns.
    PlanCache,
}

impl MemCategory {
    pub const ALL: [MemCategory; 5] = [
        MemCategory::InputMatrices,
        MemCategory::OutputMatrix,
        MemCategory::AuxiliaryMatrices,
        MemCategory::TransientHash,
        MemCategory::PlanCache,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Current and peak bytes per category for one rank.
///
/// Containers report their own heap usage; the owner of the containers
/// calls [`MemoryLedger::set`] at checkpoints where usage changes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLedger {
    current: [usize; 5],
    peak: [usize; 5],
    total_peak: usize,
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `cat` now holds exactly `bytes`.
    pub fn set(&mut self, cat: MemCategory, bytes: usize) {
        let i = cat.index();
        self.current[i] = bytes;
        self.peak[i] = self.peak[i].max(bytes);
        self.total_peak = self.total_peak.max(self.total_current());
    }

    pub fn alloc(&mut self, cat: MemCategory, bytes: usize) {
        let now = self.current[cat.index()] + bytes;
        self.set(cat, now);
    }

    /// Releases `bytes`; releasing more than is held is clamped at zero.
    pub fn free(&mut self, cat: MemCategory, bytes: usize) {
        let i = cat.index();
        debug_assert!(bytes <= self.current[i], "freeing more than held in {cat:?}");
        self.current[i] = self.current[i].saturating_sub(bytes);
    }

    pub fn current(&self, cat: MemCategory) -> usize {
        self.current[cat.index()]
    }

    pub fn peak(&self, cat: MemCategory) -> usize {
        self.peak[cat.index()]
    }

    pub fn total_current(&self) -> usize {
        self.current.iter().sum()
    }

    /// Highest simultaneous total across all categories.
    pub fn total_peak(&self) -> usize {
        self.total_peak
    }

    /// Combines ledgers of successive runs on one rank: peaks take the max.
    pub fn absorb(&mut self, other: &MemoryLedger) {
        for i in 0..5 {
            self.current[i] = other.current[i];
            self.peak[i] = self.peak[i].max(other.peak[i]);
        }
        self.total_peak = self.total_peak.max(other.total_peak);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Symbolic,
    Numeric,
    Gather,
    Exchange,
    Total,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Symbolic,
        Phase::Numeric,
        Phase::Gather,
        Phase::Exchange,
        Phase::Total,
    ];
}

/// Accumulated wall time per phase. Gather and exchange time is nested
/// inside symbolic or numeric time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimer {
    durations: [Duration; 5],
}

impl PhaseTimer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, phase: Phase, d: Duration) {
        self.durations[phase as usize] += d;
    }

    pub fn time<R>(&mut self, phase: Phase, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.add(phase, start.elapsed());
        out
    }

    pub fn get(&self, phase: Phase) -> Duration {
        self.durations[phase as usize]
    }

    pub fn secs(&self, phase: Phase) -> f64 {
        self.get(phase).as_secs_f64()
    }

    pub fn merge(&mut self, other: &PhaseTimer) {
        for p in Phase::ALL {
            self.add(p, other.get(p));
        }
    }

    /// Per-phase maximum, the wall time of a collective run.
    pub fn max_with(&mut self, other: &PhaseTimer) {
        for p in Phase::ALL {
            let i = p as usize;
            self.durations[i] = self.durations[i].max(other.durations[i]);
        }
    }
}
