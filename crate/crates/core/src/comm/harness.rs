//! In-process rank harness.
//!
//! Every rank runs on its own OS thread. Under [`Scheduler::Sequential`] a
//! single baton decides which rank may execute; a rank hands it on only when
//! it blocks or finishes, and the next holder is the lowest rank after it
//! (cyclically) that can make progress. That makes message traces
//! reproducible. Under [`Scheduler::Concurrent`] all ranks run freely.
//!
//! In both modes a state where every unfinished rank waits on something no
//! one can provide is reported as [`CommError::Deadlock`].

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::error::{BlockedRank, CommError, Error, Result};
use crate::metrics::PhaseTimer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    #[default]
    Sequential,
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Request,
    Reply,
    Contribution,
}

impl std::fmt::Display for MessageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MessageKind::Request => "request",
            MessageKind::Reply => "reply",
            MessageKind::Contribution => "contribution",
        })
    }
}

/// One point-to-point message as seen by the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub sender: usize,
    pub receiver: usize,
    pub bytes: usize,
    pub kind: MessageKind,
    /// Index of the sender's collective operation that produced the message.
    #[serde(skip)]
    pub round: u32,
}

#[derive(Debug)]
struct Envelope {
    kind: MessageKind,
    payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wait {
    Recv(usize),
    Collective(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ready,
    Running,
    Blocked(Wait),
    Done,
}

#[derive(Debug)]
struct CollectiveRound {
    deposits: Vec<Option<Vec<usize>>>,
    arrived: usize,
    results: Option<Vec<Vec<usize>>>,
    taken: usize,
}

#[derive(Debug)]
struct State {
    queues: Vec<VecDeque<Envelope>>,
    status: Vec<Status>,
    baton: usize,
    step: u64,
    trace: Vec<TraceRecord>,
    rounds: BTreeMap<u64, CollectiveRound>,
    collectives: u64,
    deadlock: Option<Vec<BlockedRank>>,
}

struct Shared {
    np: usize,
    scheduler: Scheduler,
    state: Mutex<State>,
    cv: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        // A rank that panicked while holding the lock leaves consistent
        // state behind: every mutation completes before unlocking.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn satisfied(&self, st: &State, rank: usize, wait: Wait) -> bool {
        match wait {
            Wait::Recv(from) => !st.queues[from * self.np + rank].is_empty(),
            Wait::Collective(epoch) => st.rounds.get(&epoch).is_some_and(|r| r.results.is_some()),
        }
    }

    fn can_progress(&self, st: &State, r: usize) -> bool {
        match st.status[r] {
            Status::Ready | Status::Running => true,
            Status::Blocked(w) => self.satisfied(st, r, w),
            Status::Done => false,
        }
    }

    fn blocked_list(&self, st: &State) -> Vec<BlockedRank> {
        (0..self.np)
            .filter_map(|r| match st.status[r] {
                Status::Blocked(Wait::Recv(p)) => Some(BlockedRank {
                    rank: r,
                    awaiting: Some(p),
                }),
                Status::Blocked(Wait::Collective(_)) => Some(BlockedRank {
                    rank: r,
                    awaiting: None,
                }),
                _ => None,
            })
            .collect()
    }

    /// Declares a deadlock if no unfinished rank can move.
    fn check_deadlock(&self, st: &mut State) {
        if st.deadlock.is_some() {
            return;
        }
        let any_blocked = st.status.iter().any(|s| matches!(s, Status::Blocked(_)));
        if any_blocked && !(0..self.np).any(|r| self.can_progress(st, r)) {
            st.deadlock = Some(self.blocked_list(st));
        }
    }

    /// Sequential mode: pass the baton on from `from`.
    fn hand_off(&self, st: &mut State, from: usize) {
        for off in 1..=self.np {
            let r = (from + off) % self.np;
            if self.can_progress(st, r) {
                st.baton = r;
                return;
            }
        }
        self.check_deadlock(st);
    }

    fn block_on<'g>(
        &'g self,
        mut st: MutexGuard<'g, State>,
        rank: usize,
        wait: Wait,
    ) -> Result<MutexGuard<'g, State>, CommError> {
        loop {
            if let Some(blocked) = &st.deadlock {
                return Err(CommError::Deadlock {
                    blocked: blocked.clone(),
                });
            }
            if self.satisfied(&st, rank, wait) {
                st.status[rank] = Status::Running;
                return Ok(st);
            }
            st.status[rank] = Status::Blocked(wait);
            match self.scheduler {
                Scheduler::Concurrent => {
                    self.check_deadlock(&mut st);
                    if st.deadlock.is_some() {
                        self.cv.notify_all();
                        continue;
                    }
                    st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                }
                Scheduler::Sequential => {
                    self.hand_off(&mut st, rank);
                    self.cv.notify_all();
                    while st.baton != rank && st.deadlock.is_none() {
                        st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                    }
                }
            }
        }
    }

    fn start(&self, rank: usize) {
        if self.scheduler == Scheduler::Sequential {
            let mut st = self.lock();
            while st.baton != rank && st.deadlock.is_none() {
                st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
            }
            st.status[rank] = Status::Running;
        } else {
            self.lock().status[rank] = Status::Running;
        }
    }

    fn finish(&self, rank: usize) {
        let mut st = self.lock();
        st.status[rank] = Status::Done;
        match self.scheduler {
            Scheduler::Sequential => {
                if st.baton == rank {
                    self.hand_off(&mut st, rank);
                }
            }
            Scheduler::Concurrent => self.check_deadlock(&mut st),
        }
        self.cv.notify_all();
    }
}

/// A rank's handle on the harness: identity, mailboxes and collectives.
pub struct RankContext<'a> {
    rank: usize,
    shared: &'a Shared,
    round: u32,
    epoch: u64,
    timer: PhaseTimer,
}

impl RankContext<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn np(&self) -> usize {
        self.shared.np
    }

    /// Time spent in gathers and exchanges, accumulated by the comm layer.
    pub fn timer(&self) -> &PhaseTimer {
        &self.timer
    }

    pub fn timer_mut(&mut self) -> &mut PhaseTimer {
        &mut self.timer
    }

    /// Marks the start of a collective operation; messages are tagged with
    /// the resulting round number.
    pub fn begin_round(&mut self) -> u32 {
        self.round += 1;
        self.round
    }

    pub fn current_round(&self) -> u32 {
        self.round
    }

    fn check_peer(&self, peer: usize) -> Result<(), CommError> {
        if peer >= self.shared.np {
            return Err(CommError::BadPeer {
                rank: self.rank,
                peer,
            });
        }
        Ok(())
    }

    /// Queues a message; never blocks.
    pub fn send(&mut self, to: usize, kind: MessageKind, payload: Vec<u8>) -> Result<(), CommError> {
        self.check_peer(to)?;
        let np = self.shared.np;
        let mut st = self.shared.lock();
        st.step += 1;
        let record = TraceRecord {
            step: st.step,
            sender: self.rank,
            receiver: to,
            bytes: payload.len(),
            kind,
            round: self.round,
        };
        st.trace.push(record);
        st.queues[self.rank * np + to].push_back(Envelope { kind, payload });
        if self.shared.scheduler == Scheduler::Concurrent {
            self.shared.cv.notify_all();
        }
        Ok(())
    }

    /// Blocks until the next message from `from` arrives; it must be of
    /// `kind`.
    pub fn recv(&mut self, from: usize, kind: MessageKind) -> Result<Vec<u8>, CommError> {
        self.check_peer(from)?;
        let np = self.shared.np;
        let st = self.shared.lock();
        let mut st = self.shared.block_on(st, self.rank, Wait::Recv(from))?;
        let env = st.queues[from * np + self.rank]
            .pop_front()
            .expect("block_on guarantees a message");
        if env.kind != kind {
            return Err(CommError::UnexpectedMessage {
                rank: self.rank,
                from,
                expected: kind.to_string(),
                got: env.kind.to_string(),
            });
        }
        Ok(env.payload)
    }

    /// Collective: every rank names the ranks it will send to and learns,
    /// in ascending order, the ranks that will send to it. Carries no
    /// point-to-point messages.
    pub fn discover_sources(&mut self, destinations: &[usize]) -> Result<Vec<usize>, CommError> {
        for &d in destinations {
            self.check_peer(d)?;
        }
        let np = self.shared.np;
        let epoch = self.epoch;
        self.epoch += 1;
        let mut st = self.shared.lock();
        {
            let round = st.rounds.entry(epoch).or_insert_with(|| CollectiveRound {
                deposits: vec![None; np],
                arrived: 0,
                results: None,
                taken: 0,
            });
            round.deposits[self.rank] = Some(destinations.to_vec());
            round.arrived += 1;
            if round.arrived == np {
                let mut results = vec![Vec::new(); np];
                for (src, dests) in round.deposits.iter().enumerate() {
                    for &d in dests.as_deref().unwrap_or(&[]) {
                        if results[d].last() != Some(&src) {
                            results[d].push(src);
                        }
                    }
                }
                round.results = Some(results);
            }
        }
        if st.rounds[&epoch].results.is_some() {
            st.collectives += 1;
            self.shared.cv.notify_all();
        }
        let mut st = self.shared.block_on(st, self.rank, Wait::Collective(epoch))?;
        let round = st.rounds.get_mut(&epoch).expect("round exists until all take");
        let mine = std::mem::take(&mut round.results.as_mut().expect("satisfied")[self.rank]);
        round.taken += 1;
        if round.taken == np {
            st.rounds.remove(&epoch);
        }
        Ok(mine)
    }

    pub fn barrier(&mut self) -> Result<(), CommError> {
        self.discover_sources(&[]).map(|_| ())
    }
}

/// Result of running a program on every rank.
#[derive(Debug)]
pub struct HarnessRun<T> {
    pub results: Vec<T>,
    pub timers: Vec<PhaseTimer>,
    pub trace: Vec<TraceRecord>,
    /// Completed collective (source-discovery or barrier) operations.
    pub collectives: u64,
}

/// Runs rank programs over `np` in-process ranks.
#[derive(Debug, Clone, Copy)]
pub struct Harness {
    np: usize,
    scheduler: Scheduler,
}

impl Harness {
    pub fn new(np: usize) -> Self {
        Self {
            np,
            scheduler: Scheduler::Sequential,
        }
    }

    pub fn with_scheduler(mut self, scheduler: Scheduler) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn scheduler(&self) -> Scheduler {
        self.scheduler
    }

    /// Runs `program` once per rank. A rank error other than a deadlock
    /// takes precedence over the deadlock it causes in its peers.
    pub fn run<T, F>(&self, program: F) -> Result<HarnessRun<T>>
    where
        T: Send,
        F: Fn(&mut RankContext<'_>) -> Result<T> + Sync,
    {
        if self.np == 0 {
            return Err(CommError::NoRanks.into());
        }
        let np = self.np;
        let shared = Shared {
            np,
            scheduler: self.scheduler,
            state: Mutex::new(State {
                queues: (0..np * np).map(|_| VecDeque::new()).collect(),
                status: vec![Status::Ready; np],
                baton: 0,
                step: 0,
                trace: Vec::new(),
                rounds: BTreeMap::new(),
                collectives: 0,
                deadlock: None,
            }),
            cv: Condvar::new(),
        };

        let outcomes: Vec<(Result<T>, PhaseTimer)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..np)
                .map(|rank| {
                    let shared = &shared;
                    let program = &program;
                    scope.spawn(move || {
                        shared.start(rank);
                        let mut ctx = RankContext {
                            rank,
                            shared,
                            round: 0,
                            epoch: 0,
                            timer: PhaseTimer::new(),
                        };
                        let res = catch_unwind(AssertUnwindSafe(|| program(&mut ctx)))
                            .unwrap_or_else(|_| Err(CommError::RankPanicked(rank).into()));
                        shared.finish(rank);
                        (res, ctx.timer)
                    })
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(rank, h)| {
                    h.join()
                        .unwrap_or_else(|_| (Err(CommError::RankPanicked(rank).into()), PhaseTimer::new()))
                })
                .collect()
        });

        let mut results = Vec::with_capacity(np);
        let mut timers = Vec::with_capacity(np);
        let mut deadlock = None;
        let mut first_error = None;
        for (res, timer) in outcomes {
            match res {
                Ok(v) => results.push(v),
                Err(Error::Comm(e @ CommError::Deadlock { .. })) => {
                    deadlock.get_or_insert(e);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
            timers.push(timer);
        }
        if let Some(e) = first_error {
            return Err(e);
        }
        if let Some(e) = deadlock {
            return Err(e.into());
        }
        let st = shared.state.into_inner().unwrap_or_else(|e| e.into_inner());
        Ok(HarnessRun {
            results,
            timers,
            trace: st.trace,
            collectives: st.collectives,
        })
    }
}

/// Runs `program` on `np` ranks under the sequential scheduler and returns
/// the per-rank results in rank order.
pub fn spawn_ranks<T, F>(np: usize, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RankContext<'_>) -> Result<T> + Sync,
{
    Harness::new(np).run(program).map(|r| r.results)
}

/// Newline-delimited JSON, one record per message.
pub fn write_trace<W: std::io::Write>(trace: &[TraceRecord], mut w: W) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
