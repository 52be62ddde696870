//! Rank harness and the two communication patterns the algorithms use.

mod exchange;
mod gather;
mod harness;
pub(crate) mod wire;

pub use exchange::{exchange_contributions, start_exchange, BatchRow, ContributionBatch, PendingExchange};
pub(crate) use exchange::{start_cached_exchange, start_discovering_exchange};
pub use gather::{gather_remote_rows_symbolic, update_remote_rows_numeric, RemoteRows};
pub use harness::{spawn_ranks, write_trace, Harness, HarnessRun, MessageKind, RankContext, Scheduler, TraceRecord};
