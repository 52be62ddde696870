//! Sequential sparse storage and hash-based row accumulators.

mod csr;
mod hash;

pub use csr::{CsrMatrix, Triplet};
pub use hash::{DrainSorted, RowAccumulator, RowSet};
