//! Distributed sparse Galerkin triple products `C = P^T A P`.
//!
//! Matrices are split by contiguous blocks of rows over a set of ranks;
//! each rank stores its rows as a diagonal block (owned columns) and an
//! off-diagonal block (compact columns plus a map to global ids). Ranks
//! run as threads of a [`comm::Harness`] and talk only through
//! point-to-point messages.
//!
//! ```
//! use ptap_core::comm::Harness;
//! use ptap_core::problems::{model_problem, GridSpec};
//! use ptap_core::triple::{ptap, Algorithm, CachePolicy};
//!
//! let grid = GridSpec::cube(3).unwrap();
//! let (a, p) = model_problem::<f64>(&grid, 2).unwrap();
//! let out = ptap(&Harness::new(2), &a, &p, Algorithm::MergedAllAtOnce, CachePolicy::FreeAfterSolve).unwrap();
//! assert_eq!(out.c.nrows(), 27);
//! ```

pub mod bench;
pub mod comm;
pub mod error;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod problems;
pub mod scalar;
pub mod sparse;
pub mod spgemm;
pub mod triple;
pub mod verify;

pub use error::{CommError, Error, Result};
pub use partition::{DistMatrix, LocalMatrix, RowPartition};
pub use scalar::Scalar;
pub use sparse::{CsrMatrix, Triplet};
pub use triple::{ptap, Algorithm, CachePolicy, TripleProductPlan};

pub type CsrF64 = CsrMatrix<f64>;
pub type CsrF32 = CsrMatrix<f32>;
pub type CsrRational = CsrMatrix<num_rational::Rational64>;
pub type LocalMatrixF64 = LocalMatrix<f64>;
pub type DistMatrixF64 = DistMatrix<f64>;
pub type DistMatrixRational = DistMatrix<num_rational::Rational64>;
pub type PlanF64 = TripleProductPlan<f64>;
