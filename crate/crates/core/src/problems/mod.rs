//! Inputs for the triple product: the structured-grid model problem,
//! seeded random instances, and a dense reference product.

mod grid;
mod oracle;
mod random;

pub use grid::{build_interpolation, build_model_operator, grid_dims, model_problem, GridSpec};
pub use oracle::{oracle_ptap, OracleMatrix, ORACLE_CAP};
pub use random::{random_global, random_instance};
