//! Fractal domains: the Koch snowflake, Whitney decompositions and
//! box-counting dimension estimates.

pub mod boxcount;
pub mod koch;
pub mod whitney;

pub use boxcount::{boundary_cells, box_counting, BoxCount};
pub use koch::{koch_dimension, koch_indicator, koch_ledger, snowflake_grid, TriangleLedger};
pub use whitney::{whitney, WhitneyDecomposition};
