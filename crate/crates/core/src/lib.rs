//! Dyadic-grid computations for fractional variation, fractal domains,
//! degree fields of Hölder maps, pushforwards and Young integrals.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod decomp;
pub mod degree;
pub mod error;
pub mod fractal;
pub mod grid;
pub mod holder;
pub mod io;
pub mod maps;
pub mod numeric;
pub mod pushforward;
pub mod simplex;
pub mod variation;
pub mod young;

pub use error::{Error, Result};
pub use grid::{DyadicGrid, GridFunction};
