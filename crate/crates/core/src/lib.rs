//! Pointwise confidence intervals for isotonic regression on lattices and
//! scattered designs, and for related monotone models.

pub mod ci;
pub mod design;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod isotonic;
pub mod lrt;
pub mod models;
pub mod numeric;
pub mod par;
pub mod sim;
pub mod smooth;
pub mod variance;

pub use design::{Block, BlockSumTable, DesignGrid, DesignMode, Lattice, Sample, Scatter, Side};
pub use error::{Error, Result};
pub use isotonic::{BlockEstimator, BlockFit};
