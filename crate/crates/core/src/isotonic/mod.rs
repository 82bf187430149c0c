//! Isotonic estimators: PAVA on the line and block estimators in general
//! dimension.

pub mod block;
pub mod pava;
pub mod series;

pub use block::{
    block_fit, block_max_min, block_min_max, fit_at_design_points, BlockEstimator, BlockFit, DesignFits, MaxMin,
    MinMax,
};
pub use pava::{pava, pava_blocks, pava_decreasing, pava_unit, PavaBlock};
pub use series::{weighted_isotonic_max_min, WeightedSeries, WindowFit};
