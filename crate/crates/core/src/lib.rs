//! Nonstationary modelling of k-successive Fréchet-type extremes.
//!
//! The crate fits nonstationary GEV models to block maxima of a series and of
//! its moving minima, estimates extremal indices under moving thresholds,
//! learns the scaling function `g_T(k)` that links window-`k` parameters to
//! the single-extreme ones, and uses it to infer distributions and return
//! levels for windows too long to fit directly.

pub mod error;
pub mod extremal;
pub mod gev;
pub mod gof;
pub mod inference;
pub mod optim;
pub mod scaling;
pub mod series;
pub mod sim;
pub mod workflow;

pub use error::{Error, Result, Step};
pub use series::{
    autocorrelation, block_maxima, drop_zeros, moving_minimum, moving_quantile, BlockMaxSeries,
    TimeSeries,
};
