//! GEV distribution mathematics and nonstationary maximum-likelihood fitting.

pub mod dist;
pub mod fit;
pub mod lrt;
pub mod params;
pub mod pwm;

pub use dist::{gev_cdf, gev_quantile, standard_gumbel_cdf, standard_gumbel_quantile};
pub use fit::{fit_mle, fit_mle_with, gumbel_normalize, FitOptions, FitResult};
pub use lrt::{likelihood_ratio, likelihood_ratio_test, LikelihoodRatio};
pub use params::{evaluate_params, GevModel, ParamForm, ParamModel};
