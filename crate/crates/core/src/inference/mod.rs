//! Return levels, quantiles and grid-based confidence intervals for fitted or
//! inferred GEV models, and the estimation-method comparison harness.

pub mod compare;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gev::{FitResult, GevModel, ParamModel};

/// Level exceeded on average once every `period` blocks, at covariate `t`.
pub fn return_level(model: &GevModel, period: f64, t: f64) -> Result<f64> {
    if !(period > 1.0) {
        return Err(Error::InvalidPeriod(period));
    }
    model.quantile(1.0 - 1.0 / period, t)
}

/// Block midpoints covering `[t_start, t_end)` at `blocks_per_unit` blocks per
/// covariate unit.
pub fn horizon_blocks(t_start: f64, t_end: f64, blocks_per_unit: f64) -> Result<Vec<f64>> {
    if !(t_end > t_start) {
        return Err(Error::InvalidHorizon(format!(
            "end {t_end} must be after start {t_start}"
        )));
    }
    if !(blocks_per_unit > 0.0 && blocks_per_unit.is_finite()) {
        return Err(Error::InvalidHorizon(format!(
            "blocks per unit must be positive, got {blocks_per_unit}"
        )));
    }
    let n = ((t_end - t_start) * blocks_per_unit + 1e-9).floor() as usize;
    if n < 2 {
        return Err(Error::InvalidHorizon(format!(
            "horizon spans {n} block(s); at least 2 are needed"
        )));
    }
    Ok((0..n)
        .map(|i| t_start + (i as f64 + 0.5) / blocks_per_unit)
        .collect())
}

/// Level with one expected exceedance over the horizon: the `z` solving
/// `sum_b [1 - G(z; mu(t_b), sigma(t_b), xi)] = 1` over block midpoints `t_b`.
pub fn horizon_return_level(
    model: &GevModel,
    t_start: f64,
    t_end: f64,
    blocks_per_unit: f64,
) -> Result<f64> {
    let blocks = horizon_blocks(t_start, t_end, blocks_per_unit)?;
    level_over_blocks(model, &blocks)
}

pub(crate) fn level_over_blocks(model: &GevModel, blocks: &[f64]) -> Result<f64> {
    let n = blocks.len();
    let params: Vec<(f64, f64, f64)> = blocks
        .iter()
        .map(|&t| model.evaluate_params(t))
        .collect::<Result<_>>()?;
    let p = 1.0 - 1.0 / n as f64;
    let q = |&(mu, sigma, xi): &(f64, f64, f64)| crate::gev::dist::quantile_unchecked(p, xi, mu, sigma);
    // every term is at least 1/n at the smallest per-block quantile and at
    // most 1/n at the largest
    let mut lo = params.iter().map(q).fold(f64::INFINITY, f64::min);
    let mut hi = params.iter().map(q).fold(f64::NEG_INFINITY, f64::max);
    let excess = |z: f64| {
        params
            .iter()
            .map(|&(mu, sigma, xi)| crate::gev::dist::survival_unchecked(z, xi, mu, sigma))
            .sum::<f64>()
            - 1.0
    };
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quantiles at covariate `t` for increasing probabilities.
pub fn quantile_table(model: &GevModel, t: f64, probs: &[f64]) -> Result<Vec<f64>> {
    for &p in probs {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
    }
    if probs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSeries("probabilities must be strictly increasing".into()));
    }
    probs.iter().map(|&p| model.quantile(p, t)).collect()
}

/// What a confidence grid evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiTarget {
    Quantile { p: f64, t: f64 },
    ReturnLevel { period: f64, t: f64 },
    HorizonLevel {
        t_start: f64,
        t_end: f64,
        blocks_per_unit: f64,
    },
}

impl CiTarget {
    /// Covariates at which the scale must stay positive.
    fn covariates(&self) -> Result<Vec<f64>> {
        match *self {
            CiTarget::Quantile { t, .. } | CiTarget::ReturnLevel { t, .. } => Ok(vec![t]),
            CiTarget::HorizonLevel {
                t_start,
                t_end,
                blocks_per_unit,
            } => horizon_blocks(t_start, t_end, blocks_per_unit),
        }
    }

    fn evaluate(&self, model: &GevModel, covariates: &[f64]) -> Result<f64> {
        match *self {
            CiTarget::Quantile { p, t } => model.quantile(p, t),
            CiTarget::ReturnLevel { period, t } => return_level(model, period, t),
            CiTarget::HorizonLevel { .. } => level_over_blocks(model, covariates),
        }
    }
}

/// Per-coefficient intervals for a model, in coefficient order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamIntervals {
    pub location: Vec<(f64, f64)>,
    pub scale: Vec<(f64, f64)>,
    pub shape: (f64, f64),
}

impl ParamIntervals {
    /// Zero-width intervals at the model's own coefficients.
    pub fn point(model: &GevModel) -> Self {
        let pt = |m: &ParamModel| m.coefficients().iter().map(|&c| (c, c)).collect();
        Self {
            location: pt(&model.location),
            scale: pt(&model.scale),
            shape: (model.shape, model.shape),
        }
    }

    /// `estimate +- z SE` for every estimated coefficient; a fixed shape gets a
    /// zero-width interval. `None` without standard errors.
    pub fn from_fit(fit: &FitResult, z: f64) -> Option<Self> {
        let se = fit.standard_errors.as_ref()?;
        let m = &fit.model;
        let nl = m.location.form().n_coefficients();
        let ns = m.scale.form().n_coefficients();
        let band = |c: f64, s: f64| (c - z * s, c + z * s);
        let location = m
            .location
            .coefficients()
            .iter()
            .zip(&se[..nl])
            .map(|(&c, &s)| band(c, s))
            .collect();
        let scale = m
            .scale
            .coefficients()
            .iter()
            .zip(&se[nl..nl + ns])
            .map(|(&c, &s)| band(c, s))
            .collect();
        let shape = if m.shape_fixed {
            (m.shape, m.shape)
        } else {
            band(m.shape, se[nl + ns])
        };
        Some(Self {
            location,
            scale,
            shape,
        })
    }

    /// Intervals of the model multiplied through by `factor > 0`, matching
    /// [`ParamModel::scaled`] for a model with the given forms.
    pub fn scaled(&self, template: &GevModel, factor: f64) -> Self {
        let map = |iv: &[(f64, f64)], m: &ParamModel| -> Vec<(f64, f64)> {
            match m {
                ParamModel::Exponential(..) => iv
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| if i == 0 { (a + factor.ln(), b + factor.ln()) } else { (a, b) })
                    .collect(),
                _ => iv.iter().map(|&(a, b)| (a * factor, b * factor)).collect(),
            }
        };
        Self {
            location: map(&self.location, &template.location),
            scale: map(&self.scale, &template.scale),
            shape: self.shape,
        }
    }

    fn axes(&self) -> Vec<(f64, f64)> {
        let mut v = self.location.clone();
        v.extend(&self.scale);
        v.push(self.shape);
        v
    }
}

/// Result of a grid confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInterval {
    pub low: f64,
    pub high: f64,
    /// Target value at the point estimate.
    pub point: f64,
    pub evaluations: usize,
    pub skipped: usize,
}

/// Evaluates `target` at every combination of `samples_per_param` equally
/// spaced values (endpoints included) of each coefficient interval and returns
/// the range, widened if needed to contain the point estimate.
///
/// Combinations whose scale is not positive over the target's covariates are
/// skipped and counted.
pub fn permutation_ci(
    point: &GevModel,
    intervals: &ParamIntervals,
    samples_per_param: usize,
    target: CiTarget,
) -> Result<GridInterval> {
    if samples_per_param < 2 {
        return Err(Error::InvalidSeries(format!(
            "samples per parameter must be at least 2, got {samples_per_param}"
        )));
    }
    let axes = intervals.axes();
    let nl = point.location.form().n_coefficients();
    let ns = point.scale.form().n_coefficients();
    if intervals.location.len() != nl || intervals.scale.len() != ns {
        return Err(Error::InvalidSeries(
            "intervals do not match the model's parameter forms".into(),
        ));
    }
    if axes.iter().any(|(a, b)| !(a.is_finite() && b.is_finite()) || a > b) {
        return Err(Error::InvalidSeries("parameter intervals must be finite and ordered".into()));
    }
    let covariates = target.covariates()?;
    let point_value = target.evaluate(point, &covariates)?;

    let s = samples_per_param;
    let grids: Vec<Vec<f64>> = axes
        .iter()
        .map(|&(a, b)| {
            (0..s)
                .map(|i| if i + 1 == s { b } else { a + (b - a) * i as f64 / (s - 1) as f64 })
                .collect()
        })
        .collect();
    let total = s
        .checked_pow(axes.len() as u32)
        .ok_or_else(|| Error::InvalidSeries("confidence grid too large".into()))?;

    let (low, high, evaluations) = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut c = Vec::with_capacity(axes.len());
            for g in &grids {
                c.push(g[idx % s]);
                idx /= s;
            }
            let model = GevModel {
                shape: c[nl + ns],
                location: ParamModel::from_coefficients(point.location.form(), &c[..nl]),
                scale: ParamModel::from_coefficients(point.scale.form(), &c[nl..nl + ns]),
                shape_fixed: point.shape_fixed,
            };
            if !model.scale_positive_on(&covariates) {
                return None;
            }
            target.evaluate(&model, &covariates).ok().filter(|v| v.is_finite())
        })
        .fold(
            || (f64::INFINITY, f64::NEG_INFINITY, 0usize),
            |(lo, hi, n), v| match v {
                Some(v) => (lo.min(v), hi.max(v), n + 1),
                None => (lo, hi, n),
            },
        )
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY, 0usize),
            |a, b| (a.0.min(b.0), a.1.max(b.1), a.2 + b.2),
        );
    let skipped = total - evaluations;
    if evaluations == 0 {
        return Err(Error::InfeasibleGrid(skipped));
    }
    Ok(GridInterval {
        low: low.min(point_value),
        high: high.max(point_value),
        point: point_value,
        evaluations,
        skipped,
    })
}
