//! The scaling function `g_T(k)` linking window-`k` GEV parameters to the
//! single-extreme ones:
//!
//! ```text
//! mu_k    = g_T(k) mu_1    (theta_k / theta_1)^xi_1
//! sigma_k = g_T(k) sigma_1 (theta_k / theta_1)^xi_1
//! ```
//!
//! `g_T(k)` is estimated by least squares from location intercepts fitted at
//! small `k` and then used to infer location and scale for larger windows.
//! Candidate families live in a [`FormRegistry`] and are picked by name or by
//! adjusted R².

mod forms;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use forms::{Exponential, FormRegistry, Polynomial, Power, ScalingForm};

use crate::error::{Error, Result, Step};
use crate::gev::{GevModel, ParamForm};

/// Relation between a fitted intercept and the parameter value at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Link {
    /// The intercept is the parameter value (constant and linear forms).
    #[default]
    Identity,
    /// The intercept is the log of the parameter value (exponential forms).
    Log,
}

impl Link {
    pub fn for_form(form: ParamForm) -> Self {
        match form {
            ParamForm::Exponential => Link::Log,
            _ => Link::Identity,
        }
    }

    /// Parameter value at `t = 0` from an intercept.
    pub fn natural(self, intercept: f64) -> f64 {
        match self {
            Link::Identity => intercept,
            Link::Log => intercept.exp(),
        }
    }

    /// Intercept from a parameter value at `t = 0`.
    pub fn intercept(self, natural: f64) -> f64 {
        match self {
            Link::Identity => natural,
            Link::Log => natural.ln(),
        }
    }
}

/// Single-extreme quantities every window is scaled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingBase {
    pub mu0: f64,
    pub sigma0: f64,
    pub theta: f64,
    pub xi: f64,
    pub location_link: Link,
    pub scale_link: Link,
}

impl ScalingBase {
    /// Base taken from a fitted `k = 1` model evaluated at `t = 0`.
    pub fn from_model(model: &GevModel, theta: f64) -> Self {
        Self {
            mu0: model.location.intercept(),
            sigma0: model.scale.intercept(),
            theta,
            xi: model.shape,
            location_link: Link::for_form(model.location.form()),
            scale_link: Link::for_form(model.scale.form()),
        }
    }
}

/// Intercepts and extremal index fitted at one window size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub k: usize,
    pub mu0: f64,
    pub sigma0: f64,
    pub theta: f64,
    /// Standard error of `mu0`, used only by weighted fits.
    pub mu0_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingInputs {
    pub base: ScalingBase,
    pub points: Vec<ScalingPoint>,
}

impl ScalingInputs {
    fn validate(&self) -> Result<()> {
        let b = &self.base;
        if !(b.xi > 0.0) {
            return Err(Error::Precondition {
                step: Step::B5,
                message: format!("scaling needs a Frechet-type base shape, got xi = {}", b.xi),
            });
        }
        if !(b.theta > 0.0 && b.theta <= 1.0) {
            return Err(Error::InvalidSeries(format!(
                "base extremal index {} outside (0, 1]",
                b.theta
            )));
        }
        if !(b.mu0.is_finite() && b.sigma0.is_finite()) {
            return Err(Error::InvalidSeries("base intercepts must be finite".into()));
        }
        let mut ks: Vec<usize> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if p.k == 0 {
                return Err(Error::InvalidWindow);
            }
            if !(p.mu0.is_finite() && p.sigma0.is_finite()) {
                return Err(Error::InvalidSeries(format!("non-finite intercept at k={}", p.k)));
            }
            if !(p.theta > 0.0 && p.theta <= 1.0) {
                return Err(Error::InvalidSeries(format!(
                    "extremal index {} at k={} outside (0, 1]",
                    p.theta, p.k
                )));
            }
            if ks.contains(&p.k) {
                return Err(Error::DegenerateDesign(format!("k={} appears twice", p.k)));
            }
            ks.push(p.k);
        }
        if ks.len() < 3 {
            return Err(Error::DegenerateDesign(format!(
                "need at least 3 distinct window sizes, got {}",
                ks.len()
            )));
        }
        Ok(())
    }
}

/// What the regression response isolates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Response {
    /// `mu_k / (mu_1 (theta_k/theta_1)^xi_1)`, so the fit targets `g_T(k)` alone.
    #[default]
    ThetaAdjusted,
    /// `mu_k / mu_1`; the extremal-index ratio is absorbed into the fitted law.
    Unadjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalingOptions {
    pub response: Response,
    /// Inverse-variance weights from the location standard errors.
    pub weighted: bool,
}

/// A fitted `g_T(k)`.
#[derive(Debug, Clone)]
pub struct ScalingLaw {
    form: Arc<dyn ScalingForm>,
    pub coefficients: Vec<f64>,
    /// R² on `ln g`, in `[0, 1]`.
    pub fit_r2: f64,
    /// Adjusted R² on `ln g`; NaN with no residual degrees of freedom,
    /// `-inf` when the fitted law is nonpositive at some fitted `k`.
    pub adjusted_r2: f64,
    pub k_fit_range: Vec<usize>,
    /// Residuals in the form's own regression space, in `k_fit_range` order.
    pub residuals: Vec<f64>,
    pub response: Response,
    /// Largest `k` inference is trusted for; beyond it results carry a warning.
    pub k_cap: Option<usize>,
}

impl ScalingLaw {
    pub fn form_name(&self) -> &str {
        self.form.name()
    }

    pub fn form(&self) -> &Arc<dyn ScalingForm> {
        &self.form
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        self.form.coefficient_names()
    }

    pub fn g(&self, k: f64) -> f64 {
        self.form.evaluate(&self.coefficients, k)
    }

    pub fn with_k_cap(mut self, k_cap: usize) -> Self {
        self.k_cap = Some(k_cap);
        self
    }
}

fn least_squares(rows: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = rows.len();
    let p = rows[0].len();
    if n < p {
        return Err(Error::DegenerateDesign(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let sw: Vec<f64> = match weights {
        Some(w) => w.iter().map(|w| w.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j] * sw[i]);
    let yv = DVector::from_fn(n, |i, _| y[i] * sw[i]);
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::DegenerateDesign(format!(
            "design matrix is rank deficient (singular values {smin:e} / {smax:e})"
        )));
    }
    let beta = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::DegenerateDesign(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

fn r_squared(observed: &[f64], fitted: &[f64]) -> f64 {
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = observed.iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let scale = observed.iter().map(|y| y * y).sum::<f64>().max(1.0);
    if ss_tot <= 1e-24 * scale {
        return if ss_res <= 1e-24 * scale { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Fits `g_T(k)` of the given form with default options.
pub fn fit_scaling(inputs: &ScalingInputs, form: Arc<dyn ScalingForm>) -> Result<ScalingLaw> {
    fit_scaling_with(inputs, form, &ScalingOptions::default())
}

pub fn fit_scaling_with(
    inputs: &ScalingInputs,
    form: Arc<dyn ScalingForm>,
    options: &ScalingOptions,
) -> Result<ScalingLaw> {
    inputs.validate()?;
    let base = &inputs.base;
    let base_mu = base.location_link.natural(base.mu0);
    if !(base_mu > 0.0) {
        return Err(Error::LogDomain { k: 1, value: base_mu });
    }

    let mut ks = Vec::with_capacity(inputs.points.len());
    let mut ratios = Vec::with_capacity(inputs.points.len());
    let mut divisors = Vec::with_capacity(inputs.points.len());
    for p in &inputs.points {
        let mu = base.location_link.natural(p.mu0);
        if !(mu > 0.0) {
            return Err(Error::LogDomain { k: p.k, value: mu });
        }
        let adj = match options.response {
            Response::ThetaAdjusted => (p.theta / base.theta).powf(base.xi),
            Response::Unadjusted => 1.0,
        };
        ks.push(p.k);
        divisors.push(base_mu * adj);
        ratios.push(mu / (base_mu * adj));
    }
    let log_ratios: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let response: &[f64] = if form.log_response() { &log_ratios } else { &ratios };

    let weights = if options.weighted {
        let mut w = Vec::with_capacity(ks.len());
        for (p, d) in inputs.points.iter().zip(&divisors) {
            let se = p.mu0_se.filter(|s| *s > 0.0 && s.is_finite()).ok_or_else(|| {
                Error::DegenerateDesign(format!("weighted fit needs a standard error at k={}", p.k))
            })?;
            let mu = base.location_link.natural(p.mu0);
            // delta method: sd of ln(mu) is se/mu, sd of mu/d is se/d
            let sd = match (form.log_response(), base.location_link) {
                (true, Link::Identity) => se / mu,
                (true, Link::Log) => se,
                (false, Link::Identity) => se / d,
                (false, Link::Log) => se * mu / d,
            };
            w.push(1.0 / (sd * sd));
        }
        Some(w)
    } else {
        None
    };

    let rows: Vec<Vec<f64>> = ks.iter().map(|&k| form.regressors(k as f64)).collect();
    let beta = least_squares(&rows, response, weights.as_deref())?;
    let residuals: Vec<f64> = rows
        .iter()
        .zip(response)
        .map(|(row, y)| y - row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let coefficients = form.coefficients(&beta);

    let predicted: Vec<f64> = ks.iter().map(|&k| form.evaluate(&coefficients, k as f64)).collect();
    let n = ks.len();
    let p = form.n_coefficients();
    let (fit_r2, adjusted_r2) = if predicted.iter().all(|g| *g > 0.0) {
        let log_pred: Vec<f64> = predicted.iter().map(|g| g.ln()).collect();
        let r2 = r_squared(&log_ratios, &log_pred);
        let adj = if n > p {
            1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p) as f64
        } else {
            f64::NAN
        };
        (r2, adj)
    } else {
        (0.0, f64::NEG_INFINITY)
    };

    Ok(ScalingLaw {
        form,
        coefficients,
        fit_r2,
        adjusted_r2,
        k_fit_range: ks,
        residuals,
        response: options.response,
        k_cap: None,
    })
}

/// One candidate examined by [`select_form`].
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub outcome: std::result::Result<ScalingLaw, String>,
}

#[derive(Debug, Clone)]
pub struct FormSelection {
    pub chosen: ScalingLaw,
    pub candidates: Vec<Candidate>,
}

/// Adjusted R² within this distance of the best counts as a tie, broken
/// toward fewer coefficients and then registry order.
pub const SELECTION_TIE: f64 = 1e-9;

/// Fits every registered form and keeps the best by adjusted R².
///
/// Forms with no residual degrees of freedom are skipped.
pub fn select_form(
    inputs: &ScalingInputs,
    registry: &FormRegistry,
    options: &ScalingOptions,
) -> Result<FormSelection> {
    inputs.validate()?;
    let n = inputs.points.len();
    let mut candidates = Vec::new();
    let mut first_err = None;
    for form in registry.iter() {
        let outcome = if form.n_coefficients() >= n {
            Err(format!(
                "{} coefficients need more than {n} window sizes",
                form.n_coefficients()
            ))
        } else {
            fit_scaling_with(inputs, form.clone(), options).map_err(|e| {
                let msg = e.to_string();
                first_err.get_or_insert(e);
                msg
            })
        };
        candidates.push(Candidate {
            name: form.name().to_string(),
            outcome,
        });
    }
    let ok: Vec<&ScalingLaw> = candidates
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok())
        .filter(|l| !l.adjusted_r2.is_nan())
        .collect();
    let best = ok
        .iter()
        .map(|l| l.adjusted_r2)
        .fold(f64::NEG_INFINITY, f64::max);
    let chosen = ok
        .iter()
        .filter(|l| l.adjusted_r2 >= best - SELECTION_TIE)
        .min_by_key(|l| l.form.n_coefficients())
        .map(|l| (*l).clone());
    match chosen {
        Some(chosen) => Ok(FormSelection { chosen, candidates }),
        None => Err(first_err.unwrap_or_else(|| {
            Error::DegenerateDesign("no scaling form could be fitted".into())
        })),
    }
}

/// Location and scale intercepts inferred for one window size.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredParams {
    pub k: usize,
    pub mu0: f64,
    pub sigma0: f64,
    /// `g_T(k) (theta_k/theta_1)^xi_1`, the multiplier applied to the base.
    pub factor: f64,
    pub warning: Option<String>,
}

fn factor(law: &ScalingLaw, k: usize, base: &ScalingBase, theta_k: f64) -> Result<(f64, Option<String>)> {
    if k == 0 {
        return Err(Error::InvalidWindow);
    }
    if !(theta_k > 0.0 && theta_k <= 1.0) {
        return Err(Error::InvalidSeries(format!(
            "extremal index {theta_k} at k={k} outside (0, 1]"
        )));
    }
    let g = law.g(k as f64);
    let f = match law.response {
        Response::ThetaAdjusted => g * (theta_k / base.theta).powf(base.xi),
        Response::Unadjusted => g,
    };
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::Numerical(format!(
            "scaling factor {f} at k={k} is not positive"
        )));
    }
    let warning = law
        .k_cap
        .filter(|&cap| k > cap)
        .map(|cap| format!("k={k} extrapolates beyond the configured cap k={cap}"));
    Ok((f, warning))
}

/// Intercepts at window size `k` given `theta_k`.
pub fn infer_params(
    law: &ScalingLaw,
    k: usize,
    base: &ScalingBase,
    theta_k: f64,
) -> Result<InferredParams> {
    let (f, warning) = factor(law, k, base, theta_k)?;
    let mu = base.location_link.natural(base.mu0) * f;
    let sigma = base.scale_link.natural(base.sigma0) * f;
    Ok(InferredParams {
        k,
        mu0: base.location_link.intercept(mu),
        sigma0: base.scale_link.intercept(sigma),
        factor: f,
        warning,
    })
}

/// Full window-`k` model obtained by scaling the `k = 1` model.
///
/// Both location and scale functions are multiplied through, so linear trends
/// scale with the intercept and exponential forms shift their log intercept.
pub fn infer_model(
    law: &ScalingLaw,
    k: usize,
    base_model: &GevModel,
    base: &ScalingBase,
    theta_k: f64,
) -> Result<(GevModel, Option<String>)> {
    let (f, warning) = factor(law, k, base, theta_k)?;
    Ok((
        GevModel {
            shape: base_model.shape,
            location: base_model.location.scaled(f),
            scale: base_model.scale.scaled(f),
            shape_fixed: true,
        },
        warning,
    ))
}

/// How `theta_k` is continued past the last estimated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaExtrapolation {
    /// Carry the last estimate forward.
    #[default]
    Flat,
    /// Least-squares line in `k` through all estimates.
    Linear,
}

impl std::str::FromStr for ThetaExtrapolation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "flat" => Ok(Self::Flat),
            "linear" => Ok(Self::Linear),
            _ => Err(format!("unknown theta extrapolation `{s}` (flat, linear)")),
        }
    }
}

/// Extrapolated values are kept within `[THETA_FLOOR, 1]`.
pub const THETA_FLOOR: f64 = 1e-3;

/// `theta_k` from estimates `(k, theta)`; exact where `k` was estimated.
pub fn extrapolate_theta(known: &[(usize, f64)], k: usize, mode: ThetaExtrapolation) -> Result<f64> {
    if known.is_empty() {
        return Err(Error::DegenerateDesign(
            "no extremal index estimates to extrapolate from".into(),
        ));
    }
    if let Some(&(_, th)) = known.iter().find(|(kk, _)| *kk == k) {
        return Ok(th);
    }
    let last = known
        .iter()
        .filter(|(kk, _)| *kk <= k)
        .max_by_key(|(kk, _)| *kk)
        .or_else(|| known.iter().min_by_key(|(kk, _)| *kk))
        .expect("nonempty");
    let value = match mode {
        ThetaExtrapolation::Flat => last.1,
        ThetaExtrapolation::Linear if known.len() >= 2 => {
            let n = known.len() as f64;
            let mk = known.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
            let mt = known.iter().map(|(_, t)| t).sum::<f64>() / n;
            let sxx: f64 = known.iter().map(|(k, _)| (*k as f64 - mk).powi(2)).sum();
            let sxy: f64 = known
                .iter()
                .map(|(k, t)| (*k as f64 - mk) * (t - mt))
                .sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            mt + slope * (k as f64 - mk)
        }
        ThetaExtrapolation::Linear => last.1,
    };
    Ok(value.clamp(THETA_FLOOR, 1.0))
}
