//! Maximum-likelihood fitting of nonstationary GEV models to block maxima.
//!
//! The negative log-likelihood is minimized with Nelder–Mead over an
//! unconstrained coordinate vector:
//!
//! | parameter | constant        | linear              | exponential        |
//! |-----------|-----------------|---------------------|--------------------|
//! | location  | `mu`            | `c0, c1`            | `c0, c1` (exponent)|
//! | scale     | `ln sigma`      | `c0, c1` + penalty  | `c0, c1` (exponent)|
//!
//! Support violations and nonpositive scales cost [`SUPPORT_PENALTY`]
//! instead of infinity so the simplex can walk back into the feasible region.

use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::dist::log_pdf;
use super::params::{GevModel, ParamForm, ParamModel};
use super::pwm::pwm_gev;
use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::series::BlockMaxSeries;

pub const SUPPORT_PENALTY: f64 = 1e10;
pub const MIN_MAXIMA: usize = 20;

/// Optimizer settings for [`fit_mle_with`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub f_tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the restart jitter; fits are deterministic for a given seed.
    pub seed: u64,
    /// Relative finite-difference step for the observed information matrix.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            f_tolerance: 1e-8,
            max_iterations: 10_000,
            seed: 0x5eed_6e7f,
            hessian_step: 1e-4,
        }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: GevModel,
    pub neg_log_likelihood: f64,
    /// Standard errors in [`FitResult::coefficient_names`] order; `None` when the
    /// observed information matrix is not positive definite.
    pub standard_errors: Option<Vec<f64>>,
    pub converged: bool,
    pub n_maxima: usize,
    pub(crate) fingerprint: u64,
}

impl FitResult {
    /// Number of estimated coefficients (the shape counts only when free).
    pub fn n_parameters(&self) -> usize {
        self.model.location.form().n_coefficients()
            + self.model.scale.form().n_coefficients()
            + usize::from(!self.model.shape_fixed)
    }

    pub fn log_likelihood(&self) -> f64 {
        -self.neg_log_likelihood
    }

    /// Names of the estimated coefficients, e.g. `mu0, mu1, sigma0, xi`.
    pub fn coefficient_names(&self) -> Vec<&'static str> {
        let mut names = vec!["mu0"];
        if self.model.location.form() != ParamForm::Constant {
            names.push("mu1");
        }
        names.push("sigma0");
        if self.model.scale.form() != ParamForm::Constant {
            names.push("sigma1");
        }
        if !self.model.shape_fixed {
            names.push("xi");
        }
        names
    }

    /// Standard error of a named coefficient, if available.
    pub fn standard_error(&self, name: &str) -> Option<f64> {
        let idx = self.coefficient_names().iter().position(|n| *n == name)?;
        self.standard_errors.as_ref().map(|se| se[idx])
    }

    /// Whether both fits used the same block maxima.
    pub fn same_data(&self, other: &FitResult) -> bool {
        self.fingerprint == other.fingerprint && self.n_maxima == other.n_maxima
    }
}

/// Fits a GEV with the given location/scale forms; `fixed_shape` holds the
/// shape at that value and removes it from the optimization.
pub fn fit_mle(
    maxima: &BlockMaxSeries,
    location: ParamForm,
    scale: ParamForm,
    fixed_shape: Option<f64>,
) -> Result<FitResult> {
    fit_mle_with(maxima, location, scale, fixed_shape, &FitOptions::default())
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    location: ParamForm,
    scale: ParamForm,
    fixed_shape: Option<f64>,
}

impl Layout {
    fn dim(&self) -> usize {
        self.location.n_coefficients()
            + self.scale.n_coefficients()
            + usize::from(self.fixed_shape.is_none())
    }

    /// Model from the natural coefficient vector (reported coefficients).
    fn model_natural(&self, v: &[f64]) -> GevModel {
        let nl = self.location.n_coefficients();
        let ns = self.scale.n_coefficients();
        GevModel {
            location: ParamModel::from_coefficients(self.location, &v[..nl]),
            scale: ParamModel::from_coefficients(self.scale, &v[nl..nl + ns]),
            shape: self.fixed_shape.unwrap_or_else(|| v[nl + ns]),
            shape_fixed: self.fixed_shape.is_some(),
        }
    }

    /// Natural coefficients from optimizer coordinates (log scale for a
    /// constant scale).
    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        if self.scale == ParamForm::Constant {
            let i = self.location.n_coefficients();
            v[i] = u[i].exp();
        }
        v
    }

    fn to_internal(&self, v: &[f64]) -> Vec<f64> {
        let mut u = v.to_vec();
        if self.scale == ParamForm::Constant {
            let i = self.location.n_coefficients();
            u[i] = v[i].ln();
        }
        u
    }
}

fn neg_log_likelihood(model: &GevModel, maxima: &BlockMaxSeries) -> f64 {
    if model.shape <= -1.0 || !model.shape.is_finite() {
        return SUPPORT_PENALTY * 2.0;
    }
    let n = maxima.len();
    let mut total = 0.0;
    let mut violations = 0usize;
    for (&z, &t) in maxima.maxima().iter().zip(maxima.block_covariates()) {
        let sigma = model.scale.eval(t);
        if !(sigma > 0.0 && sigma.is_finite()) {
            violations += 1;
            continue;
        }
        match log_pdf(z, model.shape, model.location.eval(t), sigma) {
            Some(l) if l.is_finite() => total -= l,
            _ => violations += 1,
        }
    }
    if violations > 0 {
        SUPPORT_PENALTY * (1.0 + violations as f64 / n as f64)
    } else {
        total
    }
}

/// Negative log-likelihood of `model` on `maxima`, with the fitting penalty
/// for support violations.
pub fn model_neg_log_likelihood(model: &GevModel, maxima: &BlockMaxSeries) -> f64 {
    neg_log_likelihood(model, maxima)
}

fn fingerprint(maxima: &BlockMaxSeries) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for (z, t) in maxima.maxima().iter().zip(maxima.block_covariates()) {
        z.to_bits().hash(&mut h);
        t.to_bits().hash(&mut h);
    }
    maxima.block_length().hash(&mut h);
    h.finish()
}

/// Starting values: stationary PWM estimates with zero trends.
fn initial_natural(layout: &Layout, maxima: &BlockMaxSeries) -> Vec<f64> {
    let (xi0, mu0, sigma0) = pwm_gev(maxima.maxima());
    let sigma0 = if sigma0 > 0.0 && sigma0.is_finite() { sigma0 } else { 1.0 };
    let mut v = Vec::with_capacity(layout.dim());
    match layout.location {
        ParamForm::Constant => v.push(mu0),
        ParamForm::Linear => v.extend([mu0, 0.0]),
        ParamForm::Exponential => v.extend([if mu0 > 0.0 { mu0.ln() } else { sigma0.ln() }, 0.0]),
    }
    match layout.scale {
        ParamForm::Constant => v.push(sigma0),
        ParamForm::Linear => v.extend([sigma0, 0.0]),
        ParamForm::Exponential => v.extend([sigma0.ln(), 0.0]),
    }
    if layout.fixed_shape.is_none() {
        v.push(xi0);
    }
    v
}

/// Characteristic simplex step per optimizer coordinate.
fn coordinate_steps(layout: &Layout, sigma0: f64, span: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(layout.dim());
    match layout.location {
        ParamForm::Constant => s.push(0.2 * sigma0),
        ParamForm::Linear => s.extend([0.2 * sigma0, 0.2 * sigma0 / span]),
        ParamForm::Exponential => s.extend([0.1, 0.1 / span]),
    }
    match layout.scale {
        ParamForm::Constant => s.push(0.2),
        ParamForm::Linear => s.extend([0.2 * sigma0, 0.2 * sigma0 / span]),
        ParamForm::Exponential => s.extend([0.2, 0.2 / span]),
    }
    if layout.fixed_shape.is_none() {
        s.push(0.1);
    }
    s
}

/// As [`fit_mle`] with explicit optimizer settings.
pub fn fit_mle_with(
    maxima: &BlockMaxSeries,
    location: ParamForm,
    scale: ParamForm,
    fixed_shape: Option<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    if maxima.len() < MIN_MAXIMA {
        return Err(Error::InsufficientData {
            needed: MIN_MAXIMA,
            got: maxima.len(),
        });
    }
    let layout = Layout {
        location,
        scale,
        fixed_shape,
    };
    let ts = maxima.block_covariates();
    let span = (ts[ts.len() - 1] - ts[0]).max(1.0);

    let mut init = initial_natural(&layout, maxima);
    let sigma_index = location.n_coefficients();
    // widen the starting scale until every maximum is inside the support
    for _ in 0..40 {
        if neg_log_likelihood(&layout.model_natural(&init), maxima) < SUPPORT_PENALTY {
            break;
        }
        match scale {
            ParamForm::Exponential => init[sigma_index] += std::f64::consts::LN_2,
            _ => init[sigma_index] *= 2.0,
        }
    }
    let sigma0 = match scale {
        ParamForm::Exponential => init[sigma_index].exp(),
        _ => init[sigma_index],
    };

    let objective = |u: &[f64]| neg_log_likelihood(&layout.model_natural(&layout.to_natural(u)), maxima);
    let steps = coordinate_steps(&layout, sigma0, span);
    let nm = NelderMead {
        max_iterations: options.max_iterations,
        f_tolerance: options.f_tolerance,
        x_tolerance: 1e-6,
    };

    let mut best = nm.minimize(objective, &layout.to_internal(&init), &steps);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(options.seed);
    for _ in 0..options.restarts {
        let jittered: Vec<f64> = steps
            .iter()
            .map(|s| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * s * rng.random_range(0.5..1.5)
            })
            .collect();
        let run = nm.minimize(objective, &best.x, &jittered);
        if run.f < best.f || (run.f == best.f && run.converged && !best.converged) {
            best = run;
        }
    }

    if best.f >= SUPPORT_PENALTY {
        return Err(Error::FitInfeasible);
    }

    let natural = layout.to_natural(&best.x);
    let model = layout.model_natural(&natural);
    let standard_errors = observed_information_se(&layout, &natural, maxima, options.hessian_step);

    Ok(FitResult {
        model,
        neg_log_likelihood: best.f,
        standard_errors,
        converged: best.converged,
        n_maxima: maxima.len(),
        fingerprint: fingerprint(maxima),
    })
}

/// Central-difference gradient of the negative log-likelihood in natural
/// coefficients, with per-coefficient steps `rel * max(|v_i|, 1)`.
pub fn nll_gradient(fit: &FitResult, maxima: &BlockMaxSeries, rel: f64) -> Vec<f64> {
    let layout = Layout {
        location: fit.model.location.form(),
        scale: fit.model.scale.form(),
        fixed_shape: fit.model.shape_fixed.then_some(fit.model.shape),
    };
    let v = natural_vector(&fit.model);
    let f = |x: &[f64]| neg_log_likelihood(&layout.model_natural(x), maxima);
    (0..v.len())
        .map(|i| {
            let h = rel * v[i].abs().max(1.0);
            let mut a = v.clone();
            let mut b = v.clone();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn natural_vector(model: &GevModel) -> Vec<f64> {
    let mut v = model.location.coefficients();
    v.extend(model.scale.coefficients());
    if !model.shape_fixed {
        v.push(model.shape);
    }
    v
}

fn observed_information_se(
    layout: &Layout,
    v: &[f64],
    maxima: &BlockMaxSeries,
    rel: f64,
) -> Option<Vec<f64>> {
    let d = v.len();
    let f = |x: &[f64]| neg_log_likelihood(&layout.model_natural(x), maxima);
    let h: Vec<f64> = v.iter().map(|x| rel * x.abs().max(1.0)).collect();
    let f0 = f(v);
    let mut hess = DMatrix::<f64>::zeros(d, d);
    let mut point = v.to_vec();
    let mut eval_at = |shifts: &[(usize, f64)]| {
        for &(i, s) in shifts {
            point[i] = v[i] + s;
        }
        let out = f(&point);
        for &(i, _) in shifts {
            point[i] = v[i];
        }
        out
    };
    for i in 0..d {
        let fp = eval_at(&[(i, h[i])]);
        let fm = eval_at(&[(i, -h[i])]);
        if fp >= SUPPORT_PENALTY || fm >= SUPPORT_PENALTY {
            return None;
        }
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = eval_at(&[(i, h[i]), (j, h[j])]);
            let fpm = eval_at(&[(i, h[i]), (j, -h[j])]);
            let fmp = eval_at(&[(i, -h[i]), (j, h[j])]);
            let fmm = eval_at(&[(i, -h[i]), (j, -h[j])]);
            if [fpp, fpm, fmp, fmm].iter().any(|&x| x >= SUPPORT_PENALTY) {
                return None;
            }
            let hij = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = hij;
            hess[(j, i)] = hij;
        }
    }
    let chol = hess.cholesky()?;
    let cov = chol.inverse();
    let se: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    se.iter().all(|s| s.is_finite()).then_some(se)
}

/// Maps maxima to the standard Gumbel scale through a fitted model:
/// `(1/xi) ln(1 + xi (z - mu(t)) / sigma(t))`, or `(z - mu(t)) / sigma(t)` at `xi = 0`.
pub fn gumbel_normalize(maxima: &BlockMaxSeries, model: &GevModel) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(maxima.len());
    let mut bad = Vec::new();
    for (i, (&z, &t)) in maxima.maxima().iter().zip(maxima.block_covariates()).enumerate() {
        let Ok((mu, sigma, xi)) = model.evaluate_params(t) else {
            bad.push(i);
            continue;
        };
        let y = (z - mu) / sigma;
        if xi.abs() < super::dist::GUMBEL_EPS {
            out.push(y);
        } else if xi * y > -1.0 {
            out.push((xi * y).ln_1p() / xi);
        } else {
            bad.push(i);
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::NormalizationDomain(bad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::dist::quantile_unchecked;
    use approx::assert_abs_diff_eq;

    fn plotting_position_maxima(n: usize, xi: f64, mu: f64, sigma: f64) -> BlockMaxSeries {
        // interleave the quantiles so no trend appears in the covariate
        let mut z: Vec<f64> = (0..n)
            .map(|i| quantile_unchecked((i as f64 + 0.5) / n as f64, xi, mu, sigma))
            .collect();
        let mut shuffled = Vec::with_capacity(n);
        let stride = 7;
        for start in 0..stride {
            let mut i = start;
            while i < n {
                shuffled.push(z[i]);
                i += stride;
            }
        }
        z = shuffled;
        BlockMaxSeries::from_parts((0..n).map(|i| i as f64 / 10.0).collect(), z, 1).unwrap()
    }

    #[test]
    fn too_few_maxima() {
        let b = plotting_position_maxima(10, 0.1, 0.0, 1.0);
        assert!(matches!(
            fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None),
            Err(Error::InsufficientData { needed: 20, got: 10 })
        ));
    }

    #[test]
    fn stationary_fit_on_plotting_positions() {
        let b = plotting_position_maxima(2000, 0.2, 10.0, 2.0);
        let fit = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None).unwrap();
        assert!(fit.converged);
        let (mu, sigma, xi) = fit.model.evaluate_params(0.0).unwrap();
        assert_abs_diff_eq!(xi, 0.2, epsilon = 0.02);
        assert_abs_diff_eq!(mu, 10.0, epsilon = 0.05);
        assert_abs_diff_eq!(sigma, 2.0, epsilon = 0.05);
        let se = fit.standard_errors.as_ref().unwrap();
        assert_eq!(se.len(), 3);
        assert!(se.iter().all(|s| *s > 0.0));
        assert_eq!(fit.coefficient_names(), vec!["mu0", "sigma0", "xi"]);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let b = plotting_position_maxima(500, 0.15, 3.0, 1.5);
        let fit = fit_mle(&b, ParamForm::Linear, ParamForm::Constant, None).unwrap();
        let g = nll_gradient(&fit, &b, 1e-5);
        let scale = [1.5, 1.5, 1.5, 1.0];
        for (gi, s) in g.iter().zip(scale) {
            assert!((gi * s * 1e-2).abs() < 1e-3, "gradient {g:?}");
        }
    }

    #[test]
    fn fixed_shape_is_held_exactly() {
        let b = plotting_position_maxima(300, 0.2, 10.0, 2.0);
        let free = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None).unwrap();
        let fixed = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, Some(0.35)).unwrap();
        assert_eq!(fixed.model.shape, 0.35);
        assert!(fixed.model.shape_fixed);
        assert_eq!(fixed.n_parameters(), 2);
        assert!(fixed.neg_log_likelihood >= free.neg_log_likelihood - 1e-8);
        assert_eq!(fixed.coefficient_names(), vec!["mu0", "sigma0"]);
    }

    #[test]
    fn gumbel_normalize_examples() {
        let b = BlockMaxSeries::from_parts(vec![0.0, 1.0, 2.0], vec![5.0, 6.0, 7.0], 1).unwrap();
        let m = GevModel {
            shape: 0.3,
            location: ParamModel::Linear(5.0, 1.0),
            scale: ParamModel::Constant(2.0),
            shape_fixed: false,
        };
        assert_eq!(gumbel_normalize(&b, &m).unwrap(), vec![0.0, 0.0, 0.0]);

        let one = BlockMaxSeries::from_parts(vec![0.0], vec![std::f64::consts::E - 1.0], 1).unwrap();
        let unit = GevModel::stationary(1.0, 0.0, 1.0);
        assert_abs_diff_eq!(gumbel_normalize(&one, &unit).unwrap()[0], 1.0, epsilon = 1e-15);

        let gumbel = GevModel::stationary(0.0, 1.0, 2.0);
        assert_abs_diff_eq!(gumbel_normalize(&one, &gumbel).unwrap()[0], (std::f64::consts::E - 2.0) / 2.0, epsilon = 1e-15);

        let outside = BlockMaxSeries::from_parts(vec![0.0, 1.0, 2.0], vec![0.0, -2.0, -3.0], 1).unwrap();
        match gumbel_normalize(&outside, &unit) {
            Err(Error::NormalizationDomain(idx)) => assert_eq!(idx, vec![1, 2]),
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
