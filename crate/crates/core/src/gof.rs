//! Kolmogorov–Smirnov and Anderson–Darling tests against a fully specified
//! distribution, and quantile-plot coordinates.
//!
//! Nonstationary fits are tested by Gumbel-normalizing the block maxima
//! through the fitted model and comparing with the standard Gumbel law. The
//! p-values treat the fitted parameters as known and are therefore
//! anti-conservative after fitting.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gev::{gumbel_normalize, standard_gumbel_cdf, GevModel};
use crate::series::BlockMaxSeries;

/// Statistic and p-value of one test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Anderson–Darling outcome, with the number of CDF values moved off 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub clamped: usize,
}

/// CDF values are kept inside `[AD_CLAMP, 1 - AD_CLAMP]`.
pub const AD_CLAMP: f64 = 1e-15;
/// Anderson–Darling p-values are reported within `[AD_P_MIN, AD_P_MAX]`.
pub const AD_P_MIN: f64 = 0.001;
pub const AD_P_MAX: f64 = 0.999;

fn sorted_cdf_values(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut u: Vec<f64> = sample.iter().map(|&x| cdf(x)).collect();
    if u.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("distribution function returned NaN".into()));
    }
    u.sort_by(f64::total_cmp);
    Ok(u)
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges quickly for small lambda
        let c = PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let j = j as f64;
                let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test.
///
/// The p-value uses the asymptotic distribution at
/// `(sqrt(n) + 0.12 + 0.11/sqrt(n)) D`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestOutcome> {
    let u = sorted_cdf_values(sample, cdf)?;
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let i = i as f64;
            ((i + 1.0) / n - v).max(v - i / n)
        })
        .fold(0.0, f64::max);
    let rn = n.sqrt();
    Ok(TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d),
    })
}

/// Limiting CDF of the Anderson–Darling statistic.
fn ad_inf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247105
                    - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.0776
            - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
            .exp())
        .exp()
    }
}

/// Finite-sample correction to [`ad_inf`].
fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.00022633
        + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 / n + 0.01365 / (n * n)) / n
}

/// One-sample Anderson–Darling test against a fully specified distribution.
pub fn ad_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<AdOutcome> {
    let mut u = sorted_cdf_values(sample, cdf)?;
    let mut clamped = 0;
    for v in &mut u {
        let c = v.clamp(AD_CLAMP, 1.0 - AD_CLAMP);
        if c != *v {
            clamped += 1;
            *v = c;
        }
    }
    let n = u.len();
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (u[i].ln() + (-u[n - 1 - i]).ln_1p()))
        .sum();
    let nf = n as f64;
    let a2 = -nf - s / nf;
    let cdf = ad_inf(a2);
    let cdf = cdf + ad_errfix(nf, cdf);
    Ok(AdOutcome {
        statistic: a2,
        p_value: (1.0 - cdf).clamp(AD_P_MIN, AD_P_MAX),
        clamped,
    })
}

/// Sorted sample paired with `quantile((i - 0.5)/n)`, as `(theoretical, empirical)`.
pub fn qq_points(sample: &[f64], quantile: impl Fn(f64) -> f64) -> Result<Vec<(f64, f64)>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.into_iter()
        .enumerate()
        .map(|(i, x)| (quantile((i as f64 + 0.5) / n), x))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub ad_statistic: f64,
    pub ad_p: f64,
    pub n: usize,
    /// Data were Gumbel-normalized through a fitted model before testing.
    pub normalized: bool,
    /// CDF values clamped away from 0 or 1 in the Anderson–Darling sum.
    pub ad_clamped: usize,
}

/// Both tests of `sample` against `cdf`.
pub fn gof_report(sample: &[f64], cdf: impl Fn(f64) -> f64, normalized: bool) -> Result<GofReport> {
    let ks = ks_test(sample, &cdf)?;
    let ad = ad_test(sample, &cdf)?;
    Ok(GofReport {
        ks_statistic: ks.statistic,
        ks_p: ks.p_value,
        ad_statistic: ad.statistic,
        ad_p: ad.p_value,
        n: sample.len(),
        normalized,
        ad_clamped: ad.clamped,
    })
}

/// Tests block maxima against a fitted, possibly nonstationary, model via
/// Gumbel normalization.
pub fn gof_model(maxima: &BlockMaxSeries, model: &GevModel) -> Result<GofReport> {
    let z = gumbel_normalize(maxima, model)?;
    gof_report(&z, standard_gumbel_cdf, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::{gev_cdf, standard_gumbel_quantile};
    use crate::sim::UniformSource;
    use approx::assert_abs_diff_eq;

    fn uniform(u: f64) -> f64 {
        u.clamp(0.0, 1.0)
    }

    fn draws(n: usize, seed: u64) -> Vec<f64> {
        let mut s = UniformSource::new(seed);
        (0..n).map(|_| s.open01()).collect()
    }

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert_abs_diff_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
        // both branches agree where they meet
        assert_abs_diff_eq!(kolmogorov_sf(1.18 - 1e-12), kolmogorov_sf(1.18), epsilon = 1e-10);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn plotting_position_discrepancy() {
        for n in [1usize, 7, 50] {
            let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let ks = ks_test(&s, uniform).unwrap();
            assert_abs_diff_eq!(ks.statistic, 0.5 / n as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn perfect_sample_has_large_ad_p() {
        let n = 200;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ad = ad_test(&s, uniform).unwrap();
        assert!(ad.statistic < 0.01);
        assert_eq!(ad.p_value, AD_P_MAX);
    }

    #[test]
    fn ad_reference_quantiles() {
        // asymptotic upper 5% and 1% points are 2.492 and 3.857
        assert_abs_diff_eq!(1.0 - ad_inf(2.492), 0.05, epsilon = 5e-4);
        assert_abs_diff_eq!(1.0 - ad_inf(3.857), 0.01, epsilon = 5e-4);
    }

    #[test]
    fn gross_misfit() {
        let s: Vec<f64> = draws(500, 3).iter().map(|u| standard_gumbel_quantile(*u) + 10.0).collect();
        assert!(ks_test(&s, standard_gumbel_cdf).unwrap().p_value < 1e-6);
        assert_eq!(ad_test(&s, standard_gumbel_cdf).unwrap().p_value, AD_P_MIN);
    }

    #[test]
    fn heavy_tail_against_gumbel() {
        let s: Vec<f64> = draws(500, 11)
            .iter()
            .map(|u| crate::gev::gev_quantile(*u, 0.5, 0.0, 1.0).unwrap())
            .collect();
        assert!(ad_test(&s, standard_gumbel_cdf).unwrap().p_value < 0.01);
    }

    #[test]
    fn probability_integral_transform_invariance() {
        let x: Vec<f64> = draws(300, 5)
            .iter()
            .map(|u| crate::gev::gev_quantile(*u, 0.2, 10.0, 2.0).unwrap() + 0.3)
            .collect();
        let cdf = |z: f64| gev_cdf(z, 0.2, 10.0, 2.0).unwrap();
        let u: Vec<f64> = x.iter().map(|&z| cdf(z)).collect();
        let a = gof_report(&x, cdf, false).unwrap();
        let b = gof_report(&u, uniform, false).unwrap();
        assert_abs_diff_eq!(a.ks_statistic, b.ks_statistic, epsilon = 1e-12);
        assert_abs_diff_eq!(a.ad_statistic, b.ad_statistic, epsilon = 1e-12);
    }

    #[test]
    fn p_values_decrease_with_statistic() {
        let mut last = (2.0, 2.0);
        for i in 1..200 {
            let x = i as f64 * 0.03;
            let ks = kolmogorov_sf(x);
            let c = ad_inf(x);
            let ad = (1.0 - (c + ad_errfix(50.0, c))).clamp(AD_P_MIN, AD_P_MAX);
            assert!(ks <= last.0 + 1e-15 && ad <= last.1 + 1e-12, "at {x}");
            last = (ks, ad);
        }
    }

    #[test]
    fn calibration_under_the_null() {
        let (mut ks_rej, mut ks_ok, mut ad_rej) = (0, 0, 0);
        for seed in 0..100 {
            let s = draws(1000, 1000 + seed);
            let ks = ks_test(&s, uniform).unwrap();
            let ad = ad_test(&s, uniform).unwrap();
            ks_ok += (ks.p_value > 0.05) as usize;
            ks_rej += (ks.p_value < 0.05) as usize;
            ad_rej += (ad.p_value < 0.05) as usize;
        }
        assert!(ks_ok >= 95 || (2..=9).contains(&ks_rej), "ks rejections {ks_rej}");
        assert!((2..=9).contains(&ad_rej), "ad rejections {ad_rej}");
    }

    #[test]
    fn boundary_values_are_clamped() {
        let ad = ad_test(&[0.0, 0.5, 1.0], uniform).unwrap();
        assert_eq!(ad.clamped, 2);
        assert!(ad.statistic.is_finite());
    }

    #[test]
    fn qq_on_exact_quantiles() {
        let n = 40;
        let s: Vec<f64> = (0..n)
            .rev()
            .map(|i| standard_gumbel_quantile((i as f64 + 0.5) / n as f64))
            .collect();
        for (t, e) in qq_points(&s, standard_gumbel_quantile).unwrap() {
            assert_abs_diff_eq!(t, e, epsilon = 1e-12);
        }
        assert_eq!(qq_points(&[3.0], |p| p).unwrap(), vec![(0.5, 3.0)]);
        assert!(matches!(qq_points(&[], |p| p), Err(Error::EmptySample)));
    }

    #[test]
    fn qq_misfit_curvature() {
        // against a Gumbel reference the residual (exp(xi t) - 1)/xi - t is
        // nonnegative and convex in the theoretical quantile t
        let n = 200;
        let s: Vec<f64> = (0..n)
            .map(|i| crate::gev::gev_quantile((i as f64 + 0.5) / n as f64, 0.4, 0.0, 1.0).unwrap())
            .collect();
        let pts = qq_points(&s, standard_gumbel_quantile).unwrap();
        let resid: Vec<f64> = pts.iter().map(|(t, e)| e - t).collect();
        assert!(resid.iter().all(|r| *r >= -1e-12));
        for w in pts.windows(3) {
            let s1 = ((w[1].1 - w[1].0) - (w[0].1 - w[0].0)) / (w[1].0 - w[0].0);
            let s2 = ((w[2].1 - w[2].0) - (w[1].1 - w[1].0)) / (w[2].0 - w[1].0);
            assert!(s2 >= s1 - 1e-9);
        }
        assert!(resid[n - 1] > 1.0);
    }

    #[test]
    fn empty_sample() {
        assert!(matches!(ks_test(&[], uniform), Err(Error::EmptySample)));
        assert!(matches!(ad_test(&[], uniform), Err(Error::EmptySample)));
    }
}
