//! GEV distribution functions.
//!
//! `G(z) = exp(-[1 + xi (z - mu) / sigma]^(-1/xi))` on the support
//! `1 + xi (z - mu) / sigma > 0`, with the Gumbel limit
//! `exp(-exp(-(z - mu) / sigma))` at `xi = 0`.

use crate::error::{Error, Result};

/// Below this magnitude the shape is treated as exactly zero (Gumbel).
pub const GUMBEL_EPS: f64 = 1e-12;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidScale(sigma))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// GEV cumulative distribution function.
pub fn gev_cdf(z: f64, xi: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(cdf_unchecked(z, xi, mu, sigma))
}

pub(crate) fn cdf_unchecked(z: f64, xi: f64, mu: f64, sigma: f64) -> f64 {
    let y = (z - mu) / sigma;
    if xi.abs() < GUMBEL_EPS {
        return (-(-y).exp()).exp();
    }
    let s = xi * y;
    if s <= -1.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    // (1 + s)^(-1/xi) through log1p keeps the small-xi limit accurate
    (-(-s.ln_1p() / xi).exp()).exp()
}

/// Upper-tail probability `1 - G(z)`, accurate far into the tail.
pub(crate) fn survival_unchecked(z: f64, xi: f64, mu: f64, sigma: f64) -> f64 {
    let y = (z - mu) / sigma;
    let tau = if xi.abs() < GUMBEL_EPS {
        (-y).exp()
    } else {
        let s = xi * y;
        if s <= -1.0 {
            return if xi > 0.0 { 1.0 } else { 0.0 };
        }
        (-s.ln_1p() / xi).exp()
    };
    -(-tau).exp_m1()
}

/// GEV quantile function (inverse CDF).
pub fn gev_quantile(p: f64, xi: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    check_probability(p)?;
    Ok(quantile_unchecked(p, xi, mu, sigma))
}

pub(crate) fn quantile_unchecked(p: f64, xi: f64, mu: f64, sigma: f64) -> f64 {
    let w = -p.ln();
    let ln_w = w.ln();
    if xi.abs() < GUMBEL_EPS {
        mu - sigma * ln_w
    } else {
        // ((-ln p)^(-xi) - 1) / xi
        mu + sigma * (-xi * ln_w).exp_m1() / xi
    }
}

/// Log density; `None` outside the support.
pub(crate) fn log_pdf(z: f64, xi: f64, mu: f64, sigma: f64) -> Option<f64> {
    let y = (z - mu) / sigma;
    if xi.abs() < GUMBEL_EPS {
        return Some(-sigma.ln() - y - (-y).exp());
    }
    let s = xi * y;
    if s <= -1.0 {
        return None;
    }
    let l = s.ln_1p();
    Some(-sigma.ln() - (1.0 + 1.0 / xi) * l - (-l / xi).exp())
}

/// Standard Gumbel CDF `exp(-exp(-x))`.
pub fn standard_gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Standard Gumbel quantile `-ln(-ln p)`.
pub fn standard_gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn cdf_examples() {
        assert_abs_diff_eq!(gev_cdf(0.0, 0.0, 0.0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gev_cdf(0.0, 0.0, 0.0, 1.0).unwrap(), 0.367879, epsilon = 1e-6);
        // xi = 1, mu = 0, sigma = 1: the lower endpoint is mu - sigma/xi = -1, while z = 0
        // sits at the location where G = exp(-1)
        assert_eq!(gev_cdf(-1.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gev_cdf(0.0, 1.0, 0.0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(gev_cdf(-5.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gev_cdf(14.0, 0.5, 10.0, 2.0).unwrap(), (-0.25f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gev_cdf(14.0, 0.5, 10.0, 2.0).unwrap(), 0.778801, epsilon = 1e-6);
        // above the upper endpoint of a Weibull-type law
        assert_eq!(gev_cdf(10.0, -0.5, 0.0, 1.0).unwrap(), 1.0);
        assert!(matches!(gev_cdf(0.0, 0.1, 0.0, 0.0), Err(Error::InvalidScale(_))));
    }

    #[test]
    fn support_boundary_for_unit_shape() {
        // For xi = 1, mu = 0, sigma = 1 the boundary is z = -1; the CDF there is 0.
        assert_eq!(cdf_unchecked(-1.0, 1.0, 0.0, 1.0), 0.0);
        // just inside the support the CDF is still tiny
        assert!(cdf_unchecked(-0.99, 1.0, 0.0, 1.0) < 1e-40);
    }

    #[test]
    fn quantile_examples() {
        assert_abs_diff_eq!(gev_quantile((-1.0f64).exp(), 0.0, 0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(gev_quantile((-0.25f64).exp(), 0.5, 10.0, 2.0).unwrap(), 14.0, max_relative = 1e-14);
        assert!(matches!(gev_quantile(1.0, 0.1, 0.0, 1.0), Err(Error::InvalidProbability(_))));
        assert!(matches!(gev_quantile(0.0, 0.1, 0.0, 1.0), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn gumbel_continuity() {
        for i in 0..=100 {
            let z = -3.0 + 0.1 * i as f64;
            let a = gev_cdf(z, 1e-9, 1.5, 2.0).unwrap();
            let b = gev_cdf(z, 0.0, 1.5, 2.0).unwrap();
            assert!((a - b).abs() < 1e-6, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn survival_matches_cdf() {
        for &(z, xi) in &[(3.0, 0.2), (50.0, 0.2), (1.0, 0.0), (0.5, -0.3)] {
            let s = survival_unchecked(z, xi, 0.0, 1.0);
            assert_abs_diff_eq!(s, 1.0 - cdf_unchecked(z, xi, 0.0, 1.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn log_pdf_integrates_to_cdf_increment() {
        // trapezoid integral of the density between two points matches the CDF difference
        let (xi, mu, sigma) = (0.3, 1.0, 2.0);
        let (a, b) = (0.0, 6.0);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |z: f64| log_pdf(z, xi, mu, sigma).map_or(0.0, f64::exp);
        let integral: f64 = (0..n)
            .map(|i| 0.5 * h * (f(a + i as f64 * h) + f(a + (i + 1) as f64 * h)))
            .sum();
        let diff = cdf_unchecked(b, xi, mu, sigma) - cdf_unchecked(a, xi, mu, sigma);
        assert_abs_diff_eq!(integral, diff, epsilon = 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn quantile_cdf_round_trip(
            xi in -0.8f64..1.5,
            mu in -100.0f64..100.0,
            sigma in 0.01f64..50.0,
            p in 0.001f64..0.999,
        ) {
            let z = gev_quantile(p, xi, mu, sigma).unwrap();
            let back = gev_cdf(z, xi, mu, sigma).unwrap();
            prop_assert!((back - p).abs() < 1e-10, "p={p} back={back}");
        }

        #[test]
        fn cdf_nondecreasing(
            xi in -0.8f64..1.5,
            mu in -10.0f64..10.0,
            sigma in 0.1f64..5.0,
            z in -30.0f64..30.0,
            dz in 0.0f64..5.0,
        ) {
            let a = gev_cdf(z, xi, mu, sigma).unwrap();
            let b = gev_cdf(z + dz, xi, mu, sigma).unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
