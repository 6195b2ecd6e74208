//! Extremal index estimation with moving (nonstationary) thresholds.
//!
//! Exceedances are the indices where `x_i > u(t_i)`. With exceedance indices
//! `s_1 < ... < s_{N+1}` and interexceedance times `T_j = s_{j+1} - s_j`, the
//! Ferro–Segers intervals estimator is
//!
//! ```text
//! theta = 2 (sum T_j)^2 / (N sum T_j^2)                       if max T_j <= 2
//! theta = 2 (sum (T_j - 1))^2 / (N sum (T_j - 1)(T_j - 2))    otherwise
//! ```
//!
//! clamped to at most 1. Wait times are counted in observations, not in
//! covariate units.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{moving_minimum, moving_quantile, TimeSeries};

/// Raw output of the intervals estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalsEstimate {
    pub theta: f64,
    pub n_exceedances: usize,
    /// The unclamped estimate exceeded 1.
    pub clamped: bool,
    /// Every exceedance was adjacent to the next: one run containing all
    /// exceedances. `theta` is then `1 / n_exceedances`.
    pub saturated: bool,
}

/// Extremal index for one window size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub k: usize,
    pub theta: f64,
    pub n_exceedances: usize,
    pub threshold_quantile: f64,
    pub threshold_window_span: f64,
    pub clamped: bool,
    pub saturated: bool,
}

/// Intervals estimator from increasing exceedance indices.
pub fn intervals_estimator(exceedances: &[usize]) -> Result<IntervalsEstimate> {
    if exceedances.len() < 3 {
        return Err(Error::InsufficientExceedances(exceedances.len()));
    }
    let gaps: Vec<f64> = exceedances.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let n = gaps.len() as f64;
    if gaps.iter().all(|&g| g == 1.0) {
        return Ok(IntervalsEstimate {
            theta: 1.0 / exceedances.len() as f64,
            n_exceedances: exceedances.len(),
            clamped: false,
            saturated: true,
        });
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let raw = if max_gap <= 2.0 {
        let s: f64 = gaps.iter().sum();
        let s2: f64 = gaps.iter().map(|g| g * g).sum();
        2.0 * s * s / (n * s2)
    } else {
        let s: f64 = gaps.iter().map(|g| g - 1.0).sum();
        let s2: f64 = gaps.iter().map(|g| (g - 1.0) * (g - 2.0)).sum();
        2.0 * s * s / (n * s2)
    };
    Ok(IntervalsEstimate {
        theta: raw.min(1.0),
        n_exceedances: exceedances.len(),
        clamped: raw > 1.0,
        saturated: false,
    })
}

/// Indices where `series` strictly exceeds the aligned `threshold`.
pub fn exceedance_indices(series: &TimeSeries, threshold: &TimeSeries) -> Result<Vec<usize>> {
    if series.len() != threshold.len() {
        return Err(Error::ThresholdMismatch {
            series: series.len(),
            threshold: threshold.len(),
        });
    }
    Ok(series
        .values()
        .iter()
        .zip(threshold.values())
        .enumerate()
        .filter(|(_, (x, u))| x > u)
        .map(|(i, _)| i)
        .collect())
}

/// Ferro–Segers estimate of the extremal index above a threshold aligned
/// index-wise with the series.
pub fn ferro_segers(series: &TimeSeries, threshold: &TimeSeries) -> Result<IntervalsEstimate> {
    intervals_estimator(&exceedance_indices(series, threshold)?)
}

/// Where [`theta_by_window`] stopped producing estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaHorizon {
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaByWindow {
    /// Estimates for `k = 1, 2, ...` up to the first failing window.
    pub estimates: Vec<ThetaEstimate>,
    pub horizon: Option<ThetaHorizon>,
}

impl ThetaByWindow {
    pub fn theta(&self, k: usize) -> Option<f64> {
        self.estimates.iter().find(|e| e.k == k).map(|e| e.theta)
    }
}

/// Extremal index of the window-`k` moving minimum for one `k`, thresholded
/// by its own moving `q`-quantile.
pub fn theta_for_window(
    series: &TimeSeries,
    k: usize,
    q: f64,
    window_span: f64,
) -> Result<ThetaEstimate> {
    let y = moving_minimum(series, k)?;
    let u = moving_quantile(&y, window_span, q)?;
    let est = ferro_segers(&y, &u)?;
    Ok(ThetaEstimate {
        k,
        theta: est.theta,
        n_exceedances: est.n_exceedances,
        threshold_quantile: q,
        threshold_window_span: window_span,
        clamped: est.clamped,
        saturated: est.saturated,
    })
}

/// `theta_k` for `k = 1..=k_max`, truncated at the first window that fails.
pub fn theta_by_window(
    series: &TimeSeries,
    k_max: usize,
    q: f64,
    window_span: f64,
) -> Result<ThetaByWindow> {
    if k_max == 0 {
        return Err(Error::InvalidWindow);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantile(q));
    }
    let results: Vec<Result<ThetaEstimate>> = (1..=k_max)
        .into_par_iter()
        .map(|k| theta_for_window(series, k, q, window_span))
        .collect();
    let mut estimates = Vec::with_capacity(k_max);
    let mut horizon = None;
    for (k, r) in (1..=k_max).zip(results) {
        match r {
            Ok(e) => estimates.push(e),
            Err(e @ (Error::InsufficientExceedances(_) | Error::WindowTooLarge { .. })) => {
                horizon = Some(ThetaHorizon {
                    k,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ThetaByWindow { estimates, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn isolated_exceedances_give_unit_theta() {
        let idx: Vec<usize> = (0..20).map(|i| 10 * i).collect();
        let e = intervals_estimator(&idx).unwrap();
        assert_eq!(e.theta, 1.0);
        assert!(e.clamped);
        assert!(!e.saturated);
    }

    #[test]
    fn tight_cluster_is_saturated() {
        let e = intervals_estimator(&[3, 4, 5, 6, 7]).unwrap();
        assert!(e.saturated);
        assert_abs_diff_eq!(e.theta, 0.2);
    }

    #[test]
    fn small_gap_branch() {
        // gaps 1, 2, 1, 2 -> 2 * 36 / (4 * 10) = 1.8 -> clamped
        let e = intervals_estimator(&[0, 1, 3, 4, 6]).unwrap();
        assert_eq!(e.theta, 1.0);
        assert!(e.clamped);
    }

    #[test]
    fn large_gap_branch_hand_value() {
        // clusters of two separated by long gaps: gaps 1, 20, 1, 20, 1
        // sum(T-1) = 38, sum (T-1)(T-2) = 0 + 342 + 0 + 342 + 0 = 684, N = 5
        // theta = 2 * 38^2 / (5 * 684) = 0.8444...
        let e = intervals_estimator(&[0, 1, 21, 22, 42, 43]).unwrap();
        assert_abs_diff_eq!(e.theta, 2.0 * 38.0 * 38.0 / (5.0 * 684.0), epsilon = 1e-12);
        assert!(!e.clamped);
    }

    #[test]
    fn too_few_exceedances() {
        assert!(matches!(
            intervals_estimator(&[1, 5]),
            Err(Error::InsufficientExceedances(2))
        ));
    }

    #[test]
    fn threshold_must_align() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        let u = TimeSeries::from_values(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            ferro_segers(&s, &u),
            Err(Error::ThresholdMismatch { .. })
        ));
    }

    #[test]
    fn exceedances_are_strict() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        let u = TimeSeries::from_values(vec![2.0; 4]).unwrap();
        assert_eq!(exceedance_indices(&s, &u).unwrap(), vec![3]);
    }

    #[test]
    fn window_one_matches_raw_series() {
        let s = crate::sim::sample_moving_max(5000, 1, 4);
        let direct = ferro_segers(&s, &moving_quantile(&s, 0.2, 0.95).unwrap()).unwrap();
        let byk = theta_by_window(&s, 1, 0.95, 0.2).unwrap();
        assert_eq!(byk.estimates[0].theta, direct.theta);
        assert_eq!(byk.estimates[0].k, 1);
    }

    #[test]
    fn monotone_transform_invariance() {
        let s = crate::sim::sample_moving_max(3000, 2, 8);
        let u = moving_quantile(&s, 0.25, 0.9).unwrap();
        let ls = TimeSeries::new(s.covariates().to_vec(), s.values().iter().map(|v| v.ln()).collect()).unwrap();
        let lu = TimeSeries::new(u.covariates().to_vec(), u.values().iter().map(|v| v.ln()).collect()).unwrap();
        assert_eq!(
            exceedance_indices(&s, &u).unwrap(),
            exceedance_indices(&ls, &lu).unwrap()
        );
        assert_eq!(ferro_segers(&s, &u).unwrap(), ferro_segers(&ls, &lu).unwrap());
    }

    #[test]
    fn horizon_is_reported() {
        // a short series: long windows leave too few exceedances
        let s = crate::sim::sample_moving_max(40, 0, 1);
        let r = theta_by_window(&s, 40, 0.95, 2.0).unwrap();
        let h = r.horizon.expect("some window must fail");
        assert_eq!(r.estimates.len(), h.k - 1);
    }
}
