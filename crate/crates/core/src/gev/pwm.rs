//! Probability-weighted-moment (Hosking 1985) estimates for a stationary GEV.

use statrs::function::gamma::gamma;

use super::dist::EULER_GAMMA;

/// Sample probability-weighted moments `b0, b1, b2` (unbiased estimators).
pub fn sample_pwm(data: &[f64]) -> [f64; 3] {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (j, &v) in x.iter().enumerate() {
        let j = j as f64; // zero-based rank
        b0 += v;
        if n > 1.0 {
            b1 += v * j / (n - 1.0);
        }
        if n > 2.0 {
            b2 += v * j * (j - 1.0) / ((n - 1.0) * (n - 2.0));
        }
    }
    [b0 / n, b1 / n, b2 / n]
}

/// `(xi, mu, sigma)` from PWMs. The shape is clamped to `[-0.45, 0.9]` so the
/// result is always a usable optimizer start.
pub fn pwm_gev(data: &[f64]) -> (f64, f64, f64) {
    let [b0, b1, b2] = sample_pwm(data);
    let l2 = 2.0 * b1 - b0;
    if !(l2 > 0.0) {
        // degenerate sample (all ties): unit-width Gumbel around the mean
        return (0.0, b0, b0.abs().max(1.0) * 1e-3);
    }
    let c = l2 / (3.0 * b2 - b0) - std::f64::consts::LN_2 / 3f64.ln();
    let kappa = (7.8590 * c + 2.9554 * c * c).clamp(-0.9, 0.45);
    if kappa.abs() < 1e-6 {
        let sigma = l2 / std::f64::consts::LN_2;
        return (0.0, b0 - EULER_GAMMA * sigma, sigma);
    }
    let g = gamma(1.0 + kappa);
    let sigma = l2 * kappa / (g * (1.0 - 2f64.powf(-kappa)));
    let mu = b0 + sigma * (g - 1.0) / kappa;
    (-kappa, mu, sigma)
}
