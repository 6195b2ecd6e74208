//! Synthetic processes with known extremal behaviour.
//!
//! # Random numbers
//!
//! All generators draw from xoshiro256++ (Blackman & Vigna), seeded by
//! expanding the 64-bit seed through SplitMix64 into the four state words
//! `s0..s3`. One step produces `rotl(s0 + s3, 23) + s0` and then updates
//!
//! ```text
//! t = s1 << 17
//! s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//! ```
//!
//! A 64-bit output `x` maps to the open unit interval as
//! `((x >> 11) + 0.5) * 2^-53`, so a uniform draw is never exactly 0 or 1.
//! Unit-Fréchet variates are `-1 / ln(u)`.
//!
//! # Processes
//!
//! - `IidGev`: independent GEV observations, extremal index 1.
//! - `MovingMax { order: r }`: `max(e_i, ..., e_{i+r}) / (r + 1)` for iid unit
//!   Fréchet `e`; unit-Fréchet margins and extremal index `1 / (r + 1)`.
//! - `MaxAutoregressive { phi }`: `X_i = max(phi X_{i-1}, (1 - phi) e_i)`, unit
//!   Fréchet margins and extremal index `1 - phi`. A single large shock decays
//!   geometrically, so `k` successive exceedances occur with probability
//!   shrinking like `phi^(k-1)`.
//!
//! Dependent processes are mapped to the requested GEV margin through the
//! probability integral transform, `x = mu(t) + sigma(t) (W^xi - 1) / xi`.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::gev::{GevModel, ParamModel};
use crate::series::TimeSeries;

/// Seeded source of uniform variates on `(0, 1)`.
#[derive(Debug, Clone)]
pub struct UniformSource {
    rng: Xoshiro256PlusPlus,
}

impl UniformSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn unit_frechet(&mut self) -> f64 {
        -1.0 / self.open01().ln()
    }

    /// Standard normal draw (Box–Muller, one of the pair).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.open01();
        let u2 = self.open01();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Dependence structure of a synthetic series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Process {
    IidGev,
    MovingMax { order: usize },
    MaxAutoregressive { phi: f64 },
}

impl Process {
    /// Extremal index of the process.
    pub fn extremal_index(&self) -> f64 {
        match *self {
            Process::IidGev => 1.0,
            Process::MovingMax { order } => 1.0 / (order as f64 + 1.0),
            Process::MaxAutoregressive { phi } => 1.0 - phi,
        }
    }
}

/// Full description of a synthetic series; the seed fixes the output.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub process: Process,
    pub shape: f64,
    pub location: ParamModel,
    pub scale: ParamModel,
    pub n: usize,
    pub seed: u64,
    /// Covariates are `t0 + i (t1 - t0) / n` for `i = 0..n`.
    pub covariate_range: (f64, f64),
}

impl SyntheticSpec {
    pub fn iid(shape: f64, location: f64, scale: f64, n: usize, seed: u64) -> Self {
        Self {
            process: Process::IidGev,
            shape,
            location: ParamModel::Constant(location),
            scale: ParamModel::Constant(scale),
            n,
            seed,
            covariate_range: (0.0, 1.0),
        }
    }

    pub fn margin(&self) -> GevModel {
        GevModel {
            shape: self.shape,
            location: self.location,
            scale: self.scale,
            shape_fixed: false,
        }
    }

    fn covariates(&self) -> Vec<f64> {
        let (t0, t1) = self.covariate_range;
        let step = (t1 - t0) / self.n as f64;
        (0..self.n).map(|i| t0 + i as f64 * step).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Spec("length must be positive".into()));
        }
        let (t0, t1) = self.covariate_range;
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(Error::Spec(format!("bad covariate range ({t0}, {t1})")));
        }
        if !self.shape.is_finite() {
            return Err(Error::Spec("shape must be finite".into()));
        }
        if let Process::MaxAutoregressive { phi } = self.process {
            if !(0.0..1.0).contains(&phi) {
                return Err(Error::Spec(format!("phi must lie in [0, 1), got {phi}")));
            }
        }
        if !self.margin().scale_positive_on(&self.covariates()) {
            return Err(Error::Spec("scale is not positive over the covariate range".into()));
        }
        Ok(())
    }
}

/// Unit-Fréchet series with the requested dependence.
fn unit_frechet_process(process: Process, n: usize, rng: &mut UniformSource) -> Vec<f64> {
    match process {
        Process::IidGev => (0..n).map(|_| rng.unit_frechet()).collect(),
        Process::MovingMax { order } => {
            let eps: Vec<f64> = (0..n + order).map(|_| rng.unit_frechet()).collect();
            let norm = (order + 1) as f64;
            eps.windows(order + 1)
                .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max) / norm)
                .collect()
        }
        Process::MaxAutoregressive { phi } => {
            let mut out = Vec::with_capacity(n);
            let mut x = rng.unit_frechet();
            for _ in 0..n {
                x = f64::max(phi * x, (1.0 - phi) * rng.unit_frechet());
                out.push(x);
            }
            out
        }
    }
}

/// GEV quantile at the probability level `exp(-1/w)` of a unit-Fréchet value,
/// computed without forming the probability.
pub fn frechet_to_gev(w: f64, xi: f64, mu: f64, sigma: f64) -> f64 {
    let lw = w.ln();
    if xi.abs() < crate::gev::dist::GUMBEL_EPS {
        mu + sigma * lw
    } else {
        mu + sigma * (xi * lw).exp_m1() / xi
    }
}

/// Draws a synthetic series with GEV margins `GEV(xi, mu(t), sigma(t))`.
pub fn sample_gev(spec: &SyntheticSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let t = spec.covariates();
    let mut rng = UniformSource::new(spec.seed);
    let w = unit_frechet_process(spec.process, spec.n, &mut rng);
    let values = w
        .iter()
        .zip(&t)
        .map(|(&w, &ti)| frechet_to_gev(w, spec.shape, spec.location.eval(ti), spec.scale.eval(ti)))
        .collect();
    TimeSeries::new(t, values)
}

/// `max(e_i, ..., e_{i+r})` for iid unit-Fréchet `e`, unnormalized, with
/// covariates `i / n`.
pub fn sample_moving_max(n: usize, order: usize, seed: u64) -> TimeSeries {
    let mut rng = UniformSource::new(seed);
    let eps: Vec<f64> = (0..n + order).map(|_| rng.unit_frechet()).collect();
    let values = eps
        .windows(order + 1)
        .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let t = (0..n).map(|i| i as f64 / n as f64).collect();
    TimeSeries::new(t, values).expect("generated series is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::dist::{cdf_unchecked, EULER_GAMMA};

    #[test]
    fn uniform_is_open_and_deterministic() {
        let mut a = UniformSource::new(7);
        let mut b = UniformSource::new(7);
        for _ in 0..1000 {
            let u = a.open01();
            assert!(u > 0.0 && u < 1.0);
            assert_eq!(u, b.open01());
        }
        assert_ne!(UniformSource::new(1).next_u64(), UniformSource::new(2).next_u64());
    }

    #[test]
    fn same_seed_same_series() {
        let spec = SyntheticSpec::iid(0.2, 10.0, 2.0, 500, 42);
        assert_eq!(sample_gev(&spec).unwrap(), sample_gev(&spec).unwrap());
        let other = SyntheticSpec { seed: 43, ..spec.clone() };
        assert_ne!(sample_gev(&spec).unwrap(), sample_gev(&other).unwrap());
    }

    #[test]
    fn gumbel_sample_mean() {
        let n = 100_000;
        let (mu, sigma) = (3.0, 2.0);
        let s = sample_gev(&SyntheticSpec::iid(0.0, mu, sigma, n, 11)).unwrap();
        let mean = s.values().iter().sum::<f64>() / n as f64;
        let sd = sigma * std::f64::consts::PI / 6f64.sqrt();
        let bound = 3.0 * sd / (n as f64).sqrt() * 1.3;
        assert!((mean - (mu + sigma * EULER_GAMMA)).abs() < bound, "mean {mean}");
    }

    #[test]
    fn moving_max_margins_are_unit_frechet() {
        let spec = SyntheticSpec {
            process: Process::MovingMax { order: 2 },
            ..SyntheticSpec::iid(0.5, 0.0, 1.0, 50_000, 3)
        };
        let s = sample_gev(&spec).unwrap();
        // fraction below the GEV median should be one half
        let med = crate::gev::dist::quantile_unchecked(0.5, 0.5, 0.0, 1.0);
        let frac = s.values().iter().filter(|&&x| x <= med).count() as f64 / 50_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn max_autoregressive_margin() {
        let spec = SyntheticSpec {
            process: Process::MaxAutoregressive { phi: 0.6 },
            ..SyntheticSpec::iid(0.2, 0.0, 1.0, 100_000, 5)
        };
        let s = sample_gev(&spec).unwrap();
        for &z in &[-0.5, 0.0, 1.0, 3.0] {
            let emp = s.values().iter().filter(|&&x| x <= z).count() as f64 / 100_000.0;
            assert!((emp - cdf_unchecked(z, 0.2, 0.0, 1.0)).abs() < 0.02, "z={z} emp={emp}");
        }
        assert_eq!(spec.process.extremal_index(), 0.4);
    }

    #[test]
    fn frechet_transform_matches_quantile() {
        for &w in &[0.3, 1.0, 7.5, 1e3] {
            let p = (-1.0f64 / w).exp();
            for &xi in &[0.0, 0.2, -0.3] {
                let q = crate::gev::dist::quantile_unchecked(p, xi, 2.0, 1.5);
                assert!((frechet_to_gev(w, xi, 2.0, 1.5) - q).abs() < 1e-9 * (1.0 + q.abs()));
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad_scale = SyntheticSpec {
            scale: ParamModel::Linear(1.0, -1.0),
            covariate_range: (0.0, 5.0),
            ..SyntheticSpec::iid(0.1, 0.0, 1.0, 10, 1)
        };
        assert!(matches!(sample_gev(&bad_scale), Err(Error::Spec(_))));
        let bad_phi = SyntheticSpec {
            process: Process::MaxAutoregressive { phi: 1.0 },
            ..SyntheticSpec::iid(0.1, 0.0, 1.0, 10, 1)
        };
        assert!(sample_gev(&bad_phi).is_err());
        assert!(sample_gev(&SyntheticSpec::iid(0.1, 0.0, 1.0, 0, 1)).is_err());
    }

    #[test]
    fn moving_max_order_zero_is_iid_frechet() {
        let s = sample_moving_max(1000, 0, 9);
        let mut rng = UniformSource::new(9);
        for &x in s.values().iter().take(10) {
            assert_eq!(x, rng.unit_frechet());
        }
    }
}
