use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Functional form of a covariate-dependent parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamForm {
    Constant,
    Linear,
    Exponential,
}

impl ParamForm {
    pub fn n_coefficients(self) -> usize {
        match self {
            ParamForm::Constant => 1,
            ParamForm::Linear | ParamForm::Exponential => 2,
        }
    }

    /// Whether a model of form `self` is a special case of form `other`.
    pub fn nested_in(self, other: ParamForm) -> bool {
        self == other || self == ParamForm::Constant
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamForm::Constant => "constant",
            ParamForm::Linear => "linear",
            ParamForm::Exponential => "exponential",
        }
    }
}

impl fmt::Display for ParamForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" | "const" => Ok(ParamForm::Constant),
            "linear" => Ok(ParamForm::Linear),
            "exponential" | "exp" => Ok(ParamForm::Exponential),
            other => Err(format!(
                "unknown parameter form `{other}` (expected constant, linear or exponential)"
            )),
        }
    }
}

/// A location or scale parameter as a function of the covariate `t`.
///
/// - `Constant(c0)`: `c0`
/// - `Linear(c0, c1)`: `c0 + c1 t`
/// - `Exponential(c0, c1)`: `exp(c0 + c1 t)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamModel {
    Constant(f64),
    Linear(f64, f64),
    Exponential(f64, f64),
}

impl ParamModel {
    pub fn form(&self) -> ParamForm {
        match self {
            ParamModel::Constant(_) => ParamForm::Constant,
            ParamModel::Linear(..) => ParamForm::Linear,
            ParamModel::Exponential(..) => ParamForm::Exponential,
        }
    }

    pub fn from_coefficients(form: ParamForm, c: &[f64]) -> Self {
        match form {
            ParamForm::Constant => ParamModel::Constant(c[0]),
            ParamForm::Linear => ParamModel::Linear(c[0], c[1]),
            ParamForm::Exponential => ParamModel::Exponential(c[0], c[1]),
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match *self {
            ParamModel::Constant(c0) => vec![c0],
            ParamModel::Linear(c0, c1) | ParamModel::Exponential(c0, c1) => vec![c0, c1],
        }
    }

    /// Intercept coefficient `c0`.
    pub fn intercept(&self) -> f64 {
        match *self {
            ParamModel::Constant(c0) | ParamModel::Linear(c0, _) | ParamModel::Exponential(c0, _) => c0,
        }
    }

    /// Trend coefficient `c1`; zero for a constant model.
    pub fn trend(&self) -> f64 {
        match *self {
            ParamModel::Constant(_) => 0.0,
            ParamModel::Linear(_, c1) | ParamModel::Exponential(_, c1) => c1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ParamModel::Constant(c0) => c0,
            ParamModel::Linear(c0, c1) => c0 + c1 * t,
            ParamModel::Exponential(c0, c1) => (c0 + c1 * t).exp(),
        }
    }

    /// Multiplies the whole function by `factor > 0`.
    ///
    /// For the exponential form this shifts the exponent intercept by
    /// `ln(factor)` and leaves the trend unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            ParamModel::Constant(c0) => ParamModel::Constant(factor * c0),
            ParamModel::Linear(c0, c1) => ParamModel::Linear(factor * c0, factor * c1),
            ParamModel::Exponential(c0, c1) => ParamModel::Exponential(c0 + factor.ln(), c1),
        }
    }
}

impl fmt::Display for ParamModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamModel::Constant(c0) => write!(f, "{c0}"),
            ParamModel::Linear(c0, c1) => write!(f, "{c0} + {c1}*t"),
            ParamModel::Exponential(c0, c1) => write!(f, "exp({c0} + {c1}*t)"),
        }
    }
}

/// Nonstationary GEV: constant shape with covariate-dependent location and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevModel {
    pub shape: f64,
    pub location: ParamModel,
    pub scale: ParamModel,
    /// Set when the shape was held fixed during fitting.
    pub shape_fixed: bool,
}

impl GevModel {
    pub fn stationary(shape: f64, location: f64, scale: f64) -> Self {
        Self {
            shape,
            location: ParamModel::Constant(location),
            scale: ParamModel::Constant(scale),
            shape_fixed: false,
        }
    }

    /// `(mu(t), sigma(t), xi)`.
    pub fn evaluate_params(&self, t: f64) -> Result<(f64, f64, f64)> {
        let sigma = self.scale.eval(t);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::ScaleCollapse { t, sigma });
        }
        Ok((self.location.eval(t), sigma, self.shape))
    }

    /// Whether `sigma(t) > 0` at every covariate in `ts`.
    pub fn scale_positive_on(&self, ts: &[f64]) -> bool {
        ts.iter().all(|&t| {
            let s = self.scale.eval(t);
            s > 0.0 && s.is_finite()
        })
    }

    pub fn cdf(&self, z: f64, t: f64) -> Result<f64> {
        let (mu, sigma, xi) = self.evaluate_params(t)?;
        Ok(super::dist::cdf_unchecked(z, xi, mu, sigma))
    }

    pub fn quantile(&self, p: f64, t: f64) -> Result<f64> {
        let (mu, sigma, xi) = self.evaluate_params(t)?;
        super::dist::gev_quantile(p, xi, mu, sigma)
    }
}

/// Free-function form of [`GevModel::evaluate_params`].
pub fn evaluate_params(model: &GevModel, t: f64) -> Result<(f64, f64, f64)> {
    model.evaluate_params(t)
}
