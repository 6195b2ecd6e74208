use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::gev::ParamForm;
use crate::scaling::{Response, ThetaExtrapolation};

/// How the Fréchet-type precondition on the single-extreme shape is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrechetCheck {
    /// The lower 95% limit of the shape must be positive.
    Strict,
    /// The point estimate must be positive.
    Point,
}

/// Settings for the full workflow. Every field has a default; a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowConfig {
    /// Observations per block (default 10).
    pub block_length: usize,
    /// Largest window size fitted directly (default 15).
    pub k_max: usize,
    /// Largest window size reported; windows above the fitting horizon are
    /// inferred through the scaling law (default 20).
    pub k_report: usize,
    /// Window sizes above this carry an extrapolation warning (default none).
    pub k_cap: Option<usize>,
    /// Quantile level of the moving threshold (default 0.95).
    pub threshold_quantile: f64,
    /// Covariate span of the moving threshold window (default 1).
    pub threshold_window: f64,
    /// Location form: constant, linear or exponential (default linear).
    pub location_form: ParamForm,
    /// Scale form (default exponential).
    pub scale_form: ParamForm,
    /// Scaling form name or `auto` (default auto).
    pub scaling_form: String,
    /// `adjusted` or `unadjusted` (default adjusted).
    pub scaling_response: Response,
    /// Inverse-variance weighted scaling regression (default false).
    pub scaling_weighted: bool,
    /// `flat` or `linear` (default flat).
    pub theta_extrapolation: ThetaExtrapolation,
    /// Smallest fitting horizon used when diagnostics stop earlier (default 3).
    pub kf_min: usize,
    /// Grid points per coefficient interval (default 10).
    pub samples_per_param: usize,
    /// Normal quantile for coefficient intervals (default 1.96).
    pub ci_z: f64,
    /// Future horizons, in covariate units from the end of the data (default [10, 20]).
    pub horizons: Vec<f64>,
    /// Return periods in blocks (default [10, 50, 100]).
    pub return_periods: Vec<f64>,
    /// Quantile levels for the quantile table (default [0.25, 0.5, 0.75, 0.95]).
    pub quantile_probs: Vec<f64>,
    /// Covariate, after shifting the first block to 0, at which return
    /// periods and quantiles are evaluated (default 1).
    pub anchor_t: f64,
    /// Blocks per covariate unit; estimated from the data when absent.
    pub blocks_per_unit: Option<f64>,
    /// Level of the stationarity likelihood-ratio test (default 0.05).
    pub lr_alpha: f64,
    /// Use constant forms when the trend is not significant (default true).
    pub stationary_fallback: bool,
    /// Level of the goodness-of-fit checks bounding the fitting horizon (default 0.05).
    pub gof_alpha: f64,
    /// `strict` or `point` (default strict).
    pub frechet_check: FrechetCheck,
    /// Autocorrelation lags reported (default 20).
    pub acf_lags: usize,
    /// Remove zero observations before analysis (default false).
    pub drop_zeros: bool,
    /// Optimizer restarts per fit (default 5).
    pub fit_restarts: usize,
    /// Seed for optimizer restarts (default 1).
    pub seed: u64,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            block_length: 10,
            k_max: 15,
            k_report: 20,
            k_cap: None,
            threshold_quantile: 0.95,
            threshold_window: 1.0,
            location_form: ParamForm::Linear,
            scale_form: ParamForm::Exponential,
            scaling_form: "auto".into(),
            scaling_response: Response::ThetaAdjusted,
            scaling_weighted: false,
            theta_extrapolation: ThetaExtrapolation::Flat,
            kf_min: 3,
            samples_per_param: 10,
            ci_z: 1.96,
            horizons: vec![10.0, 20.0],
            return_periods: vec![10.0, 50.0, 100.0],
            quantile_probs: vec![0.25, 0.5, 0.75, 0.95],
            anchor_t: 1.0,
            blocks_per_unit: None,
            lr_alpha: 0.05,
            stationary_fallback: true,
            gof_alpha: 0.05,
            frechet_check: FrechetCheck::Strict,
            acf_lags: 20,
            drop_zeros: false,
            fit_restarts: 5,
            seed: 1,
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, format!("expected a number, got {v}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, format!("expected true or false, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, format!("expected a string, got {v}")))
}

fn as_list(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        _ => Ok(vec![as_f64(key, v)?]),
    }
}

impl WorkflowConfig {
    /// Reads a TOML file of flat `key = value` pairs.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_toml(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` pairs on top of the current settings.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            bad("<file>", e.message().to_string())
        })?;
        for (key, value) in &table {
            self.set(key, value)?;
        }
        self.validate()
    }

    /// Applies command-line overrides of the form `key=value`. Values that are
    /// not valid TOML are taken as strings.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| bad(o, "override must look like key=value"))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = format!("v = {raw}")
                .parse::<Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| Value::String(raw.to_string()));
            self.set(key, &value)?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let form = |v: &Value| -> Result<ParamForm> {
            as_str(key, v)?.parse().map_err(|e: String| bad(key, e))
        };
        match key {
            "block_length" => self.block_length = as_usize(key, v)?,
            "k_max" => self.k_max = as_usize(key, v)?,
            "k_report" => self.k_report = as_usize(key, v)?,
            "k_cap" => self.k_cap = Some(as_usize(key, v)?),
            "threshold_quantile" => self.threshold_quantile = as_f64(key, v)?,
            "threshold_window" => self.threshold_window = as_f64(key, v)?,
            "location_form" => self.location_form = form(v)?,
            "scale_form" => self.scale_form = form(v)?,
            "scaling_form" => self.scaling_form = as_str(key, v)?.to_string(),
            "scaling_response" => {
                self.scaling_response = match as_str(key, v)? {
                    "adjusted" => Response::ThetaAdjusted,
                    "unadjusted" => Response::Unadjusted,
                    s => return Err(bad(key, format!("unknown response `{s}` (adjusted, unadjusted)"))),
                }
            }
            "scaling_weighted" => self.scaling_weighted = as_bool(key, v)?,
            "theta_extrapolation" => {
                self.theta_extrapolation = as_str(key, v)?.parse().map_err(|e: String| bad(key, e))?
            }
            "kf_min" => self.kf_min = as_usize(key, v)?,
            "samples_per_param" => self.samples_per_param = as_usize(key, v)?,
            "ci_z" => self.ci_z = as_f64(key, v)?,
            "horizons" => self.horizons = as_list(key, v)?,
            "return_periods" => self.return_periods = as_list(key, v)?,
            "quantile_probs" => self.quantile_probs = as_list(key, v)?,
            "anchor_t" => self.anchor_t = as_f64(key, v)?,
            "blocks_per_unit" => self.blocks_per_unit = Some(as_f64(key, v)?),
            "lr_alpha" => self.lr_alpha = as_f64(key, v)?,
            "stationary_fallback" => self.stationary_fallback = as_bool(key, v)?,
            "gof_alpha" => self.gof_alpha = as_f64(key, v)?,
            "frechet_check" => {
                self.frechet_check = match as_str(key, v)? {
                    "strict" => FrechetCheck::Strict,
                    "point" => FrechetCheck::Point,
                    s => return Err(bad(key, format!("unknown check `{s}` (strict, point)"))),
                }
            }
            "acf_lags" => self.acf_lags = as_usize(key, v)?,
            "drop_zeros" => self.drop_zeros = as_bool(key, v)?,
            "fit_restarts" => self.fit_restarts = as_usize(key, v)?,
            "seed" => {
                self.seed = match v {
                    Value::Integer(i) if *i >= 0 => *i as u64,
                    _ => return Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
                }
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks ranges of every numeric field.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(bad(key, format!("must be positive, got {x}")))
            }
        };
        let unit = |key: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(bad(key, format!("must lie in (0, 1), got {x}")))
            }
        };
        if self.block_length == 0 {
            return Err(bad("block_length", "must be at least 1"));
        }
        if self.k_max == 0 {
            return Err(bad("k_max", "must be at least 1"));
        }
        if self.k_report < self.k_max {
            return Err(bad("k_report", format!("must be at least k_max = {}", self.k_max)));
        }
        if self.k_cap == Some(0) {
            return Err(bad("k_cap", "must be at least 1"));
        }
        unit("threshold_quantile", self.threshold_quantile)?;
        positive("threshold_window", self.threshold_window)?;
        if self.scaling_form != "auto"
            && crate::scaling::FormRegistry::builtin().get(&self.scaling_form).is_none()
        {
            return Err(bad(
                "scaling_form",
                format!(
                    "unknown form `{}` (auto, {})",
                    self.scaling_form,
                    crate::scaling::FormRegistry::builtin().names().join(", ")
                ),
            ));
        }
        if self.kf_min == 0 {
            return Err(bad("kf_min", "must be at least 1"));
        }
        if self.samples_per_param < 2 {
            return Err(bad("samples_per_param", "must be at least 2"));
        }
        positive("ci_z", self.ci_z)?;
        for &h in &self.horizons {
            positive("horizons", h)?;
        }
        for &p in &self.return_periods {
            if !(p > 1.0 && p.is_finite()) {
                return Err(bad("return_periods", format!("must exceed 1 block, got {p}")));
            }
        }
        for &p in &self.quantile_probs {
            unit("quantile_probs", p)?;
        }
        if self.quantile_probs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("quantile_probs", "must be strictly increasing"));
        }
        if !self.anchor_t.is_finite() {
            return Err(bad("anchor_t", "must be finite"));
        }
        if let Some(b) = self.blocks_per_unit {
            positive("blocks_per_unit", b)?;
        }
        unit("lr_alpha", self.lr_alpha)?;
        unit("gof_alpha", self.gof_alpha)?;
        Ok(())
    }

    /// The settings as `key = value` lines, in declaration order.
    pub fn to_toml(&self) -> String {
        let list = |v: &[f64]| {
            format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "))
        };
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("block_length", self.block_length.to_string());
        line("k_max", self.k_max.to_string());
        line("k_report", self.k_report.to_string());
        if let Some(c) = self.k_cap {
            line("k_cap", c.to_string());
        }
        line("threshold_quantile", format!("{:?}", self.threshold_quantile));
        line("threshold_window", format!("{:?}", self.threshold_window));
        line("location_form", format!("\"{}\"", self.location_form));
        line("scale_form", format!("\"{}\"", self.scale_form));
        line("scaling_form", format!("\"{}\"", self.scaling_form));
        line(
            "scaling_response",
            match self.scaling_response {
                Response::ThetaAdjusted => "\"adjusted\"".into(),
                Response::Unadjusted => "\"unadjusted\"".into(),
            },
        );
        line("scaling_weighted", self.scaling_weighted.to_string());
        line(
            "theta_extrapolation",
            match self.theta_extrapolation {
                ThetaExtrapolation::Flat => "\"flat\"".into(),
                ThetaExtrapolation::Linear => "\"linear\"".into(),
            },
        );
        line("kf_min", self.kf_min.to_string());
        line("samples_per_param", self.samples_per_param.to_string());
        line("ci_z", format!("{:?}", self.ci_z));
        line("horizons", list(&self.horizons));
        line("return_periods", list(&self.return_periods));
        line("quantile_probs", list(&self.quantile_probs));
        line("anchor_t", format!("{:?}", self.anchor_t));
        if let Some(b) = self.blocks_per_unit {
            line("blocks_per_unit", format!("{b:?}"));
        }
        line("lr_alpha", format!("{:?}", self.lr_alpha));
        line("stationary_fallback", self.stationary_fallback.to_string());
        line("gof_alpha", format!("{:?}", self.gof_alpha));
        line(
            "frechet_check",
            match self.frechet_check {
                FrechetCheck::Strict => "\"strict\"".into(),
                FrechetCheck::Point => "\"point\"".into(),
            },
        );
        line("acf_lags", self.acf_lags.to_string());
        line("drop_zeros", self.drop_zeros.to_string());
        line("fit_restarts", self.fit_restarts.to_string());
        line("seed", self.seed.to_string());
        s
    }
}
