//! Comparison of estimation methods on a short run against a long-run reference.
//!
//! Each method turns a prepared short run into a GEV model per window size.
//! Methods live in a [`MethodRegistry`] and are looked up by name.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gev::{fit_mle_with, gumbel_normalize, FitOptions, FitResult, GevModel, ParamForm};
use crate::series::{block_maxima, moving_minimum, BlockMaxSeries, TimeSeries};
use crate::workflow::{run_analysis, Analysis, WorkflowConfig};

type Outcome<T> = std::result::Result<T, String>;

/// Short-run data shared by every method.
#[derive(Debug)]
pub struct ShortRun {
    pub config: WorkflowConfig,
    /// Series with the first block covariate at 0.
    pub series: TimeSeries,
    pub origin: f64,
    pub forms: (ParamForm, ParamForm),
    /// Single-extreme shape used by fixed-shape fits.
    pub xi1: Outcome<f64>,
    /// Full workflow analysis, with `k_report` covering every compared window.
    pub analysis: Outcome<Analysis>,
    options: FitOptions,
}

impl ShortRun {
    pub fn prepare(series: &TimeSeries, config: &WorkflowConfig, k_list: &[usize]) -> Result<Self> {
        let mut config = config.clone();
        let k_top = k_list.iter().copied().max().unwrap_or(1);
        config.k_report = config.k_report.max(k_top).max(config.k_max);
        config.validate()?;
        let origin = block_maxima(series, config.block_length)?.block_covariates()[0];
        let series = series.shifted(origin);
        let options = crate::workflow::fit_options(&config);
        let analysis = run_analysis(&config, &series).map_err(|e| e.to_string());
        let (forms, xi1) = match &analysis {
            Ok(a) => (a.forms, Ok(a.xi1)),
            Err(_) => {
                let forms = (config.location_form, config.scale_form);
                let xi1 = block_maxima(&series, config.block_length)
                    .and_then(|b| fit_mle_with(&b, forms.0, forms.1, None, &options))
                    .map_err(|e| e.to_string())
                    .and_then(usable)
                    .map(|f| f.model.shape);
                (forms, xi1)
            }
        };
        Ok(Self {
            config,
            series,
            origin,
            forms,
            xi1,
            analysis,
            options,
        })
    }

    /// Block maxima of the window-`k` moving minimum.
    pub fn maxima(&self, k: usize) -> Outcome<BlockMaxSeries> {
        moving_minimum(&self.series, k)
            .and_then(|y| block_maxima(&y, self.config.block_length))
            .map_err(|e| e.to_string())
    }

    fn fit(&self, k: usize, fixed_shape: Option<f64>) -> Outcome<GevModel> {
        let m = self.maxima(k)?;
        fit_mle_with(&m, self.forms.0, self.forms.1, fixed_shape, &self.options)
            .map_err(|e| e.to_string())
            .and_then(usable)
            .map(|f| f.model)
    }
}

fn usable(f: FitResult) -> Outcome<FitResult> {
    if !f.converged {
        Err("fit did not converge".into())
    } else if f.standard_errors.is_none() {
        Err("standard errors unavailable".into())
    } else {
        Ok(f)
    }
}

pub trait EstimationMethod: Send + Sync {
    fn name(&self) -> &str;
    fn estimate(&self, run: &ShortRun, k: usize) -> Outcome<GevModel>;
}

/// Fixed shape up to the fitting horizon, scaling-law inference beyond it.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullProposed;

/// Maximum likelihood with the shape held at the single-extreme estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedShapeMle;

/// Maximum likelihood with every parameter free.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainMle;

impl EstimationMethod for FullProposed {
    fn name(&self) -> &str {
        "full_proposed"
    }

    fn estimate(&self, run: &ShortRun, k: usize) -> Outcome<GevModel> {
        let a = run.analysis.as_ref().map_err(|e| e.clone())?;
        a.model(k)
            .map(|m| m.model.clone())
            .ok_or_else(|| format!("no model for k={k} (fitting horizon {})", a.k_f))
    }
}

impl EstimationMethod for FixedShapeMle {
    fn name(&self) -> &str {
        "fixed_shape_mle"
    }

    fn estimate(&self, run: &ShortRun, k: usize) -> Outcome<GevModel> {
        let xi = run.xi1.clone()?;
        run.fit(k, Some(xi))
    }
}

impl EstimationMethod for PlainMle {
    fn name(&self) -> &str {
        "plain_mle"
    }

    fn estimate(&self, run: &ShortRun, k: usize) -> Outcome<GevModel> {
        run.fit(k, None)
    }
}

#[derive(Clone, Default)]
pub struct MethodRegistry {
    methods: Vec<Arc<dyn EstimationMethod>>,
}

impl std::fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FullProposed));
        r.register(Arc::new(FixedShapeMle));
        r.register(Arc::new(PlainMle));
        r
    }

    /// Adds a method, replacing any existing one with the same name.
    pub fn register(&mut self, method: Arc<dyn EstimationMethod>) {
        match self.methods.iter().position(|m| m.name() == method.name()) {
            Some(i) => self.methods[i] = method,
            None => self.methods.push(method),
        }
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn EstimationMethod>> {
        self.methods.iter().find(|m| m.name() == name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn EstimationMethod>> {
        self.methods.iter()
    }
}

/// Reference models per window size, in the covariate frame of the short run.
#[derive(Debug, Clone)]
pub struct Reference {
    pub models: Vec<(usize, Outcome<GevModel>)>,
}

impl Reference {
    /// Known models, e.g. the generating process of a simulation.
    pub fn known(models: Vec<(usize, GevModel)>) -> Self {
        Self {
            models: models.into_iter().map(|(k, m)| (k, Ok(m))).collect(),
        }
    }

    /// Fixed-shape fits per window on a long run, shape from its single-extreme
    /// fit. The long run must start where the short run starts.
    pub fn long_run(series: &TimeSeries, config: &WorkflowConfig, k_list: &[usize]) -> Result<Self> {
        let origin = block_maxima(series, config.block_length)?.block_covariates()[0];
        let series = series.shifted(origin);
        let options = crate::workflow::fit_options(config);
        let forms = (config.location_form, config.scale_form);
        let b1 = block_maxima(&series, config.block_length)?;
        let xi1 = fit_mle_with(&b1, forms.0, forms.1, None, &options)?.model.shape;
        let models = k_list
            .par_iter()
            .map(|&k| {
                let fit = moving_minimum(&series, k)
                    .and_then(|y| block_maxima(&y, config.block_length))
                    .and_then(|b| fit_mle_with(&b, forms.0, forms.1, Some(xi1), &options))
                    .map_err(|e| e.to_string())
                    .and_then(usable)
                    .map(|f| f.model);
                (k, fit)
            })
            .collect();
        Ok(Self { models })
    }

    pub fn model(&self, k: usize) -> Option<&Outcome<GevModel>> {
        self.models.iter().find(|(j, _)| *j == k).map(|(_, m)| m)
    }
}

/// Absolute parameter errors at the anchor covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamErrors {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl ParamErrors {
    pub fn mean(&self) -> f64 {
        (self.location + self.scale + self.shape) / 3.0
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub model: GevModel,
    /// `None` when the reference for this window is unavailable.
    pub errors: Option<ParamErrors>,
    /// Gumbel-normalized block maxima against empirical return periods,
    /// `(period, normalized level)` in increasing order.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub method: String,
    pub k: usize,
    pub outcome: Outcome<Estimate>,
}

#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub anchor_t: f64,
    pub k_f: Option<usize>,
    pub methods: Vec<String>,
    pub cells: Vec<Cell>,
}

impl MethodComparison {
    pub fn cell(&self, method: &str, k: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && c.k == k)
    }

    pub fn errors(&self, method: &str, k: usize) -> Option<ParamErrors> {
        self.cell(method, k)?.outcome.as_ref().ok()?.errors
    }

    pub fn succeeded(&self, method: &str, k: usize) -> bool {
        self.cell(method, k).is_some_and(|c| c.outcome.is_ok())
    }
}

/// Empirical return periods `1 / (1 - i / (n + 1))` against sorted values.
pub fn empirical_curve(mut values: Vec<f64>) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (1.0 / (1.0 - (i + 1) as f64 / (n + 1.0)), v))
        .collect()
}

fn errors_at(model: &GevModel, reference: &GevModel, t: f64) -> Result<ParamErrors> {
    let (m1, s1, x1) = model.evaluate_params(t)?;
    let (m0, s0, x0) = reference.evaluate_params(t)?;
    Ok(ParamErrors {
        location: (m1 - m0).abs(),
        scale: (s1 - s0).abs(),
        shape: (x1 - x0).abs(),
    })
}

/// Evaluates every registered method at every `k` on the same short run.
pub fn compare_methods(
    run: &ShortRun,
    reference: &Reference,
    k_list: &[usize],
    registry: &MethodRegistry,
    anchor_t: f64,
) -> Result<MethodComparison> {
    if k_list.is_empty() {
        return Err(Error::InvalidWindow);
    }
    let jobs: Vec<(Arc<dyn EstimationMethod>, usize)> = registry
        .iter()
        .flat_map(|m| k_list.iter().map(move |&k| (m.clone(), k)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|(method, k)| {
            let outcome = method.estimate(run, *k).and_then(|model| {
                let errors = match reference.model(*k) {
                    Some(Ok(r)) => Some(errors_at(&model, r, anchor_t).map_err(|e| e.to_string())?),
                    _ => None,
                };
                let curve = run
                    .maxima(*k)
                    .and_then(|b| gumbel_normalize(&b, &model).map_err(|e| e.to_string()))
                    .map(empirical_curve)
                    .unwrap_or_default();
                Ok(Estimate { model, errors, curve })
            });
            Cell {
                method: method.name().to_string(),
                k: *k,
                outcome,
            }
        })
        .collect();
    Ok(MethodComparison {
        anchor_t,
        k_f: run.analysis.as_ref().ok().map(|a| a.k_f),
        methods: registry.names().into_iter().map(String::from).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::ParamModel;
    use crate::sim::{sample_gev, Process, SyntheticSpec};

    fn spec(n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            process: Process::MaxAutoregressive { phi: 0.3 },
            shape: 0.25,
            location: ParamModel::Constant(50.0),
            scale: ParamModel::Constant(5.0),
            n,
            seed,
            covariate_range: (0.0, n as f64 / 120.0),
        }
    }

    fn config() -> WorkflowConfig {
        WorkflowConfig {
            location_form: ParamForm::Constant,
            scale_form: ParamForm::Constant,
            k_max: 4,
            kf_min: 3,
            fit_restarts: 2,
            frechet_check: crate::workflow::FrechetCheck::Point,
            ..WorkflowConfig::default()
        }
    }

    #[test]
    fn registry_names_and_replace() {
        let mut r = MethodRegistry::builtin();
        assert_eq!(r.names(), ["full_proposed", "fixed_shape_mle", "plain_mle"]);
        r.register(Arc::new(PlainMle));
        assert_eq!(r.names().len(), 3);
        assert!(r.get("plain_mle").is_some() && r.get("bayes").is_none());
    }

    #[test]
    fn empirical_periods_increase() {
        let c = empirical_curve(vec![3.0, 1.0, 2.0]);
        assert_eq!(c.iter().map(|p| p.1).collect::<Vec<_>>(), [1.0, 2.0, 3.0]);
        assert!((c[0].0 - 4.0 / 3.0).abs() < 1e-12 && (c[2].0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn self_reference_gives_zero_plain_error() {
        let s = sample_gev(&spec(600, 3)).unwrap();
        let cfg = config();
        let ks = [1, 2, 3];
        let run = ShortRun::prepare(&s, &cfg, &ks).unwrap();
        let models: Vec<(usize, GevModel)> = ks
            .iter()
            .filter_map(|&k| PlainMle.estimate(&run, k).ok().map(|m| (k, m)))
            .collect();
        let reference = Reference::known(models);
        let cmp = compare_methods(&run, &reference, &ks, &MethodRegistry::builtin(), 1.0).unwrap();
        assert_eq!(cmp.cells.len(), 9);
        for &k in &ks {
            if let Some(e) = cmp.errors("plain_mle", k) {
                assert_eq!(e.mean(), 0.0);
            }
        }
    }

    #[test]
    fn methods_see_the_same_sample_and_report_failures() {
        let s = sample_gev(&spec(300, 5)).unwrap();
        let long = sample_gev(&spec(3000, 5)).unwrap();
        let cfg = config();
        let ks = [1, 8, 120];
        let run = ShortRun::prepare(&s, &cfg, &ks).unwrap();
        let reference = Reference::long_run(&long, &cfg, &ks).unwrap();
        let cmp = compare_methods(&run, &reference, &ks, &MethodRegistry::builtin(), 1.0).unwrap();
        // 300 points with k = 120 leave fewer than 20 blocks
        let c = cmp.cell("plain_mle", 120).unwrap();
        assert!(c.outcome.is_err());
        assert!(cmp.succeeded("full_proposed", 120), "{:?}", cmp.cell("full_proposed", 120).map(|c| c.outcome.as_ref().err()));
        for m in ["full_proposed", "fixed_shape_mle", "plain_mle"] {
            let e = cmp.cell(m, 1).unwrap().outcome.as_ref().unwrap();
            assert_eq!(e.curve.len(), 30);
        }
    }
}
