use rayon::prelude::*;

use super::config::{FrechetCheck, WorkflowConfig};
use crate::error::{Error, Result, Step};
use crate::extremal::{theta_by_window, ThetaByWindow};
use crate::gev::{fit_mle_with, likelihood_ratio, FitOptions, FitResult, GevModel, LikelihoodRatio, ParamForm};
use crate::gof::{gof_model, GofReport};
use crate::inference::{
    horizon_return_level, permutation_ci, return_level, CiTarget, GridInterval, ParamIntervals,
};
use crate::scaling::{
    extrapolate_theta, fit_scaling_with, infer_model, select_form, Candidate, FormRegistry,
    FormSelection, ScalingBase, ScalingInputs, ScalingOptions, ScalingPoint,
};
use crate::series::{autocorrelation, block_maxima, drop_zeros, moving_minimum, BlockMaxSeries, TimeSeries};

type Outcome<T> = std::result::Result<T, String>;

/// Fits for one window size.
#[derive(Debug, Clone)]
pub struct WindowFit {
    pub k: usize,
    pub maxima: Outcome<BlockMaxSeries>,
    /// Shape held at the single-extreme estimate.
    pub fixed: Outcome<FitResult>,
    /// Shape estimated freely; used for the shape-deviation diagnostic.
    pub free: Outcome<FitResult>,
    /// Goodness of fit of the fixed-shape model on Gumbel-normalized maxima.
    pub gof: Outcome<GofReport>,
}

impl WindowFit {
    /// Converged fixed-shape fit with standard errors.
    pub fn usable_fixed(&self) -> Option<&FitResult> {
        self.fixed
            .as_ref()
            .ok()
            .filter(|f| f.converged && f.standard_errors.is_some())
    }
}

/// Fixed-shape and free-shape fits of the window-`k` block maxima.
pub fn fit_window(
    series: &TimeSeries,
    k: usize,
    block_length: usize,
    forms: (ParamForm, ParamForm),
    shape: f64,
    options: &FitOptions,
) -> WindowFit {
    let maxima = moving_minimum(series, k)
        .map_err(|e| e.at(Step::B1))
        .and_then(|y| block_maxima(&y, block_length).map_err(|e| e.at(Step::B2)))
        .map_err(|e| e.to_string());
    let fit = |fixed: Option<f64>| -> Outcome<FitResult> {
        let m = maxima.as_ref().map_err(|e| e.clone())?;
        fit_mle_with(m, forms.0, forms.1, fixed, options).map_err(|e| e.at(Step::B3).to_string())
    };
    let fixed = fit(Some(shape));
    let free = fit(None);
    let gof = match (&maxima, &fixed) {
        (Ok(m), Ok(f)) => gof_model(m, &f.model).map_err(|e| e.to_string()),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    WindowFit {
        k,
        maxima,
        fixed,
        free,
        gof,
    }
}

/// Single-extreme fits and the stationarity test.
#[derive(Debug, Clone)]
pub struct StationarityTest {
    pub stationary: FitResult,
    pub trend: FitResult,
    pub lr: LikelihoodRatio,
    /// Constant forms replaced the configured ones because the trend was not significant.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSource {
    Fitted,
    Inferred,
}

impl ModelSource {
    pub fn name(self) -> &'static str {
        match self {
            ModelSource::Fitted => "fitted",
            ModelSource::Inferred => "inferred",
        }
    }
}

/// The model used for window size `k` in the return-level tables.
#[derive(Debug, Clone)]
pub struct WindowModel {
    pub k: usize,
    pub source: ModelSource,
    pub model: GevModel,
    pub intervals: Option<ParamIntervals>,
    pub theta: Option<f64>,
    /// Lemma factor applied to the single-extreme model (inferred windows).
    pub factor: Option<f64>,
    pub warning: Option<String>,
}

/// Results of the fitting stages of the workflow.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub config: WorkflowConfig,
    /// Covariate subtracted so the first block sits at 0.
    pub origin: f64,
    /// Analysed series in shifted covariates.
    pub series: TimeSeries,
    pub acf: Option<Vec<f64>>,
    pub forms: (ParamForm, ParamForm),
    pub stationarity: StationarityTest,
    pub xi1: f64,
    pub xi1_se: Option<f64>,
    pub windows: Vec<WindowFit>,
    pub theta: ThetaByWindow,
    /// Largest `k` passing every fitting diagnostic.
    pub k_f_diagnostic: usize,
    pub k_f_reason: String,
    /// Fitting horizon used for the scaling law, after the `kf_min` floor.
    pub k_f: usize,
    pub scaling: Option<FormSelection>,
    pub models: Vec<WindowModel>,
    pub blocks_per_unit: f64,
    /// Last covariate of the data; future horizons start here.
    pub t_end: f64,
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn window(&self, k: usize) -> Option<&WindowFit> {
        self.windows.iter().find(|w| w.k == k)
    }

    pub fn model(&self, k: usize) -> Option<&WindowModel> {
        self.models.iter().find(|m| m.k == k)
    }

    /// Window-size / extremal-index pairs estimated from the data.
    pub fn theta_pairs(&self) -> Vec<(usize, f64)> {
        self.theta.estimates.iter().map(|e| (e.k, e.theta)).collect()
    }
}

pub(crate) fn fit_options(config: &WorkflowConfig) -> FitOptions {
    FitOptions {
        restarts: config.fit_restarts,
        seed: config.seed,
        ..FitOptions::default()
    }
}

/// Runs steps A1 to B5 and assembles the per-window models.
pub fn run_analysis(config: &WorkflowConfig, series: &TimeSeries) -> Result<Analysis> {
    config.validate()?;
    let mut notes = Vec::new();
    let series = if config.drop_zeros {
        drop_zeros(series).map_err(|e| e.at(Step::A1))?
    } else {
        series.clone()
    };
    let m = config.block_length;
    let origin = block_maxima(&series, m).map_err(|e| e.at(Step::A2))?.block_covariates()[0];
    let series = series.shifted(origin);
    let opts = fit_options(config);

    // A1
    let acf = match autocorrelation(&series, config.acf_lags.min(series.len() - 1)) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(format!("A1: {e}"));
            None
        }
    };

    // A2
    let bm1 = block_maxima(&series, m).map_err(|e| e.at(Step::A2))?;
    let fit = |loc, scale| fit_mle_with(&bm1, loc, scale, None, &opts).map_err(|e| e.at(Step::A2));
    let stationary = fit(ParamForm::Constant, ParamForm::Constant)?;
    let configured = (config.location_form, config.scale_form);
    let trend = if configured == (ParamForm::Constant, ParamForm::Constant) {
        stationary.clone()
    } else {
        fit(configured.0, configured.1)?
    };
    let lr = likelihood_ratio(&stationary, &trend).map_err(|e| e.at(Step::A2))?;
    let fallback = config.stationary_fallback && lr.df > 0 && lr.p_value > config.lr_alpha;
    let (forms, base_fit) = if fallback {
        notes.push(format!(
            "A2: trend not significant (p = {:.4}); constant forms used",
            lr.p_value
        ));
        ((ParamForm::Constant, ParamForm::Constant), stationary.clone())
    } else {
        (configured, trend.clone())
    };

    // A3
    let xi1 = base_fit.model.shape;
    let xi1_se = base_fit.standard_error("xi");
    let lower = match (config.frechet_check, xi1_se) {
        (FrechetCheck::Strict, Some(se)) => xi1 - 1.96 * se,
        (FrechetCheck::Strict, None) => {
            notes.push("A3: shape standard error unavailable; point estimate checked".into());
            xi1
        }
        (FrechetCheck::Point, _) => xi1,
    };
    if !(lower > 0.0) {
        return Err(Error::Precondition {
            step: Step::A3,
            message: format!(
                "data are not Frechet-type: shape estimate {xi1:.4} (checked value {lower:.4}) is not positive"
            ),
        });
    }

    // B1-B3
    let windows: Vec<WindowFit> = (1..=config.k_max)
        .into_par_iter()
        .map(|k| fit_window(&series, k, m, forms, xi1, &opts))
        .collect();

    // B4
    let theta = theta_by_window(&series, config.k_max, config.threshold_quantile, config.threshold_window)
        .map_err(|e| e.at(Step::B4))?;
    if let Some(h) = &theta.horizon {
        notes.push(format!("B4: extremal index estimated up to k={}: {}", h.k - 1, h.reason));
    }

    // B5
    let z = config.ci_z;
    let theta_at = |k: usize| theta.theta(k);
    let mut k_f_diagnostic = 0;
    let mut k_f_reason = format!("every window up to k_max={} passed", config.k_max);
    for w in &windows {
        let fail = match (&w.fixed, &w.gof, &w.free) {
            (Err(e), _, _) => Some(format!("fixed-shape fit failed: {e}")),
            (Ok(f), _, _) if !f.converged => Some("fixed-shape fit did not converge".into()),
            (Ok(f), _, _) if f.standard_errors.is_none() => {
                Some("fixed-shape standard errors unavailable".into())
            }
            (_, Err(e), _) => Some(format!("goodness of fit unavailable: {e}")),
            (_, Ok(g), _) if g.ks_p <= config.gof_alpha || g.ad_p <= config.gof_alpha => Some(format!(
                "goodness of fit rejected (KS p = {:.4}, AD p = {:.4})",
                g.ks_p, g.ad_p
            )),
            (_, _, Err(e)) => Some(format!("free-shape fit failed: {e}")),
            (_, _, Ok(fr)) if xi1_se.is_some_and(|se| (fr.model.shape - xi1).abs() > z * se) => {
                Some(format!(
                    "free shape {:.4} outside the single-extreme interval {:.4} +- {:.4}",
                    fr.model.shape,
                    xi1,
                    z * xi1_se.unwrap_or(0.0)
                ))
            }
            _ if theta_at(w.k).is_none() => Some("no extremal index estimate".into()),
            _ => None,
        };
        match fail {
            Some(r) => {
                k_f_reason = format!("k={}: {r}", w.k);
                break;
            }
            None => k_f_diagnostic = w.k,
        }
    }
    let mut k_f = k_f_diagnostic;
    if k_f < config.kf_min {
        let floor = windows
            .iter()
            .take(config.kf_min)
            .take_while(|w| w.usable_fixed().is_some() && theta_at(w.k).is_some())
            .count();
        if floor > k_f {
            notes.push(format!(
                "B5: diagnostics stop at k={k_f_diagnostic} ({k_f_reason}); k=1..{floor} used for the scaling law"
            ));
            k_f = floor;
        }
    }

    let base_window = windows[0]
        .usable_fixed()
        .ok_or_else(|| {
            Error::Numerical(format!(
                "single-extreme fixed-shape fit unusable: {}",
                match &windows[0].fixed {
                    Err(e) => e.clone(),
                    Ok(_) => "no convergence or standard errors".into(),
                }
            ))
            .at(Step::B3)
        })?
        .clone();
    let base_model = base_window.model;
    let theta1 = theta_at(1).ok_or_else(|| {
        Error::InsufficientExceedances(0).at(Step::B4)
    })?;
    let base = ScalingBase::from_model(&base_model, theta1);

    let scaling = if k_f >= 3 {
        let points = windows[..k_f]
            .iter()
            .map(|w| {
                let f = w.usable_fixed().expect("checked above");
                ScalingPoint {
                    k: w.k,
                    mu0: f.model.location.intercept(),
                    sigma0: f.model.scale.intercept(),
                    theta: theta_at(w.k).expect("checked above"),
                    mu0_se: f.standard_error("mu0"),
                }
            })
            .collect();
        let inputs = ScalingInputs { base, points };
        let sopts = ScalingOptions {
            response: config.scaling_response,
            weighted: config.scaling_weighted,
        };
        let registry = FormRegistry::builtin();
        let selected = if config.scaling_form == "auto" {
            select_form(&inputs, &registry, &sopts)
        } else {
            let form = registry.get(&config.scaling_form).expect("validated");
            fit_scaling_with(&inputs, form, &sopts).map(|law| FormSelection {
                candidates: vec![Candidate {
                    name: law.form_name().to_string(),
                    outcome: Ok(law.clone()),
                }],
                chosen: law,
            })
        };
        match selected {
            Ok(mut s) => {
                if let Some(cap) = config.k_cap {
                    s.chosen = s.chosen.with_k_cap(cap);
                }
                Some(s)
            }
            Err(e) => {
                notes.push(format!("B5: scaling law unavailable: {e}"));
                None
            }
        }
    } else {
        notes.push(format!(
            "B5: fitting horizon k_f={k_f} is below 3; no scaling law fitted"
        ));
        None
    };

    // models per window
    let mut base_intervals = ParamIntervals::from_fit(&base_window, z);
    if let (Some(iv), Some(se)) = (&mut base_intervals, xi1_se) {
        iv.shape = (xi1 - z * se, xi1 + z * se);
    }
    let known = theta.estimates.iter().map(|e| (e.k, e.theta)).collect::<Vec<_>>();
    let mut models = Vec::new();
    for k in 1..=config.k_report {
        if k <= k_f {
            let f = windows[k - 1].usable_fixed().expect("checked above");
            let mut intervals = ParamIntervals::from_fit(f, z);
            if let (Some(iv), Some(b)) = (&mut intervals, &base_intervals) {
                iv.shape = b.shape;
            }
            models.push(WindowModel {
                k,
                source: ModelSource::Fitted,
                model: f.model,
                intervals,
                theta: theta_at(k),
                factor: None,
                warning: None,
            });
        } else if let Some(sel) = &scaling {
            let th = extrapolate_theta(&known, k, config.theta_extrapolation)?;
            let (model, warning) = infer_model(&sel.chosen, k, &base_model, &base, th).map_err(|e| e.at(Step::C))?;
            let factor = crate::scaling::infer_params(&sel.chosen, k, &base, th)
                .map_err(|e| e.at(Step::C))?
                .factor;
            models.push(WindowModel {
                k,
                source: ModelSource::Inferred,
                model,
                intervals: base_intervals.as_ref().map(|iv| iv.scaled(&base_model, factor)),
                theta: Some(th),
                factor: Some(factor),
                warning,
            });
        }
    }

    let span = series.covariates()[series.len() - 1] - series.covariates()[0];
    let blocks_per_unit = match config.blocks_per_unit {
        Some(b) => b,
        None if span > 0.0 => series.len() as f64 / (m as f64 * span),
        None => {
            return Err(Error::Config {
                key: "blocks_per_unit".into(),
                message: "cannot be estimated when all observations share one covariate value".into(),
            })
        }
    };

    Ok(Analysis {
        config: config.clone(),
        origin,
        t_end: series.covariates()[series.len() - 1],
        series,
        acf,
        forms,
        stationarity: StationarityTest {
            stationary,
            trend,
            lr,
            fallback,
        },
        xi1,
        xi1_se,
        windows,
        theta,
        k_f_diagnostic,
        k_f_reason,
        k_f,
        scaling,
        models,
        blocks_per_unit,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnKind {
    /// One expected exceedance over a future covariate span.
    Horizon { span: f64, t_start: f64, blocks: usize },
    /// Return period in blocks at the anchor covariate.
    Period { blocks: f64, t: f64 },
    /// Quantile at the anchor covariate.
    Quantile { p: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnRow {
    pub k: usize,
    pub source: ModelSource,
    pub kind: ReturnKind,
    pub level: f64,
    pub ci: Option<GridInterval>,
}

/// Everything the workflow produces.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub analysis: Analysis,
    pub returns: Vec<ReturnRow>,
    pub notes: Vec<String>,
}

/// Return levels, quantiles and grid intervals for every window model.
pub fn return_tables(analysis: &Analysis) -> (Vec<ReturnRow>, Vec<String>) {
    let cfg = &analysis.config;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for wm in &analysis.models {
        let mut targets = Vec::new();
        for &h in &cfg.horizons {
            let t_start = analysis.t_end;
            let target = CiTarget::HorizonLevel {
                t_start,
                t_end: t_start + h,
                blocks_per_unit: analysis.blocks_per_unit,
            };
            let blocks = ((h * analysis.blocks_per_unit) + 1e-9).floor() as usize;
            let level = horizon_return_level(&wm.model, t_start, t_start + h, analysis.blocks_per_unit);
            targets.push((ReturnKind::Horizon { span: h, t_start, blocks }, target, level));
        }
        for &period in &cfg.return_periods {
            let t = cfg.anchor_t;
            targets.push((
                ReturnKind::Period { blocks: period, t },
                CiTarget::ReturnLevel { period, t },
                return_level(&wm.model, period, t),
            ));
        }
        for &p in &cfg.quantile_probs {
            let t = cfg.anchor_t;
            targets.push((ReturnKind::Quantile { p, t }, CiTarget::Quantile { p, t }, wm.model.quantile(p, t)));
        }
        for (kind, target, level) in targets {
            let level = match level {
                Ok(l) => l,
                Err(e) => {
                    notes.push(format!("C: k={} {kind:?}: {e}", wm.k));
                    continue;
                }
            };
            let ci = wm.intervals.as_ref().and_then(|iv| {
                match permutation_ci(&wm.model, iv, cfg.samples_per_param, target) {
                    Ok(ci) => Some(ci),
                    Err(e) => {
                        notes.push(format!("C: k={} {kind:?}: interval unavailable: {e}", wm.k));
                        None
                    }
                }
            });
            rows.push(ReturnRow {
                k: wm.k,
                source: wm.source,
                kind,
                level,
                ci,
            });
        }
    }
    (rows, notes)
}

/// Full workflow: fitting stages followed by the return-level tables.
pub fn run_workflow(config: &WorkflowConfig, series: &TimeSeries) -> Result<Bundle> {
    let analysis = run_analysis(config, series)?;
    let (returns, c_notes) = return_tables(&analysis);
    let mut notes = analysis.notes.clone();
    notes.extend(c_notes);
    Ok(Bundle {
        analysis,
        returns,
        notes,
    })
}
