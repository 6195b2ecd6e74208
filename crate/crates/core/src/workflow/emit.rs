use std::path::{Path, PathBuf};

use super::analysis::{Bundle, ModelSource, ReturnKind, WindowFit};
use super::svg::{Chart, Series, Style};
use crate::error::{Error, Result};
use crate::gev::{FitResult, ParamForm};
use crate::inference::ParamIntervals;

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct Writer<'a> {
    root: &'a Path,
    written: Vec<PathBuf>,
    omitted: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(PathBuf::from(rel));
        Ok(())
    }

    fn table(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if rows.is_empty() {
            self.omitted.push(format!("{rel}: no rows"));
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Numerical(format!("csv encoding failed: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
        self.write(rel, &bytes)
    }

    fn figure(&mut self, name: &str, chart: &Chart, header: &[&str], data: &[Vec<String>]) -> Result<()> {
        if chart.series.iter().all(|s| s.points.is_empty()) {
            self.omitted.push(format!("figures/{name}.svg: no data"));
            return Ok(());
        }
        self.write(&format!("figures/{name}.svg"), chart.render().as_bytes())?;
        self.table(&format!("plotdata/{name}.csv"), header, data)
    }
}

/// Coefficient values and interval half-widths in the fixed
/// `mu0, mu1, sigma0, sigma1, xi` layout; absent coefficients are empty.
fn coefficient_cells(
    model: &crate::gev::GevModel,
    intervals: Option<&ParamIntervals>,
) -> Vec<String> {
    let mut cells = Vec::with_capacity(10);
    let hw = |iv: Option<&(f64, f64)>| iv.map(|(a, b)| num(0.5 * (b - a))).unwrap_or_default();
    for (m, ivs) in [
        (&model.location, intervals.map(|i| &i.location)),
        (&model.scale, intervals.map(|i| &i.scale)),
    ] {
        let c = m.coefficients();
        cells.push(num(c[0]));
        cells.push(hw(ivs.and_then(|v| v.first())));
        if m.form() == ParamForm::Constant {
            cells.push(String::new());
            cells.push(String::new());
        } else {
            cells.push(num(c[1]));
            cells.push(hw(ivs.and_then(|v| v.get(1))));
        }
    }
    cells.push(num(model.shape));
    cells.push(hw(intervals.map(|i| &i.shape)));
    cells
}

fn free_shape(w: &WindowFit, z: f64) -> (Option<f64>, Option<f64>) {
    match &w.free {
        Ok(f) => (Some(f.model.shape), f.standard_error("xi").map(|s| z * s)),
        Err(_) => (None, None),
    }
}

fn fit_status(f: &FitResult) -> [String; 3] {
    [f.converged.to_string(), f.n_maxima.to_string(), num(f.neg_log_likelihood)]
}

/// Writes tables, plot data, figures and a manifest under `out_dir`; returns
/// the written paths relative to it.
pub fn emit_outputs(bundle: &Bundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let a = &bundle.analysis;
    let z = a.config.ci_z;
    let mut w = Writer {
        root: out_dir,
        written: Vec::new(),
        omitted: Vec::new(),
    };

    // params.csv
    let header = [
        "k", "source", "mu0", "mu0_hw", "mu1", "mu1_hw", "sigma0", "sigma0_hw", "sigma1",
        "sigma1_hw", "xi", "xi_hw", "xi_free", "xi_free_hw", "theta", "converged", "n_maxima",
        "nll", "note",
    ];
    let mut rows = Vec::new();
    for win in &a.windows {
        let (xf, xf_hw) = free_shape(win, z);
        match &win.fixed {
            Ok(f) => {
                let mut intervals = ParamIntervals::from_fit(f, z);
                if let (Some(iv), Some(se)) = (&mut intervals, a.xi1_se) {
                    iv.shape = (a.xi1 - z * se, a.xi1 + z * se);
                }
                let mut r = vec![win.k.to_string(), ModelSource::Fitted.name().into()];
                r.extend(coefficient_cells(&f.model, intervals.as_ref()));
                r.extend([opt(xf), opt(xf_hw), opt(a.theta.theta(win.k))]);
                r.extend(fit_status(f));
                r.push(if win.k <= a.k_f { String::new() } else { "beyond k_f".into() });
                rows.push(r);
            }
            Err(e) => {
                let mut r = vec![win.k.to_string(), ModelSource::Fitted.name().into()];
                r.extend(std::iter::repeat_n(String::new(), 10));
                r.extend([opt(xf), opt(xf_hw), opt(a.theta.theta(win.k))]);
                r.extend([String::new(), String::new(), String::new(), e.clone()]);
                rows.push(r);
            }
        }
    }
    for m in a.models.iter().filter(|m| m.source == ModelSource::Inferred) {
        let mut r = vec![m.k.to_string(), m.source.name().into()];
        r.extend(coefficient_cells(&m.model, m.intervals.as_ref()));
        r.extend([String::new(), String::new(), opt(m.theta)]);
        r.extend([String::new(), String::new(), String::new()]);
        r.push(m.warning.clone().unwrap_or_default());
        rows.push(r);
    }
    w.table("params.csv", &header, &rows)?;

    // theta.csv
    let rows: Vec<Vec<String>> = a
        .theta
        .estimates
        .iter()
        .map(|e| {
            vec![
                e.k.to_string(),
                num(e.theta),
                e.n_exceedances.to_string(),
                num(e.threshold_quantile),
                num(e.threshold_window_span),
                e.clamped.to_string(),
                e.saturated.to_string(),
            ]
        })
        .collect();
    w.table(
        "theta.csv",
        &["k", "theta", "n_exceedances", "threshold_quantile", "window_span", "clamped", "saturated"],
        &rows,
    )?;

    // gtk.csv
    let mut rows = Vec::new();
    if let Some(sel) = &a.scaling {
        for c in &sel.candidates {
            let chosen = (c.name == sel.chosen.form_name()).to_string();
            match &c.outcome {
                Ok(law) => {
                    for (name, value) in law.coefficient_names().iter().zip(&law.coefficients) {
                        rows.push(vec![
                            c.name.clone(),
                            chosen.clone(),
                            num(law.fit_r2),
                            num(law.adjusted_r2),
                            name.clone(),
                            num(*value),
                            String::new(),
                        ]);
                    }
                }
                Err(e) => rows.push(vec![
                    c.name.clone(),
                    "false".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ]),
            }
        }
    }
    w.table(
        "gtk.csv",
        &["form", "chosen", "r2", "adjusted_r2", "coefficient", "value", "note"],
        &rows,
    )?;

    // returns.csv
    let rows: Vec<Vec<String>> = bundle
        .returns
        .iter()
        .map(|r| {
            let (kind, param, t0, t1, blocks) = match r.kind {
                ReturnKind::Horizon { span, t_start, blocks } => (
                    "horizon",
                    num(span),
                    num(t_start),
                    num(t_start + span),
                    blocks.to_string(),
                ),
                ReturnKind::Period { blocks, t } => ("period", num(blocks), num(t), String::new(), num(blocks)),
                ReturnKind::Quantile { p, t } => ("quantile", num(p), num(t), String::new(), String::new()),
            };
            vec![
                r.k.to_string(),
                r.source.name().into(),
                kind.into(),
                param,
                t0,
                t1,
                blocks,
                num(r.level),
                opt(r.ci.map(|c| c.low)),
                opt(r.ci.map(|c| c.high)),
                num(r.k as f64 * r.level),
            ]
        })
        .collect();
    w.table(
        "returns.csv",
        &["k", "source", "kind", "parameter", "t_start", "t_end", "blocks", "level", "ci_low", "ci_high", "total"],
        &rows,
    )?;

    // gof.csv
    let rows: Vec<Vec<String>> = a
        .windows
        .iter()
        .filter_map(|win| win.gof.as_ref().ok().map(|g| (win.k, g)))
        .map(|(k, g)| {
            vec![
                k.to_string(),
                g.n.to_string(),
                num(g.ks_statistic),
                num(g.ks_p),
                num(g.ad_statistic),
                num(g.ad_p),
                g.normalized.to_string(),
            ]
        })
        .collect();
    w.table(
        "gof.csv",
        &["k", "n", "ks_statistic", "ks_p", "ad_statistic", "ad_p", "normalized"],
        &rows,
    )?;

    figures(bundle, &mut w)?;
    manifest(bundle, w)
}

fn figures(bundle: &Bundle, w: &mut Writer) -> Result<()> {
    let a = &bundle.analysis;
    let z = a.config.ci_z;

    // scaling law: observed ratios against the fitted law, and scale validation
    if let Some(sel) = &a.scaling {
        let law = &sel.chosen;
        let base_mu = a.model(1).map(|m| m.model.location.intercept());
        let base_sigma = a.model(1).map(|m| m.model.scale.intercept());
        let links = (
            crate::scaling::Link::for_form(a.forms.0),
            crate::scaling::Link::for_form(a.forms.1),
        );
        let theta1 = a.theta.theta(1);
        let mut observed = Vec::new();
        let mut sigma_obs = Vec::new();
        let mut sigma_pred = Vec::new();
        let mut data = Vec::new();
        if let (Some(mu1), Some(s1), Some(th1)) = (base_mu, base_sigma, theta1) {
            for win in &a.windows {
                let (Some(f), Some(th)) = (win.usable_fixed(), a.theta.theta(win.k)) else {
                    continue;
                };
                let adj = match law.response {
                    crate::scaling::Response::ThetaAdjusted => (th / th1).powf(a.xi1),
                    crate::scaling::Response::Unadjusted => 1.0,
                };
                let ratio = links.0.natural(f.model.location.intercept()) / (links.0.natural(mu1) * adj);
                let s_obs = links.1.natural(f.model.scale.intercept());
                let s_pred = links.1.natural(s1) * adj * law.g(win.k as f64);
                let k = win.k as f64;
                observed.push((k, ratio));
                sigma_obs.push((k, s_obs));
                sigma_pred.push((k, s_pred));
                data.push(vec![
                    win.k.to_string(),
                    num(ratio),
                    num(law.g(k)),
                    num(s_obs),
                    num(s_pred),
                    (win.k <= a.k_f).to_string(),
                ]);
            }
        }
        let kmax = a.config.k_report.max(a.config.k_max);
        let curve: Vec<(f64, f64)> = (1..=kmax).map(|k| (k as f64, law.g(k as f64))).collect();
        let header = ["k", "observed_ratio", "fitted_g", "sigma0_fitted", "sigma0_predicted", "in_fit"];
        w.figure(
            "gtk_derivation",
            &Chart {
                title: format!("Scaling law g(k), {} form", law.form_name()),
                x_label: "k".into(),
                y_label: "adjusted location ratio".into(),
                series: vec![
                    Series::new("fitted g(k)", curve, Style::Line),
                    Series::new("observed", observed, Style::Markers),
                ],
                ..Default::default()
            },
            &header,
            &data,
        )?;
        w.figure(
            "gtk_validation",
            &Chart {
                title: "Scale at t = 0: fitted and predicted".into(),
                x_label: "k".into(),
                y_label: "sigma(0)".into(),
                series: vec![
                    Series::new("predicted", sigma_pred, Style::LineMarkers),
                    Series::new("fitted", sigma_obs, Style::Markers),
                ],
                ..Default::default()
            },
            &header,
            &data,
        )?;
    } else {
        w.omitted.push("figures/gtk_*.svg: no scaling law".into());
    }

    // shape deviation
    let mut pts = Vec::new();
    let mut bars = Vec::new();
    let mut data = Vec::new();
    for win in &a.windows {
        let (Some(x), hw) = free_shape(win, z) else { continue };
        let hw = hw.unwrap_or(f64::NAN);
        pts.push((win.k as f64, x));
        bars.push((x - hw, x + hw));
        data.push(vec![win.k.to_string(), num(x), num(hw), num(a.xi1)]);
    }
    let mut hlines = vec![(a.xi1, "fixed shape".to_string())];
    if let Some(se) = a.xi1_se {
        hlines.push((a.xi1 - z * se, "lower".into()));
        hlines.push((a.xi1 + z * se, "upper".into()));
    }
    w.figure(
        "shape_deviation",
        &Chart {
            title: "Free shape estimate by window size".into(),
            x_label: "k".into(),
            y_label: "xi".into(),
            series: vec![Series::new("free-shape MLE", pts, Style::Markers).with_bars(bars)],
            hlines,
            x_log: false,
        },
        &["k", "xi_free", "xi_free_hw", "xi_fixed"],
        &data,
    )?;

    // return level curves at the anchor
    let periods: Vec<f64> = (0..=40).map(|i| 10f64.powf(0.1 + i as f64 * 0.075)).collect();
    let mut shown: Vec<usize> = vec![1, a.k_f.max(1), a.config.k_report];
    shown.dedup();
    let mut series = Vec::new();
    let mut data = Vec::new();
    for k in shown {
        let Some(m) = a.model(k) else { continue };
        let pts: Vec<(f64, f64)> = periods
            .iter()
            .filter_map(|&p| {
                crate::inference::return_level(&m.model, p, a.config.anchor_t)
                    .ok()
                    .map(|l| (p, l))
            })
            .collect();
        for (p, l) in &pts {
            data.push(vec![k.to_string(), m.source.name().into(), num(*p), num(*l)]);
        }
        series.push(Series::new(format!("k = {k} ({})", m.source.name()), pts, Style::Line));
    }
    w.figure(
        "return_levels",
        &Chart {
            title: format!("Return levels at t = {}", a.config.anchor_t),
            x_label: "return period (blocks)".into(),
            y_label: "level".into(),
            series,
            hlines: vec![],
            x_log: true,
        },
        &["k", "source", "period", "level"],
        &data,
    )?;

    // quantile fan across k
    let mut series = Vec::new();
    let mut data = Vec::new();
    for &p in &a.config.quantile_probs {
        let mut pts = Vec::new();
        for m in &a.models {
            if let Ok(q) = m.model.quantile(p, a.config.anchor_t) {
                pts.push((m.k as f64, q));
                data.push(vec![m.k.to_string(), num(p), num(q), m.source.name().into()]);
            }
        }
        series.push(Series::new(format!("{:.0}%", 100.0 * p), pts, Style::LineMarkers));
    }
    w.figure(
        "quantile_fan",
        &Chart {
            title: format!("Quantiles by window size at t = {}", a.config.anchor_t),
            x_label: "k".into(),
            y_label: "level".into(),
            series,
            ..Default::default()
        },
        &["k", "p", "quantile", "source"],
        &data,
    )?;

    // extremal index
    let pts: Vec<(f64, f64)> = a.theta.estimates.iter().map(|e| (e.k as f64, e.theta)).collect();
    let data: Vec<Vec<String>> = a
        .theta
        .estimates
        .iter()
        .map(|e| vec![e.k.to_string(), num(e.theta)])
        .collect();
    w.figure(
        "theta",
        &Chart {
            title: "Extremal index of the moving minimum".into(),
            x_label: "k".into(),
            y_label: "theta".into(),
            series: vec![Series::new("estimate", pts, Style::LineMarkers)],
            ..Default::default()
        },
        &["k", "theta"],
        &data,
    )?;
    Ok(())
}

fn manifest(bundle: &Bundle, mut w: Writer) -> Result<Vec<PathBuf>> {
    let a = &bundle.analysis;
    let st = &a.stationarity;
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!("observations: {}", a.series.len()));
    line(format!("covariate origin: {}", a.origin));
    line(format!("blocks per covariate unit: {}", a.blocks_per_unit));
    line(format!("forms: location {}, scale {}", a.forms.0, a.forms.1));
    line(format!(
        "stationarity test: deviance {}, df {}, p {}{}",
        st.lr.deviance,
        st.lr.df,
        st.lr.p_value,
        if st.fallback { " (constant forms used)" } else { "" }
    ));
    line(format!("single-extreme shape: {} (se {})", a.xi1, opt(a.xi1_se)));
    line(format!(
        "fitting horizon: k_f = {} (diagnostics: k = {}; {})",
        a.k_f, a.k_f_diagnostic, a.k_f_reason
    ));
    match &a.scaling {
        Some(sel) => line(format!(
            "scaling law: {} ({}), R2 {}",
            sel.chosen.form_name(),
            sel.chosen
                .coefficient_names()
                .iter()
                .zip(&sel.chosen.coefficients)
                .map(|(n, v)| format!("{n} = {v}"))
                .collect::<Vec<_>>()
                .join(", "),
            sel.chosen.fit_r2
        )),
        None => line("scaling law: none".into()),
    }
    line("goodness-of-fit p-values treat fitted parameters as known".into());
    line(String::new());
    line("notes:".into());
    for n in &bundle.notes {
        line(format!("  {n}"));
    }
    line(String::new());
    line("omitted:".into());
    for o in &w.omitted {
        line(format!("  {o}"));
    }
    line(String::new());
    line("files:".into());
    for f in &w.written {
        line(format!("  {}", f.display()));
    }
    line("  manifest.txt".into());
    w.write("manifest.txt", s.as_bytes())?;
    Ok(w.written)
}
