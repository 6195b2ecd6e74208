use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kextremes::extremal::theta_by_window;
use kextremes::gev::{fit_mle_with, FitResult, GevModel, ParamForm, ParamModel};
use kextremes::gof::gof_model;
use kextremes::inference::compare::{compare_methods, MethodRegistry, Reference, ShortRun};
use kextremes::series::{block_maxima, TimeSeries};
use kextremes::sim::{sample_gev, Process, SyntheticSpec};
use kextremes::workflow::{
    emit_outputs, fit_window, ingest_csv, return_tables, run_analysis, run_workflow,
    write_series_csv, ReturnKind, WorkflowConfig,
};
use kextremes::{Error, Result};

/// Nonstationary modelling of k-successive extremes.
#[derive(Debug, Parser)]
#[command(name = "kextremes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a GEV to the block maxima of a series.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Hold the shape at this value.
        #[arg(long, allow_negative_numbers = true)]
        fixed_shape: Option<f64>,
    },
    /// Fixed- and free-shape fits of the window-k moving-minimum block maxima.
    Successive {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        k: usize,
    },
    /// Extremal index of the moving minimum for k = 1..k_max.
    Theta {
        #[command(flatten)]
        common: Common,
    },
    /// Scaling-law candidates and the selected form.
    Scaling {
        #[command(flatten)]
        common: Common,
    },
    /// Return levels, horizon levels and quantiles per window size.
    Returns {
        #[command(flatten)]
        common: Common,
    },
    /// Compare estimation methods on a short run against a long-run reference.
    Compare {
        /// Short-run CSV; must start where the long run starts.
        #[arg(long)]
        short: PathBuf,
        /// Long-run CSV used for the reference fits.
        #[arg(long)]
        long: PathBuf,
        /// Window sizes to compare.
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 10, 12])]
        k: Vec<usize>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Goodness of fit of the fixed-shape model for window size k.
    Gof {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value_t = 1)]
        k: usize,
    },
    /// Write a synthetic series with GEV margins.
    Simulate(SimulateArgs),
    /// Run the full workflow and write tables, figures and a manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Settings {
    /// Configuration file (TOML key = value pairs).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set block_length=12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Settings {
    fn load(&self) -> Result<WorkflowConfig> {
        let mut c = match &self.config {
            Some(p) => WorkflowConfig::from_file(p)?,
            None => WorkflowConfig::default(),
        };
        c.apply_overrides(&self.overrides)?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Input CSV with header `t,value`.
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    settings: Settings,
}

impl Common {
    fn load(&self) -> Result<(WorkflowConfig, TimeSeries)> {
        let config = self.settings.load()?;
        Ok((config, read_series(&self.input)?))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProcessKind {
    Iid,
    Armax,
    MovingMax,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Output CSV.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ProcessKind::Iid)]
    process: ProcessKind,
    /// Autoregressive coefficient of the max-autoregressive process.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Order of the moving-maximum process.
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    shape: f64,
    /// `FORM:c0[,c1]` with FORM constant, linear or exponential.
    #[arg(long, default_value = "constant:10")]
    location: String,
    #[arg(long, default_value = "constant:2")]
    scale: String,
    #[arg(short, long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Covariate range `t0,t1`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    t_range: Vec<f64>,
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let ingested = ingest_csv(path)?;
    for n in &ingested.notices {
        eprintln!("note: {n}");
    }
    Ok(ingested.series)
}

fn parse_param(text: &str, what: &str) -> Result<ParamModel> {
    let bad = |message: String| Error::Config {
        key: what.into(),
        message,
    };
    let (form, coeffs) = match text.split_once(':') {
        Some((f, c)) => (Some(f.parse::<ParamForm>().map_err(bad)?), c),
        None => (None, text),
    };
    let c = coeffs
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let form = form.unwrap_or(if c.len() == 1 { ParamForm::Constant } else { ParamForm::Linear });
    if c.len() != form.n_coefficients() {
        return Err(bad(format!(
            "{form} form takes {} coefficient(s), got {}",
            form.n_coefficients(),
            c.len()
        )));
    }
    Ok(ParamModel::from_coefficients(form, &c))
}

fn fit_options(config: &WorkflowConfig) -> kextremes::gev::FitOptions {
    kextremes::gev::FitOptions {
        restarts: config.fit_restarts,
        seed: config.seed,
        ..Default::default()
    }
}

fn print_model(label: &str, model: &GevModel) {
    println!(
        "{label}: location {:?}, scale {:?}, shape {}{}",
        model.location,
        model.scale,
        model.shape,
        if model.shape_fixed { " (fixed)" } else { "" }
    );
}

fn print_fit(label: &str, fit: &FitResult) {
    print_model(label, &fit.model);
    let names = fit.coefficient_names();
    match &fit.standard_errors {
        Some(se) => {
            let parts: Vec<String> = names.iter().zip(se).map(|(n, s)| format!("{n} {s:.6}")).collect();
            println!("  standard errors: {}", parts.join(", "));
        }
        None => println!("  standard errors: unavailable"),
    }
    println!(
        "  negative log-likelihood {:.6}, converged {}, maxima {}",
        fit.neg_log_likelihood, fit.converged, fit.n_maxima
    );
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { common, fixed_shape } => {
            let (config, series) = common.load()?;
            let bm = block_maxima(&series, config.block_length)?;
            let origin = bm.block_covariates()[0];
            let bm = bm.shifted(origin);
            let fit = fit_mle_with(
                &bm,
                config.location_form,
                config.scale_form,
                fixed_shape,
                &fit_options(&config),
            )?;
            println!("covariate origin {origin}");
            print_fit("fit", &fit);
        }
        Command::Successive { common, k } => {
            let (config, series) = common.load()?;
            let bm = block_maxima(&series, config.block_length)?;
            let origin = bm.block_covariates()[0];
            let series = series.shifted(origin);
            let opts = fit_options(&config);
            let forms = (config.location_form, config.scale_form);
            let base = fit_mle_with(&bm.shifted(origin), forms.0, forms.1, None, &opts)?;
            let w = fit_window(&series, k, config.block_length, forms, base.model.shape, &opts);
            println!("covariate origin {origin}");
            print_fit("single-extreme (k=1, free shape)", &base);
            match &w.fixed {
                Ok(f) => print_fit(&format!("k={k}, fixed shape"), f),
                Err(e) => println!("k={k}, fixed shape: failed: {e}"),
            }
            match &w.free {
                Ok(f) => print_fit(&format!("k={k}, free shape"), f),
                Err(e) => println!("k={k}, free shape: failed: {e}"),
            }
        }
        Command::Theta { common } => {
            let (config, series) = common.load()?;
            let th = theta_by_window(
                &series,
                config.k_max,
                config.threshold_quantile,
                config.threshold_window,
            )?;
            println!("k,theta,n_exceedances,clamped,saturated");
            for e in &th.estimates {
                println!("{},{},{},{},{}", e.k, e.theta, e.n_exceedances, e.clamped, e.saturated);
            }
            if let Some(h) = &th.horizon {
                eprintln!("note: stopped at k={}: {}", h.k, h.reason);
            }
        }
        Command::Scaling { common } => {
            let (config, series) = common.load()?;
            let a = run_analysis(&config, &series)?;
            println!("k_f = {} ({})", a.k_f, a.k_f_reason);
            let Some(sel) = &a.scaling else {
                for n in &a.notes {
                    eprintln!("note: {n}");
                }
                return Err(Error::Numerical("no scaling law could be fitted".into()));
            };
            println!("form,chosen,r2,adjusted_r2,coefficients");
            for c in &sel.candidates {
                match &c.outcome {
                    Ok(law) => println!(
                        "{},{},{},{},{}",
                        c.name,
                        c.name == sel.chosen.form_name(),
                        law.fit_r2,
                        law.adjusted_r2,
                        law.coefficient_names()
                            .iter()
                            .zip(&law.coefficients)
                            .map(|(n, v)| format!("{n}={v}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    ),
                    Err(e) => println!("{},false,,,{}", c.name, e.replace(',', ";")),
                }
            }
        }
        Command::Returns { common } => {
            let (config, series) = common.load()?;
            let a = run_analysis(&config, &series)?;
            let (rows, notes) = return_tables(&a);
            println!("k,source,kind,parameter,t,level,ci_low,ci_high");
            for r in rows {
                let (kind, param, t) = match r.kind {
                    ReturnKind::Horizon { span, t_start, .. } => ("horizon", span, t_start),
                    ReturnKind::Period { blocks, t } => ("period", blocks, t),
                    ReturnKind::Quantile { p, t } => ("quantile", p, t),
                };
                println!(
                    "{},{},{kind},{param},{t},{},{},{}",
                    r.k,
                    r.source.name(),
                    r.level,
                    fmt_opt(r.ci.map(|c| c.low)),
                    fmt_opt(r.ci.map(|c| c.high))
                );
            }
            for n in notes {
                eprintln!("note: {n}");
            }
        }
        Command::Compare { short, long, k, settings } => {
            let config = settings.load()?;
            let short = read_series(&short)?;
            let long = read_series(&long)?;
            let run = ShortRun::prepare(&short, &config, &k)?;
            let reference = Reference::long_run(&long, &config, &k)?;
            let cmp = compare_methods(&run, &reference, &k, &MethodRegistry::builtin(), config.anchor_t)?;
            println!("method,k,location_error,scale_error,shape_error,status");
            for c in &cmp.cells {
                match &c.outcome {
                    Ok(e) => match e.errors {
                        Some(p) => println!("{},{},{},{},{},ok", c.method, c.k, p.location, p.scale, p.shape),
                        None => println!("{},{},,,,no reference", c.method, c.k),
                    },
                    Err(e) => println!("{},{},,,,failed: {}", c.method, c.k, e.replace(',', ";")),
                }
            }
            if let Err(e) = &run.analysis {
                eprintln!("note: full workflow failed on the short run: {e}");
            }
        }
        Command::Gof { common, k } => {
            let (config, series) = common.load()?;
            let bm = block_maxima(&series, config.block_length)?;
            let origin = bm.block_covariates()[0];
            let opts = fit_options(&config);
            let forms = (config.location_form, config.scale_form);
            let base = fit_mle_with(&bm.shifted(origin), forms.0, forms.1, None, &opts)?;
            let w = fit_window(&series.shifted(origin), k, config.block_length, forms, base.model.shape, &opts);
            let (Ok(m), Ok(f)) = (&w.maxima, &w.fixed) else {
                let e = w.fixed.err().or(w.maxima.err()).unwrap_or_default();
                return Err(Error::Numerical(format!("fit for k={k} failed: {e}")));
            };
            let g = gof_model(m, &f.model)?;
            println!("k,n,ks_statistic,ks_p,ad_statistic,ad_p");
            println!("{k},{},{},{},{},{}", g.n, g.ks_statistic, g.ks_p, g.ad_statistic, g.ad_p);
            if g.ad_clamped > 0 {
                eprintln!("note: {} probability value(s) clamped before the Anderson-Darling sum", g.ad_clamped);
            }
        }
        Command::Simulate(s) => {
            let process = match s.process {
                ProcessKind::Iid => Process::IidGev,
                ProcessKind::Armax => Process::MaxAutoregressive { phi: s.phi },
                ProcessKind::MovingMax => Process::MovingMax { order: s.order },
            };
            let &[t0, t1] = s.t_range.as_slice() else {
                return Err(Error::Config {
                    key: "t-range".into(),
                    message: "expected two values `t0,t1`".into(),
                });
            };
            let spec = SyntheticSpec {
                process,
                shape: s.shape,
                location: parse_param(&s.location, "location")?,
                scale: parse_param(&s.scale, "scale")?,
                n: s.n,
                seed: s.seed,
                covariate_range: (t0, t1),
            };
            let series = sample_gev(&spec)?;
            write_series_csv(&series, &s.out)?;
            println!("wrote {} observations to {}", series.len(), s.out.display());
        }
        Command::Run { common, out } => {
            let (config, series) = common.load()?;
            let bundle = run_workflow(&config, &series)?;
            let files = emit_outputs(&bundle, &out)?;
            for f in files {
                println!("{}", out.join(f).display());
            }
            for n in &bundle.notes {
                eprintln!("note: {n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
