use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Workflow stage labels used to tag precondition failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    B4,
    B5,
    C,
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Step::A1 => "A1",
            Step::A2 => "A2",
            Step::A3 => "A3",
            Step::B1 => "B1",
            Step::B2 => "B2",
            Step::B3 => "B3",
            Step::B4 => "B4",
            Step::B5 => "B5",
            Step::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    // series
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("window size must be at least 1")]
    InvalidWindow,
    #[error("window size {k} exceeds series length {n}")]
    WindowTooLarge { k: usize, n: usize },
    #[error("block length {m} exceeds series length {n}")]
    BlockTooLarge { m: usize, n: usize },
    #[error("quantile level {0} outside (0, 1)")]
    InvalidQuantile(f64),
    #[error("lag {max_lag} must be smaller than series length {n}")]
    InvalidLag { max_lag: usize, n: usize },
    #[error("series is empty")]
    EmptySeries,

    // distribution / fitting
    #[error("scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("scale parameter collapsed to {sigma} at covariate {t}")]
    ScaleCollapse { t: f64, sigma: f64 },
    #[error("need at least {needed} block maxima, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no feasible starting point: every likelihood evaluation violated the support")]
    FitInfeasible,
    #[error("models are not nested: {0}")]
    InvalidComparison(String),
    #[error("negative deviance {0} between nested fits")]
    FitInconsistency(f64),
    #[error("maxima outside model support at indices {0:?}")]
    NormalizationDomain(Vec<usize>),

    // extremal index
    #[error("need at least 3 threshold exceedances, found {0}")]
    InsufficientExceedances(usize),
    #[error("threshold length {threshold} does not match series length {series}")]
    ThresholdMismatch { series: usize, threshold: usize },

    // scaling law
    #[error("nonpositive location intercept {value} at k={k}; cannot take log")]
    LogDomain { k: usize, value: f64 },
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),

    // inference
    #[error("return period must exceed 1 block, got {0}")]
    InvalidPeriod(f64),
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("every parameter combination in the grid was infeasible ({0} skipped)")]
    InfeasibleGrid(usize),

    // goodness of fit
    #[error("sample is empty")]
    EmptySample,

    // simulation
    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    // workflow / cli
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("step {step}: {message}")]
    Precondition { step: Step, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: Step,
        #[source]
        source: Box<Error>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AtStep { source, .. } => source.exit_code(),
            Error::Config { .. } => 2,
            Error::Precondition { .. } => 4,
            Error::FitInfeasible
            | Error::FitInconsistency(_)
            | Error::DegenerateDesign(_)
            | Error::InfeasibleGrid(_)
            | Error::ScaleCollapse { .. }
            | Error::Numerical(_) => 5,
            _ => 3,
        }
    }

    /// Tags an error with the workflow step it arose in.
    pub fn at(self, step: Step) -> Self {
        match self {
            e @ (Error::AtStep { .. } | Error::Precondition { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The workflow step named by this error, if any.
    pub fn step(&self) -> Option<Step> {
        match self {
            Error::AtStep { step, .. } | Error::Precondition { step, .. } => Some(*step),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
