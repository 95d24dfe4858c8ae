use thiserror::Error;

/// Errors raised by the estimation, forecasting and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("technology `{technology}`, row {row}: non-positive cost {value}")]
    NonPositiveCost {
        technology: String,
        row: u64,
        value: f64,
    },

    #[error("technology `{technology}`, row {row}: non-positive production {value}")]
    NonPositiveProduction {
        technology: String,
        row: u64,
        value: f64,
    },

    #[error("technology `{technology}`, row {row}: gap in years ({previous} followed by {year})")]
    YearGap {
        technology: String,
        row: u64,
        previous: i32,
        year: i32,
    },

    #[error("technology `{technology}`, row {row}: duplicate year {year}")]
    DuplicateYear {
        technology: String,
        row: u64,
        year: i32,
    },

    #[error("technology `{technology}`: {rows} rows, at least 3 required")]
    TooFewRows { technology: String, rows: usize },

    #[error("series `{technology}`: fields have mismatched lengths")]
    LengthMismatch { technology: String },

    #[error("zero production growth rate (estimated g_d = {g_d})")]
    ZeroGrowth { g_d: f64 },

    #[error("experience has not been built for `{0}`")]
    ExperienceMissing(String),

    #[error("experience series must be positive and strictly increasing")]
    NonMonotoneExperience,

    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate regressor: sum of squared experience growth is zero")]
    DegenerateRegressor,

    #[error("MA(1) likelihood maximisation did not converge (best rho = {best_rho}, log-likelihood = {best_log_likelihood})")]
    Ma1NonConvergence {
        best_rho: f64,
        best_log_likelihood: f64,
    },

    #[error("all {excluded} MA(1) coefficients were excluded at |rho| > 0.99")]
    AllRhoExcluded { excluded: usize },

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample")]
    EmptySample,

    #[error("forecast grids do not match")]
    MismatchedGrids,

    #[error("replicate {replicate} (seed {seed}) failed: {source}")]
    Replicate {
        replicate: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
