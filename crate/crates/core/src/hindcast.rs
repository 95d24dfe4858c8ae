//! Rolling-origin hindcasting: fit both models on every window of `m + 1`
//! observations, forecast each reachable horizon, and record the errors.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data_model::TechSeries;
use crate::diagnostics::Reference;
use crate::error::{invalid, Result};
use crate::error_theory::{shorthand_a, wright_ma1_factor, wright_ma1_var_const};
use crate::estimators::{fit_moore_y, fit_wright};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Model {
    Moore,
    Wright,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Moore => "moore",
            Model::Wright => "wright",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moore" => Ok(Model::Moore),
            "wright" => Ok(Model::Wright),
            other => Err(invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Which reference distribution normalised errors are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Normal,
    /// Student with `m - 1` degrees of freedom.
    Student,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HindcastConfig {
    /// Differences per estimation window.
    pub m: usize,
    pub tau_max: usize,
    /// Pooled MA(1) coefficient used in the Wright normaliser.
    pub rho: f64,
    pub reference: ReferenceKind,
    /// Per-technology overrides of `rho`.
    pub tech_rho: BTreeMap<String, f64>,
}

impl Default for HindcastConfig {
    fn default() -> Self {
        Self {
            m: 5,
            tau_max: 20,
            rho: 0.19,
            reference: ReferenceKind::Student,
            tech_rho: BTreeMap::new(),
        }
    }
}

impl HindcastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid(format!("m must be at least 2, got {}", self.m)));
        }
        if self.tau_max < 1 {
            return Err(invalid("tau_max must be at least 1"));
        }
        for (name, &rho) in std::iter::once(("<pooled>", &self.rho))
            .chain(self.tech_rho.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if !(rho.abs() <= 1.0) {
                return Err(invalid(format!("rho for {name} must lie in [-1, 1], got {rho}")));
            }
        }
        Ok(())
    }

    pub fn rho_for(&self, technology: &str) -> f64 {
        self.tech_rho.get(technology).copied().unwrap_or(self.rho)
    }

    pub fn reference_distribution(&self) -> Reference {
        match self.reference {
            ReferenceKind::Normal => Reference::Normal,
            ReferenceKind::Student => Reference::Student((self.m - 1) as f64),
        }
    }

    /// Number of errors per model for a series of `t_len` observations.
    pub fn error_count(&self, t_len: usize) -> usize {
        (self.m + 1..t_len)
            .map(|t| self.tau_max.min(t_len - t))
            .sum()
    }
}

/// One forecast error from one window.
#[derive(Debug, Clone, PartialEq)]
pub struct HindcastError {
    pub technology: String,
    /// 1-based index of the last in-window observation.
    pub origin_index: usize,
    pub origin_year: i32,
    pub tau: usize,
    pub model: Model,
    /// Forecast of log cost at `origin + tau`.
    pub forecast: f64,
    /// Realised minus forecast log cost.
    pub raw_error: f64,
    pub k_hat: f64,
    pub sigma_eta_hat: f64,
    pub a: f64,
    /// Constant-growth MA(1) variance with `sigma_u^2 = sigma_eta_hat^2 / (1 + rho^2)`.
    pub wright_variance: f64,
    /// `K_hat^2 A`.
    pub moore_variance: f64,
    /// MA(1) variance factor (variance over `sigma_u^2`) using the realised
    /// past and future experience growth; NaN for the Moore rows.
    pub ma1_factor: f64,
    /// The coefficient the variances were built with.
    pub rho: f64,
}

impl HindcastError {
    /// `E / K_hat`; NaN when `K_hat` is zero.
    pub fn moore_normalized(&self) -> f64 {
        guarded(self.raw_error, self.k_hat * self.k_hat)
    }

    /// Horizon-pooled error: Moore rows `E / (K_hat sqrt(A))`, Wright rows
    /// `E / sqrt(wright_variance)`. NaN for degenerate windows.
    pub fn pooled(&self) -> f64 {
        match self.model {
            Model::Moore => guarded(self.raw_error, self.moore_variance),
            Model::Wright => guarded(self.raw_error, self.wright_variance),
        }
    }
}

fn guarded(raw: f64, variance: f64) -> f64 {
    if variance > 0.0 && variance.is_finite() {
        raw / variance.sqrt()
    } else {
        f64::NAN
    }
}

/// Hindcasts every series. Series shorter than `m + 2` are skipped with a notice.
/// Output order is technology (input order), origin, horizon, model.
pub fn run_hindcast(dataset: &[TechSeries], config: &HindcastConfig) -> Result<Vec<HindcastError>> {
    config.validate()?;
    let per_tech: Vec<Result<Vec<HindcastError>>> = dataset
        .par_iter()
        .map(|s| hindcast_series(s, config))
        .collect();
    let mut out = Vec::new();
    for r in per_tech {
        out.extend(r?);
    }
    let degenerate = out.iter().filter(|e| e.pooled().is_nan()).count();
    if degenerate > 0 {
        log::warn!("{degenerate} forecast errors come from windows with zero estimated volatility");
    }
    Ok(out)
}

/// Hindcast of a single series.
pub fn hindcast_series(series: &TechSeries, config: &HindcastConfig) -> Result<Vec<HindcastError>> {
    config.validate()?;
    let m = config.m;
    let t_len = series.len();
    if t_len < m + 2 {
        log::info!(
            "skipping {}: {} observations, need at least {}",
            series.name(),
            t_len,
            m + 2
        );
        return Ok(Vec::new());
    }
    let diffs = series.diffs()?;
    let y = series.log_cost();
    let x = series
        .log_experience()
        .expect("diffs() succeeded so experience exists");
    let rho = config.rho_for(series.name());
    let mut out = Vec::with_capacity(2 * config.error_count(t_len));

    // Observations are 1-based in the documentation and 0-based here:
    // origin index t (1-based) is element t - 1, and its window covers
    // differences t - m ..= t - 1 (1-based diff k joins obs k and k + 1).
    for t in m + 1..t_len {
        let o = t - 1;
        let window = diffs.window(o - m, o);
        let moore = fit_moore_y(window.y())?;
        let wright = match fit_wright(&window) {
            Ok(w) => w,
            Err(e) => {
                log::warn!("{} origin {t}: Wright fit failed: {e}", series.name());
                continue;
            }
        };
        let sigma_u = wright.sigma_eta / (1.0 + rho * rho).sqrt();
        for tau in 1..=config.tau_max.min(t_len - t) {
            let a = shorthand_a(tau, m);
            let actual = y[o + tau];
            let common = |model, forecast: f64, ma1_factor| HindcastError {
                technology: series.name().to_string(),
                origin_index: t,
                origin_year: series.years()[o],
                tau,
                model,
                forecast,
                raw_error: actual - forecast,
                k_hat: moore.k,
                sigma_eta_hat: wright.sigma_eta,
                a,
                wright_variance: wright_ma1_var_const(sigma_u, rho, tau, m),
                moore_variance: moore.k * moore.k * a,
                ma1_factor,
                rho,
            };
            out.push(common(Model::Moore, y[o] + moore.mu * tau as f64, f64::NAN));
            let future = &diffs.x()[o..o + tau];
            let factor = wright_ma1_factor(rho, window.x(), future).unwrap_or(f64::NAN);
            let forecast = y[o] + wright.omega * (x[o + tau] - x[o]);
            out.push(common(Model::Wright, forecast, factor));
        }
    }
    Ok(out)
}

/// How errors are scaled before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `E / K_hat` for both models.
    Moore,
    /// `E / sqrt(variance)` with each model's own theoretical variance,
    /// as in [`HindcastError::pooled`].
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonMse {
    pub tau: usize,
    pub mse: f64,
    pub count: usize,
}

fn normalized(e: &HindcastError, norm: Normalization) -> f64 {
    match norm {
        Normalization::Moore => e.moore_normalized(),
        Normalization::Theory => e.pooled(),
    }
}

/// Mean squared normalised error per horizon for one model. Degenerate
/// windows are left out of both the mean and the count.
pub fn mse_by_horizon(errors: &[HindcastError], model: Model, norm: Normalization) -> Vec<HorizonMse> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in errors.iter().filter(|e| e.model == model) {
        let v = normalized(e, norm);
        if v.is_finite() {
            let slot = acc.entry(e.tau).or_insert((0.0, 0));
            slot.0 += v * v;
            slot.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(tau, (s, n))| HorizonMse {
            tau,
            mse: s / n as f64,
            count: n,
        })
        .collect()
}

/// Horizon-pooled errors of one model, ready for distributional checks.
/// Degenerate windows are dropped.
pub fn pooled_errors(errors: &[HindcastError], model: Model) -> Vec<f64> {
    errors
        .iter()
        .filter(|e| e.model == model)
        .map(HindcastError::pooled)
        .filter(|v| v.is_finite())
        .collect()
}

/// Errors of one model, Moore-normalised and divided by `sqrt(A)`.
pub fn moore_pooled_errors(errors: &[HindcastError], model: Model) -> Vec<f64> {
    errors
        .iter()
        .filter(|e| e.model == model)
        .map(|e| e.moore_normalized() / e.a.sqrt())
        .filter(|v| v.is_finite())
        .collect()
}

/// Errors of the Wright model scaled by an explicit innovation variance
/// times the realised-growth MA(1) factor.
pub fn exact_normalized(errors: &[HindcastError], sigma_u2: impl Fn(&HindcastError) -> f64) -> Vec<f64> {
    errors
        .iter()
        .filter(|e| e.model == Model::Wright)
        .map(|e| guarded(e.raw_error, sigma_u2(e) * e.ma1_factor))
        .filter(|v| v.is_finite())
        .collect()
}
