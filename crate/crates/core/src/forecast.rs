//! Forward distributional forecasts of log cost: normal predictive
//! distributions anchored at the last observation.

use crate::data_model::TechSeries;
use crate::error::{invalid, Error, Result};
use crate::error_theory::{approx_var, wright_ma1_var, wright_ma1_var_const};
use crate::estimators::{MooreParams, WrightParams};

/// Standard-deviation multipliers of the reported bands.
pub const BAND_MULTIPLIERS: [f64; 3] = [1.0, 1.5, 2.0];

/// Assumed future growth of log experience.
#[derive(Debug, Clone, PartialEq)]
pub enum FutureGrowth {
    /// The same rate every year.
    Constant(f64),
    /// One rate per future year.
    Path(Vec<f64>),
}

impl FutureGrowth {
    fn rates(&self, h: usize) -> Result<Vec<f64>> {
        let v = match self {
            FutureGrowth::Constant(r) => vec![*r; h],
            FutureGrowth::Path(p) => {
                if p.len() < h {
                    return Err(invalid(format!("growth path has {} entries, need {h}", p.len())));
                }
                p[..h].to_vec()
            }
        };
        if v.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("future experience growth must be positive"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistForecast {
    pub base_year: i32,
    pub horizons: Vec<usize>,
    pub mean_log_cost: Vec<f64>,
    /// Variance from the full formula with the realised past growth.
    pub var_exact: Vec<f64>,
    /// Large-horizon, large-sample approximation.
    pub var_simple: Vec<f64>,
    /// Mean assumed future experience growth (NaN for time-trend forecasts).
    pub assumed_future_r: f64,
}

impl DistForecast {
    pub fn years(&self) -> Vec<i32> {
        self.horizons.iter().map(|&t| self.base_year + t as i32).collect()
    }

    pub fn sd(&self) -> Vec<f64> {
        self.var_exact.iter().map(|v| v.sqrt()).collect()
    }

    /// `(lower, upper)` log-cost band at `k` standard deviations.
    pub fn log_band(&self, k: f64) -> (Vec<f64>, Vec<f64>) {
        let sd = self.sd();
        let lo = self.mean_log_cost.iter().zip(&sd).map(|(m, s)| m - k * s).collect();
        let hi = self.mean_log_cost.iter().zip(&sd).map(|(m, s)| m + k * s).collect();
        (lo, hi)
    }

    /// Band in cost levels: the exponential of [`log_band`](Self::log_band).
    pub fn level_band(&self, k: f64) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.log_band(k);
        (
            lo.into_iter().map(f64::exp).collect(),
            hi.into_iter().map(f64::exp).collect(),
        )
    }

    pub fn mean_level(&self) -> Vec<f64> {
        self.mean_log_cost.iter().map(|v| v.exp()).collect()
    }
}

fn check_horizon(h: usize) -> Result<()> {
    if h < 1 {
        Err(invalid("forecast horizon must be at least 1"))
    } else {
        Ok(())
    }
}

fn last_obs(series: &TechSeries) -> (i32, f64) {
    let n = series.len();
    (series.years()[n - 1], series.cost()[n - 1].ln())
}

/// Wright forecast from a series with experience. `params.rho` is the
/// MA(1) coefficient assumed for the noise.
pub fn forecast_wright(
    series: &TechSeries,
    params: &WrightParams,
    future: &FutureGrowth,
    h: usize,
) -> Result<DistForecast> {
    let diffs = series.diffs()?;
    let (year, y_t) = last_obs(series);
    forecast_wright_from_parts(diffs.x(), y_t, year, params, future, h)
}

/// Wright forecast from the past experience growth rates and the last log cost.
pub fn forecast_wright_from_parts(
    past_x: &[f64],
    y_t: f64,
    base_year: i32,
    params: &WrightParams,
    future: &FutureGrowth,
    h: usize,
) -> Result<DistForecast> {
    check_horizon(h)?;
    if !(params.sigma_eta >= 0.0 && params.omega.is_finite() && params.rho.abs() <= 1.0) {
        return Err(invalid("degenerate Wright parameters"));
    }
    let rates = future.rates(h)?;
    let m = past_x.len();
    let sigma_u = params.sigma_u();
    let mut out = DistForecast {
        base_year,
        horizons: (1..=h).collect(),
        mean_log_cost: Vec::with_capacity(h),
        var_exact: Vec::with_capacity(h),
        var_simple: Vec::with_capacity(h),
        assumed_future_r: rates.iter().sum::<f64>() / h as f64,
    };
    let mut cum = 0.0;
    for tau in 1..=h {
        cum += rates[tau - 1];
        out.mean_log_cost.push(y_t + params.omega * cum);
        out.var_exact.push(wright_ma1_var(sigma_u, params.rho, past_x, &rates[..tau])?);
        out.var_simple.push(approx_var(params.sigma_eta, params.rho, tau, m));
    }
    Ok(out)
}

/// Time-trend forecast; `params.theta` is the MA(1) coefficient and
/// `params.m` the number of differences the drift was estimated on.
pub fn forecast_moore(series: &TechSeries, params: &MooreParams, h: usize) -> Result<DistForecast> {
    let (year, y_t) = last_obs(series);
    forecast_moore_from_parts(y_t, year, params, h)
}

pub fn forecast_moore_from_parts(y_t: f64, base_year: i32, params: &MooreParams, h: usize) -> Result<DistForecast> {
    check_horizon(h)?;
    if !(params.k >= 0.0 && params.mu.is_finite() && params.theta.abs() <= 1.0 && params.m >= 1) {
        return Err(invalid("degenerate Moore parameters"));
    }
    let sigma_v = params.sigma_v();
    let horizons: Vec<usize> = (1..=h).collect();
    Ok(DistForecast {
        base_year,
        mean_log_cost: horizons.iter().map(|&t| y_t + params.mu * t as f64).collect(),
        var_exact: horizons
            .iter()
            .map(|&t| wright_ma1_var_const(sigma_v, params.theta, t, params.m))
            .collect(),
        var_simple: horizons
            .iter()
            .map(|&t| approx_var(params.k, params.theta, t, params.m))
            .collect(),
        horizons,
        assumed_future_r: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastComparison {
    pub tau: usize,
    /// `mean_a - mean_b` in log cost.
    pub mean_diff: f64,
    /// Ratio of band widths (standard deviations), `a / b`.
    pub width_ratio: f64,
    /// Same ratio from the simplified variances.
    pub width_ratio_simple: f64,
}

pub fn compare_forecasts(a: &DistForecast, b: &DistForecast) -> Result<Vec<ForecastComparison>> {
    if a.base_year != b.base_year || a.horizons != b.horizons {
        return Err(Error::MismatchedGrids);
    }
    Ok((0..a.horizons.len())
        .map(|i| ForecastComparison {
            tau: a.horizons[i],
            mean_diff: a.mean_log_cost[i] - b.mean_log_cost[i],
            width_ratio: (a.var_exact[i] / b.var_exact[i]).sqrt(),
            width_ratio_simple: (a.var_simple[i] / b.var_simple[i]).sqrt(),
        })
        .collect())
}
