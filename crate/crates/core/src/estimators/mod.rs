//! Fitting the Wright (experience) and Moore (time-trend) difference models.
//!
//! Wright: `Y_t = omega * X_t + eta_t`, fitted by OLS through the origin.
//! Moore: `Y_t = mu + n_t`, fitted by the sample mean and variance.
//! Both noise terms may carry an MA(1) component, estimated in [`ma1`].

pub mod ma1;

pub use ma1::{fit_moore_ma1, fit_wright_ma1, ma1_log_likelihood, Ma1Fit, BOUNDARY_RHO};

use crate::data_model::DiffSeries;
use crate::error::{Error, Result};
use crate::stats;

/// Parameters of the Wright difference model fitted on `m` differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrightParams {
    /// Experience elasticity.
    pub omega: f64,
    /// Residual standard deviation (regression standard error).
    pub sigma_eta: f64,
    /// MA(1) coefficient; zero until estimated or assigned.
    pub rho: f64,
    pub m: usize,
    /// Set when an estimated `rho` sits at `|rho| >= 0.99`.
    pub boundary: bool,
}

impl WrightParams {
    /// Innovation scale implied by `sigma_eta` and `rho`.
    pub fn sigma_u(&self) -> f64 {
        self.sigma_eta / (1.0 + self.rho * self.rho).sqrt()
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self.boundary = rho.abs() >= BOUNDARY_RHO;
        self
    }

    /// Progress ratio `2^omega`: the cost multiplier per doubling of experience.
    pub fn progress_ratio(&self) -> f64 {
        progress_ratio(self.omega)
    }
}

pub fn progress_ratio(omega: f64) -> f64 {
    2f64.powf(omega)
}

/// Parameters of the Moore (random walk with drift) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MooreParams {
    pub mu: f64,
    /// Standard deviation of the cost differences.
    pub k: f64,
    /// MA(1) coefficient; zero until estimated or assigned.
    pub theta: f64,
    pub m: usize,
}

impl MooreParams {
    pub fn sigma_v(&self) -> f64 {
        self.k / (1.0 + self.theta * self.theta).sqrt()
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// OLS through the origin: `omega = sum(XY) / sum(X^2)`,
/// `sigma_eta^2 = sum((Y - omega X)^2) / (m - 1)`.
pub fn fit_wright(diffs: &DiffSeries) -> Result<WrightParams> {
    let m = diffs.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let (x, y) = (diffs.x(), diffs.y());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateRegressor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let omega = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - omega * a).powi(2))
        .sum();
    Ok(WrightParams {
        omega,
        sigma_eta: (ssr / (m - 1) as f64).sqrt(),
        rho: 0.0,
        m,
        boundary: false,
    })
}

/// Sample mean and standard deviation (denominator `m - 1`) of the cost differences.
pub fn fit_moore(diffs: &DiffSeries) -> Result<MooreParams> {
    fit_moore_y(diffs.y())
}

pub fn fit_moore_y(y: &[f64]) -> Result<MooreParams> {
    let m = y.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    Ok(MooreParams {
        mu: stats::mean(y),
        k: stats::sample_std(y),
        theta: 0.0,
        m,
    })
}

/// Pooled MA(1) coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRho {
    pub rho_star: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Estimates above this magnitude are dropped before pooling.
pub const POOL_EXCLUSION: f64 = 0.99;

/// Plain mean of the coefficients with `|rho| <= 0.99`.
pub fn pool_rho(rhos: &[f64]) -> Result<PooledRho> {
    if rhos.is_empty() {
        return Err(Error::EmptySample);
    }
    let kept: Vec<f64> = rhos
        .iter()
        .copied()
        .filter(|r| r.abs() <= POOL_EXCLUSION)
        .collect();
    let excluded = rhos.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::AllRhoExcluded { excluded });
    }
    Ok(PooledRho {
        rho_star: stats::mean(&kept),
        used: kept.len(),
        excluded,
    })
}
