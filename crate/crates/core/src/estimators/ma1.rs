//! Exact Gaussian maximum likelihood for a regression through the origin with
//! MA(1) errors, `e_t = Y_t - omega X_t = u_t + rho u_{t-1}`.
//!
//! The error covariance is `sigma_u^2 * G(rho)` with `G` tridiagonal
//! (`1 + rho^2` on the diagonal, `rho` off it). Its LDL' factorisation is the
//! innovations recursion
//!
//! ```text
//! d_1 = 1 + rho^2,   d_t = 1 + rho^2 - rho^2 / d_{t-1}
//! w_1 = e_1,         w_t = e_t - (rho / d_{t-1}) w_{t-1}
//! ```
//!
//! so that `e' G^{-1} e = sum w_t^2 / d_t` and `log det G = sum log d_t`.
//! For a fixed `rho`, `omega` (GLS) and `sigma_u^2` have closed forms; the
//! profile likelihood in `rho` is maximised on a grid and refined by
//! golden-section search.

use crate::data_model::DiffSeries;
use crate::error::{Error, Result};

use super::{fit_wright, WrightParams};

/// Estimates with `|rho| >= BOUNDARY_RHO` are flagged as boundary solutions.
pub const BOUNDARY_RHO: f64 = 0.99;

const GRID_STEP: f64 = 0.01;
const GOLDEN_TOL: f64 = 1e-9;
const GOLDEN_MAX_ITER: usize = 200;

/// Result of the MA(1) maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ma1Fit {
    /// OLS `omega` and `sigma_eta`, with `rho` set to the MLE.
    pub params: WrightParams,
    /// GLS slope at the likelihood maximum.
    pub omega_mle: f64,
    pub sigma_u_mle: f64,
    pub log_likelihood: f64,
    /// False when fewer than 4 differences were available.
    pub reliable: bool,
}

impl Ma1Fit {
    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn boundary(&self) -> bool {
        self.params.boundary
    }
}

struct Filtered {
    quad: f64,
    log_det: f64,
}

/// Applies `G(rho)^{-1/2}`-style whitening to two series at once and returns
/// the GLS pieces `(sum wx^2/d, sum wx wy/d, sum wy^2/d, log det)`.
fn whitened_moments(x: &[f64], y: &[f64], rho: f64) -> (f64, f64, f64, f64) {
    let r2 = rho * rho;
    let (mut d_prev, mut wx_prev, mut wy_prev) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sxx, mut sxy, mut syy, mut log_det) = (0.0, 0.0, 0.0, 0.0);
    for (t, (&xt, &yt)) in x.iter().zip(y).enumerate() {
        let (d, wx, wy) = if t == 0 {
            (1.0 + r2, xt, yt)
        } else {
            let l = rho / d_prev;
            (1.0 + r2 - r2 / d_prev, xt - l * wx_prev, yt - l * wy_prev)
        };
        sxx += wx * wx / d;
        sxy += wx * wy / d;
        syy += wy * wy / d;
        log_det += d.ln();
        d_prev = d;
        wx_prev = wx;
        wy_prev = wy;
    }
    (sxx, sxy, syy, log_det)
}

fn filter_residuals(e: &[f64], rho: f64) -> Filtered {
    let zeros = vec![0.0; e.len()];
    let (_, _, quad, log_det) = whitened_moments(&zeros, e, rho);
    Filtered { quad, log_det }
}

fn gaussian_log_likelihood(m: usize, quad_over_var: f64, log_det: f64, sigma2: f64) -> f64 {
    let mf = m as f64;
    -0.5 * (mf * (2.0 * std::f64::consts::PI * sigma2).ln() + log_det + quad_over_var)
}

/// Exact log-likelihood of the residuals `Y - omega X` under MA(1) noise.
pub fn ma1_log_likelihood(diffs: &DiffSeries, omega: f64, rho: f64, sigma_u: f64) -> f64 {
    let e: Vec<f64> = diffs
        .y()
        .iter()
        .zip(diffs.x())
        .map(|(y, x)| y - omega * x)
        .collect();
    let f = filter_residuals(&e, rho);
    let s2 = sigma_u * sigma_u;
    gaussian_log_likelihood(e.len(), f.quad / s2, f.log_det, s2)
}

#[derive(Debug, Clone, Copy)]
struct ProfilePoint {
    rho: f64,
    omega: f64,
    sigma2: f64,
    log_likelihood: f64,
}

fn profile(x: &[f64], y: &[f64], rho: f64) -> ProfilePoint {
    let (sxx, sxy, syy, log_det) = whitened_moments(x, y, rho);
    let omega = sxy / sxx;
    // e' G^{-1} e at the GLS slope
    let quad = (syy - sxy * sxy / sxx).max(0.0);
    let m = x.len();
    let sigma2 = quad / m as f64;
    let log_likelihood = if sigma2 > 0.0 {
        gaussian_log_likelihood(m, m as f64, log_det, sigma2)
    } else {
        f64::INFINITY
    };
    ProfilePoint {
        rho,
        omega,
        sigma2,
        log_likelihood,
    }
}

/// Jointly maximises the likelihood over `(omega, rho, sigma_u)` with
/// `rho` in `[-1, 1]`.
pub fn fit_wright_ma1(diffs: &DiffSeries) -> Result<Ma1Fit> {
    let ols = fit_wright(diffs)?;
    let (x, y) = (diffs.x(), diffs.y());
    let m = diffs.len();

    let n_grid = (2.0 / GRID_STEP).round() as i64;
    let mut best = profile(x, y, -1.0);
    for k in 1..=n_grid {
        let rho = (-1.0 + k as f64 * GRID_STEP).clamp(-1.0, 1.0);
        let p = profile(x, y, rho);
        if p.log_likelihood > best.log_likelihood {
            best = p;
        }
    }
    if !best.log_likelihood.is_finite() {
        return Err(Error::Ma1NonConvergence {
            best_rho: best.rho,
            best_log_likelihood: best.log_likelihood,
        });
    }

    // golden-section refinement on the neighbouring grid cells
    let (mut a, mut b) = (
        (best.rho - GRID_STEP).max(-1.0),
        (best.rho + GRID_STEP).min(1.0),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = profile(x, y, c);
    let mut fd = profile(x, y, d);
    let mut iter = 0;
    while (b - a) > GOLDEN_TOL {
        if iter == GOLDEN_MAX_ITER {
            return Err(Error::Ma1NonConvergence {
                best_rho: best.rho,
                best_log_likelihood: best.log_likelihood,
            });
        }
        iter += 1;
        if fc.log_likelihood > fd.log_likelihood {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = profile(x, y, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = profile(x, y, d);
        }
    }
    for p in [fc, fd, profile(x, y, 0.5 * (a + b))] {
        if p.log_likelihood > best.log_likelihood {
            best = p;
        }
    }

    Ok(Ma1Fit {
        params: ols.with_rho(best.rho),
        omega_mle: best.omega,
        sigma_u_mle: best.sigma2.sqrt(),
        log_likelihood: best.log_likelihood,
        reliable: m >= 4,
    })
}

/// MA(1) coefficient of the Moore model: the same estimator with a unit regressor.
pub fn fit_moore_ma1(y: &[f64]) -> Result<Ma1Fit> {
    fit_wright_ma1(&DiffSeries::moore(y.to_vec()))
}
