//! Closed-form forecast-error variances for the Moore and Wright models, with
//! and without MA(1) noise, plus the error normalisers built on them.
//!
//! Notation: `tau` is the forecast horizon, `m` the number of differences in
//! the estimation window, and `A = tau + tau^2 / m`.

use crate::diagnostics::Reference;
use crate::error::{invalid, Error, Result};

/// `A = tau + tau^2 / m`.
pub fn shorthand_a(tau: usize, m: usize) -> f64 {
    let t = tau as f64;
    t + t * t / m as f64
}

/// Horizon/window pair with its `A` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonSpec {
    pub tau: usize,
    pub m: usize,
    pub a: f64,
}

impl HorizonSpec {
    pub fn new(tau: usize, m: usize) -> Result<Self> {
        if tau < 1 || m < 2 {
            return Err(invalid(format!("horizon needs tau >= 1 and m >= 2, got tau={tau}, m={m}")));
        }
        Ok(Self {
            tau,
            m,
            a: shorthand_a(tau, m),
        })
    }
}

/// Moore model without autocorrelation: `K^2 A`.
pub fn moore_var(k: f64, tau: usize, m: usize) -> f64 {
    k * k * shorthand_a(tau, m)
}

fn sum_sq(xs: &[f64]) -> Result<f64> {
    let s: f64 = xs.iter().map(|v| v * v).sum();
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::DegenerateRegressor)
    }
}

/// Wright model with i.i.d. noise, conditional on the realised experience
/// growth: `sigma^2 (tau + (sum future X)^2 / sum past X^2)`, `tau = len(future_x)`.
pub fn wright_var(sigma_eta: f64, past_x: &[f64], future_x: &[f64]) -> Result<f64> {
    let sxx = sum_sq(past_x)?;
    let sf: f64 = future_x.iter().sum();
    Ok(sigma_eta * sigma_eta * (future_x.len() as f64 + sf * sf / sxx))
}

/// The same variance written with moments of the experience growth:
/// `sigma^2 (tau + (tau^2/m) r_f^2 / (sigma_xp^2 + r_p^2))`.
///
/// It matches [`wright_var`] exactly when `sigma_x_past` is the population
/// (denominator `m`) standard deviation of the past growth rates.
pub fn wright_var_rewritten(
    sigma_eta: f64,
    tau: usize,
    m: usize,
    r_future: f64,
    r_past: f64,
    sigma_x_past: f64,
) -> Result<f64> {
    let denom = sigma_x_past * sigma_x_past + r_past * r_past;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateRegressor);
    }
    let t = tau as f64;
    Ok(sigma_eta * sigma_eta * (t + t * t / m as f64 * r_future * r_future / denom))
}

/// Parameter-error weights `H_j = -(sum future X / sum past X^2) X_j`, one per past difference.
pub fn hj_weights(past_x: &[f64], future_x: &[f64]) -> Result<Vec<f64>> {
    let sxx = sum_sq(past_x)?;
    let c = -future_x.iter().sum::<f64>() / sxx;
    Ok(past_x.iter().map(|x| c * x).collect())
}

/// Wright model with MA(1) noise, forecasting as if there were none:
///
/// ```text
/// sigma_u^2 ( rho^2 H_1^2 + sum_{j<m} (H_j + rho H_{j+1})^2 + (rho + H_m)^2
///             + (tau - 1)(1 + rho)^2 + 1 )
/// ```
pub fn wright_ma1_var(sigma_u: f64, rho: f64, past_x: &[f64], future_x: &[f64]) -> Result<f64> {
    Ok(sigma_u * sigma_u * wright_ma1_factor(rho, past_x, future_x)?)
}

/// [`wright_ma1_var`] divided by `sigma_u^2`.
pub fn wright_ma1_factor(rho: f64, past_x: &[f64], future_x: &[f64]) -> Result<f64> {
    if future_x.is_empty() {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    let h = hj_weights(past_x, future_x)?;
    let m = h.len();
    let mut s = rho * rho * h[0] * h[0];
    for j in 0..m - 1 {
        s += (h[j] + rho * h[j + 1]).powi(2);
    }
    s += (rho + h[m - 1]).powi(2);
    s += (future_x.len() - 1) as f64 * (1.0 + rho).powi(2) + 1.0;
    Ok(s)
}

/// Constant-growth reduction of [`wright_ma1_var`]:
/// `sigma_u^2 [ -2 rho + (1 + 2 (m-1) rho / m + rho^2) A ]`.
///
/// With `(sigma_v, theta)` in place of `(sigma_u, rho)` this is also the
/// Moore-MA(1) forecast-error variance. Floored at `1e-12 sigma_u^2`.
pub fn wright_ma1_var_const(sigma_u: f64, rho: f64, tau: usize, m: usize) -> f64 {
    let mf = m as f64;
    let a = shorthand_a(tau, m);
    let factor = -2.0 * rho + (1.0 + 2.0 * (mf - 1.0) * rho / mf + rho * rho) * a;
    let floor = 1e-12;
    if factor < floor {
        log::warn!("MA(1) variance factor {factor} floored (rho={rho}, tau={tau}, m={m})");
        return sigma_u * sigma_u * floor;
    }
    sigma_u * sigma_u * factor
}

/// Large-`tau`, large-`m` approximation: `sigma_eta^2 (1+rho)^2 / (1+rho^2) A`.
pub fn approx_var(sigma_eta: f64, rho: f64, tau: usize, m: usize) -> f64 {
    sigma_eta * sigma_eta * (1.0 + rho).powi(2) / (1.0 + rho * rho) * shorthand_a(tau, m)
}

/// `raw / sqrt(variance)`.
pub fn normalize_error(raw: f64, variance: f64) -> Result<f64> {
    if variance > 0.0 && variance.is_finite() {
        Ok(raw / variance.sqrt())
    } else {
        Err(Error::NonPositiveVariance(variance))
    }
}

/// Moore normalisation `E / K_hat`, applied to errors of either model.
pub fn moore_normalize(raw: f64, k_hat: f64) -> Result<f64> {
    if k_hat > 0.0 && k_hat.is_finite() {
        Ok(raw / k_hat)
    } else {
        Err(Error::NonPositiveVariance(k_hat))
    }
}

/// Divides a Moore-normalised error by `sqrt(A)` so horizons can be pooled.
pub fn horizon_rescale(eps: f64, a: f64) -> f64 {
    eps / a.sqrt()
}

/// Reference distribution for errors normalised with a known variance
/// (Normal) or an estimated one (Student with `m - 1` degrees of freedom).
pub fn reference_for(estimated_variance: bool, m: usize) -> Reference {
    if estimated_variance {
        Reference::Student((m - 1) as f64)
    } else {
        Reference::Normal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn a_factor() {
        assert!((shorthand_a(1, 5) - 1.2).abs() < 1e-15);
        assert_eq!(shorthand_a(20, 5), 100.0);
        assert!((shorthand_a(7, 1_000_000_000) - 7.0).abs() < 1e-6);
        assert!(HorizonSpec::new(0, 5).is_err());
        assert_eq!(HorizonSpec::new(20, 5).unwrap().a, 100.0);
    }

    #[test]
    fn moore_examples() {
        assert!((moore_var(1.0, 1, 5) - 1.2).abs() < 1e-15);
        let v = moore_var(0.153, 12, 40);
        assert!((v - 0.153f64.powi(2) * 15.6).abs() < 1e-15);
        assert!((v - 0.365_180_4).abs() < 1e-7);
        assert_eq!(moore_var(0.0, 3, 5), 0.0);
    }

    #[test]
    fn wright_examples() {
        let s = 0.3;
        let v = wright_var(s, &[1.0, 2.0], &[3.0]).unwrap();
        assert!(rel(v, 2.8 * s * s) < 1e-14);
        let r = 0.07;
        let v = wright_var(s, &[r; 6], &[r; 4]).unwrap();
        assert!(rel(v, s * s * shorthand_a(4, 6)) < 1e-12);
        let v = wright_var(s, &[1.0, 2.0], &[0.0]).unwrap();
        assert!(rel(v, s * s) < 1e-15);
        assert!(wright_var(s, &[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn rewritten_examples() {
        let v = wright_var_rewritten(0.1, 4, 5, 0.1, 0.1, 0.1).unwrap();
        assert!((v - 0.056).abs() < 1e-15);
        let v = wright_var_rewritten(0.2, 6, 9, 0.3, 0.3, 0.0).unwrap();
        assert!(rel(v, 0.04 * shorthand_a(6, 9)) < 1e-14);
        let v = wright_var_rewritten(0.2, 6, 9, 0.3, 0.3, 1e8).unwrap();
        assert!(rel(v, 0.04 * 6.0) < 1e-12);
        assert!(wright_var_rewritten(0.2, 6, 9, 0.3, 0.0, 0.0).is_err());

        // moment-matched fluctuating series
        let past = [0.12, 0.08, 0.15, 0.05, 0.10];
        let future = [0.09, 0.11, 0.10];
        let m = past.len();
        let rp = past.iter().sum::<f64>() / m as f64;
        let sp = (past.iter().map(|x| (x - rp).powi(2)).sum::<f64>() / m as f64).sqrt();
        let rf = future.iter().sum::<f64>() / 3.0;
        let a = wright_var(0.1, &past, &future).unwrap();
        let b = wright_var_rewritten(0.1, 3, m, rf, rp, sp).unwrap();
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn weights() {
        let h = hj_weights(&[1.0, 2.0], &[3.0]).unwrap();
        assert!((h[0] + 0.6).abs() < 1e-15 && (h[1] + 1.2).abs() < 1e-15);
        let h = hj_weights(&[0.2; 5], &[0.2; 3]).unwrap();
        assert!(h.iter().all(|v| (v + 3.0 / 5.0).abs() < 1e-14));
        assert!(hj_weights(&[1.0, 2.0], &[0.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ma1_examples() {
        let v = wright_ma1_var(0.1, 0.6, &[1.0, 2.0], &[3.0]).unwrap();
        assert!((v - 0.032320).abs() < 1e-15);
        // rho = 0 gives the i.i.d. formula
        let past = [0.3, 0.1, 0.25, 0.4];
        let fut = [0.2, 0.35];
        let a = wright_ma1_var(0.2, 0.0, &past, &fut).unwrap();
        let b = wright_var(0.2, &past, &fut).unwrap();
        assert!(rel(a, b) < 1e-12);
        // constant X gives the closed form
        let a = wright_ma1_var(0.2, 0.45, &[0.1; 7], &[0.1; 5]).unwrap();
        let b = wright_ma1_var_const(0.2, 0.45, 5, 7);
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn ma1_const_examples() {
        assert!(rel(wright_ma1_var_const(1.3, 0.0, 4, 6), 1.69 * shorthand_a(4, 6)) < 1e-14);
        assert!((wright_ma1_var_const(1.0, 0.19, 20, 5) - 133.63).abs() < 1e-10);
        let ratio = wright_ma1_var_const(1.0 / (1.0f64 + 0.0361).sqrt(), 0.19, 2000, 100_000)
            / approx_var(1.0, 0.19, 2000, 100_000);
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn approx_examples() {
        assert!(rel(approx_var(0.7, 0.0, 3, 8), 0.49 * shorthand_a(3, 8)) < 1e-14);
        assert!((approx_var(1.0, 0.19, 10, 20) - 1.4161 / 1.0361 * 15.0).abs() < 1e-12);
        assert!((approx_var(1.0, 0.19, 10, 20) - 20.501).abs() < 1e-3);
    }

    #[test]
    fn normalisers() {
        assert_eq!(normalize_error(0.0, 3.0).unwrap(), 0.0);
        assert!((normalize_error(1.2, 1.44).unwrap() - 1.0).abs() < 1e-15);
        assert!(normalize_error(1.0, 0.0).is_err());
        assert!((moore_normalize(0.3, 0.15).unwrap() - 2.0).abs() < 1e-15);
        assert!(moore_normalize(0.3, 0.0).is_err());
        assert_eq!(horizon_rescale(2.0, 4.0), 1.0);
    }

    #[test]
    fn closed_form_stays_positive_at_extremes() {
        for &rho in &[-1.0, -0.99, -0.5, 0.0, 0.5, 1.0] {
            for tau in 1..4 {
                for m in 1..5 {
                    assert!(wright_ma1_var_const(1.0, rho, tau, m) >= 1.0 - 1e-12);
                }
            }
        }
    }
}
