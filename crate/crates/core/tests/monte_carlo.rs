//! Simulation oracles for the closed-form results. Each estimator is
//! re-implemented inline so the check does not go through library code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use expcurve::error_theory::{moore_var, wright_ma1_var};
use expcurve::estimators::{fit_moore, fit_wright};
use expcurve::hindcast::{hindcast_series, HindcastConfig, Model};
use expcurve::surrogate::{generate_dataset, growth_path, run_ensemble, SurrogateSpec};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn var0(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn moore_error_variance_matches_simulation() {
    let (k, m, tau, mu) = (0.15, 6, 4, -0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let errs: Vec<f64> = (0..40_000)
        .map(|_| {
            let y: Vec<f64> = (0..m + tau).map(|_| mu + k * normal(&mut rng)).collect();
            let mu_hat = y[..m].iter().sum::<f64>() / m as f64;
            y[m..].iter().sum::<f64>() - mu_hat * tau as f64
        })
        .collect();
    let sim = var0(&errs);
    let theory = moore_var(k, tau, m);
    assert!((sim / theory - 1.0).abs() < 0.04, "sim {sim} theory {theory}");
}

#[test]
fn wright_ma1_variance_matches_simulation() {
    let past = [0.3, 0.1, 0.25, 0.05, 0.2, 0.15, 0.4, 0.12];
    let future = [0.2, 0.35, 0.1, 0.05, 0.3];
    let (omega, sigma_u, rho) = (-0.4, 0.1, 0.5);
    let xs: Vec<f64> = past.iter().chain(&future).copied().collect();
    let m = past.len();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let errs: Vec<f64> = (0..40_000)
        .map(|_| {
            let mut prev = sigma_u * normal(&mut rng);
            let y: Vec<f64> = xs
                .iter()
                .map(|x| {
                    let u = sigma_u * normal(&mut rng);
                    let v = omega * x + u + rho * prev;
                    prev = u;
                    v
                })
                .collect();
            let sxy: f64 = past.iter().zip(&y).map(|(a, b)| a * b).sum();
            let sxx: f64 = past.iter().map(|a| a * a).sum();
            let w_hat = sxy / sxx;
            y[m..].iter().sum::<f64>() - w_hat * future.iter().sum::<f64>()
        })
        .collect();
    let sim = var0(&errs);
    let theory = wright_ma1_var(sigma_u, rho, &past, &future).unwrap();
    assert!((sim / theory - 1.0).abs() < 0.04, "sim {sim} theory {theory}");
}

#[test]
fn experience_growth_follows_tanh_law() {
    let (g, sq) = (0.1, 0.1);
    let mut vars = Vec::new();
    for rep in 0..8 {
        let (dq, dx) = growth_path(10_000, 500, g, sq, 100 + rep).unwrap();
        assert!(var0(&dx) < var0(&dq));
        vars.push(var0(&dx));
    }
    let pooled = vars.iter().sum::<f64>() / vars.len() as f64;
    let theory = sq * sq * (g / 2.0).tanh();
    assert!((pooled / theory - 1.0).abs() < 0.1, "pooled {pooled} theory {theory}");
}

fn sahal_median(sigma_q: f64) -> f64 {
    let omega = -0.3;
    let spec = SurrogateSpec::uniform(100, 50, 0.1, sigma_q, omega, 0.1, 0.0, 7);
    let mut r: Vec<f64> = generate_dataset(&spec, 0)
        .unwrap()
        .iter()
        .map(|s| {
            let d = s.diffs().unwrap();
            let w = fit_wright(&d).unwrap();
            let mo = fit_moore(&d).unwrap();
            let rbar = d.x().iter().sum::<f64>() / d.len() as f64;
            (mo.mu / rbar - w.omega).abs() / omega.abs()
        })
        .collect();
    r.sort_by(f64::total_cmp);
    r[r.len() / 2]
}

#[test]
fn sahal_residual_shrinks_with_production_noise() {
    let med: Vec<f64> = [0.2, 0.05, 0.0125].iter().map(|&s| sahal_median(s)).collect();
    assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
}

#[test]
fn moore_surrogate_band_brackets_student_variance() {
    let (m, tau_max) = (5, 8);
    let spec = SurrogateSpec {
        n_ensembles: 60,
        ..SurrogateSpec::uniform(40, 30, 0.1, 0.0, -0.3, 0.1, 0.0, 11)
    };
    let cfg = HindcastConfig { m, tau_max, ..Default::default() };
    let grid: Vec<f64> = (1..=tau_max).map(|t| t as f64).collect();
    let res = run_ensemble(&spec, grid, |d| {
        let mut sum = vec![0.0; tau_max];
        let mut n = vec![0usize; tau_max];
        for s in d {
            for e in hindcast_series(s, &cfg)?.iter().filter(|e| e.model == Model::Moore) {
                let k_hat = e.k_hat;
                let v = (e.raw_error / k_hat).powi(2) / e.a;
                sum[e.tau - 1] += v;
                n[e.tau - 1] += 1;
            }
        }
        Ok(sum.iter().zip(&n).map(|(s, c)| s / *c as f64).collect())
    })
    .unwrap();
    let hits = (0..tau_max).filter(|&j| res.brackets(j, 2.0)).count();
    assert!(hits as f64 >= 0.9 * tau_max as f64, "{res:?}");
}
