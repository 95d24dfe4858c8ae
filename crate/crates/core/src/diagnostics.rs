//! Distributional checks for normalised forecast errors: ECDF against a
//! reference CDF, probability integral transform, Kolmogorov-Smirnov
//! distance, and the Sahal-identity and tanh-law scatter data.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::data_model::GrowthStats;
use crate::error::{invalid, Error, Result};
use crate::surrogate::sigma_x_theory;

/// Reference distribution for normalised errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Normal,
    /// Student t with the given degrees of freedom.
    Student(f64),
    Uniform,
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Reference::Normal => std_normal().cdf(x),
            Reference::Student(df) => student(df).cdf(x),
            Reference::Uniform => x.clamp(0.0, 1.0),
        }
    }

    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match *self {
            Reference::Normal => std_normal().inverse_cdf(p),
            Reference::Student(df) => student(df).inverse_cdf(p),
            Reference::Uniform => p.clamp(0.0, 1.0),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Reference::Uniform)
    }

    /// Evaluates the CDF over a whole slice, building the distribution once.
    fn cdf_all(&self, xs: &[f64]) -> Vec<f64> {
        match *self {
            Reference::Normal => {
                let d = std_normal();
                xs.iter().map(|&x| d.cdf(x)).collect()
            }
            Reference::Student(df) => {
                let d = student(df);
                xs.iter().map(|&x| d.cdf(x)).collect()
            }
            Reference::Uniform => xs.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        }
    }
}

impl std::fmt::Display for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reference::Normal => write!(f, "normal"),
            Reference::Student(df) => write!(f, "student({df})"),
            Reference::Uniform => write!(f, "uniform"),
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn student(df: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, df).expect("degrees of freedom must be positive")
}

/// A sample compared against a reference CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct DistCheck {
    /// The sample in ascending order.
    pub sorted: Vec<f64>,
    pub reference: Reference,
    /// `sup |ECDF - F|`.
    pub ks_stat: f64,
    /// Reference CDF at each sorted sample point.
    pub pit_values: Vec<f64>,
}

impl DistCheck {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `(x, ECDF(x), F(x))` at every sample point.
    pub fn ecdf_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .zip(&self.pit_values)
            .enumerate()
            .map(move |(i, (&x, &f))| (x, (i + 1) as f64 / n, f))
    }

    /// Whether the KS distance is below the asymptotic critical value at `alpha`.
    pub fn passes_ks(&self, alpha: f64) -> bool {
        self.ks_stat < ks_critical(self.sorted.len(), alpha)
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: sample.len(),
        });
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(invalid("sample contains NaN"));
    }
    Ok(())
}

/// KS distance of an already sorted sample given the reference CDF at each point.
fn ks_sorted(cdf: &[f64]) -> f64 {
    let n = cdf.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Empirical CDF of `sample` against `reference`, with the KS distance.
pub fn ecdf_vs_reference(sample: &[f64], reference: Reference) -> Result<DistCheck> {
    check_sample(sample)?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pit_values = reference.cdf_all(&sorted);
    let ks_stat = ks_sorted(&pit_values);
    Ok(DistCheck {
        sorted,
        reference,
        ks_stat,
        pit_values,
    })
}

/// Probability integral transform, in the order of `sample`.
pub fn pit(sample: &[f64], reference: Reference) -> Result<Vec<f64>> {
    check_sample(sample)?;
    Ok(reference.cdf_all(sample))
}

/// Asymptotic one-sample KS critical value `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// ECDF evaluated on a fixed grid (fraction of values `<= g`).
pub fn ecdf_on_grid(sample: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    grid.iter()
        .map(|g| sorted.partition_point(|v| v <= g) as f64 / n)
        .collect()
}

/// One point of the Sahal-identity scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SahalPoint {
    pub omega: f64,
    pub mu_over_r: f64,
    /// `omega - mu / r`.
    pub residual: f64,
}

/// Pairs each `omega` with `mu / r` from `(mu, r, omega)` triples.
pub fn sahal_check(stats: &[(f64, f64, f64)]) -> Result<Vec<SahalPoint>> {
    stats
        .iter()
        .map(|&(mu, r, omega)| {
            if r == 0.0 {
                return Err(invalid("experience growth r is zero"));
            }
            let mu_over_r = mu / r;
            Ok(SahalPoint {
                omega,
                mu_over_r,
                residual: omega - mu_over_r,
            })
        })
        .collect()
}

/// Observed against predicted experience volatility, plus drifts for the inset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhPoint {
    pub sigma_x_observed: f64,
    pub sigma_x_theory: f64,
    pub r: f64,
    pub g: f64,
}

pub fn tanh_check(stats: &[GrowthStats]) -> Result<Vec<TanhPoint>> {
    stats
        .iter()
        .map(|s| {
            let (_, var_x) = sigma_x_theory(s.g, s.sigma_q)?;
            Ok(TanhPoint {
                sigma_x_observed: s.sigma_x,
                sigma_x_theory: var_x.sqrt(),
                r: s.r,
                g: s.g,
            })
        })
        .collect()
}
