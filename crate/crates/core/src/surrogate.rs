//! Synthetic datasets under the Wright-MA(1) model and the ensemble machinery
//! that turns any dataset statistic into mean and 95% bands.
//!
//! Every random draw comes from a ChaCha8 stream seeded by [`sub_seed`], a
//! pure function of `(seed, replicate, technology, stream, attempt)`, so the
//! output never depends on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data_model::{TechSeries, MIN_DISCRETE_GROWTH};
use crate::diagnostics::{ecdf_vs_reference, DistCheck, Reference};
use crate::error::{invalid, Error, Result};
use crate::hindcast::{exact_normalized, hindcast_series, HindcastConfig, ReferenceKind};
use crate::params::ParamRow;
use crate::stats;

const STREAM_PRODUCTION: u64 = 1;
const STREAM_COST: u64 = 2;
/// Technology index used for the production stream when it is shared.
const SHARED: u64 = u64::MAX;
const MAX_ATTEMPTS: u64 = 1000;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation.
pub fn sub_seed(seed: u64, replicate: u64, tech: u64, stream: u64, attempt: u64) -> u64 {
    [replicate, tech, stream, attempt]
        .iter()
        .fold(splitmix64(seed), |h, &v| splitmix64(h ^ splitmix64(v)))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log production `g t + sum a_j`, `a_j ~ N(0, sigma_q^2)`, starting at 0.
pub fn gen_log_production(t_len: usize, g: f64, sigma_q: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_len);
    let mut level = 0.0;
    for t in 0..t_len {
        if t > 0 {
            let a: f64 = rng.sample(StandardNormal);
            level += g + sigma_q * a;
        }
        out.push(level);
    }
    out
}

/// Geometric random walk production with `Q_0 = 1`. Long paths overflow;
/// use [`gen_log_production`] for those.
pub fn gen_production(t_len: usize, g: f64, sigma_q: f64, seed: u64) -> Vec<f64> {
    gen_log_production(t_len, g, sigma_q, &mut rng_for(seed))
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Log cost path starting at 0 with differences
/// `omega X_t + u_t + rho u_{t-1}`, `sigma_u = sigma_eta / sqrt(1 + rho^2)`.
/// The pre-sample innovation is drawn too, so the first residual already
/// has the stationary variance.
pub fn gen_cost_with(x_diffs: &[f64], omega: f64, sigma_eta: f64, rho: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sigma_u = sigma_eta / (1.0 + rho * rho).sqrt();
    let mut prev: f64 = sigma_u * rng.sample::<f64, _>(StandardNormal);
    let mut y = Vec::with_capacity(x_diffs.len() + 1);
    y.push(0.0);
    for (i, x) in x_diffs.iter().enumerate() {
        let u = sigma_u * rng.sample::<f64, _>(StandardNormal);
        y.push(y[i] + omega * x + u + rho * prev);
        prev = u;
    }
    y
}

pub fn gen_cost(x_diffs: &[f64], omega: f64, sigma_eta: f64, rho: f64, seed: u64) -> Result<Vec<f64>> {
    if !(rho.abs() <= 1.0) {
        return Err(invalid(format!("rho must lie in [-1, 1], got {rho}")));
    }
    if !(sigma_eta >= 0.0) {
        return Err(invalid("sigma_eta must be non-negative"));
    }
    Ok(gen_cost_with(x_diffs, omega, sigma_eta, rho, &mut rng_for(seed)))
}

fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// How cumulative production is built from production.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperienceMode {
    /// Initial stock `Q_0 / g_d`, then `Z_{t+1} = Z_t + Q_t`.
    Corrected,
    /// `Z_t = sum_{i <= t} Q_i`, no allowance for earlier production.
    Raw,
}

/// Log experience from log production, computed without leaving log space.
/// Returns `None` for corrected experience when the discrete growth rate is
/// not positive.
pub fn log_experience(log_q: &[f64], mode: ExperienceMode) -> Option<Vec<f64>> {
    let n = log_q.len();
    let mut z = Vec::with_capacity(n);
    match mode {
        ExperienceMode::Corrected => {
            let g_d = ((log_q[n - 1] - log_q[0]) / (n - 1) as f64).exp_m1();
            if !(g_d > MIN_DISCRETE_GROWTH) {
                return None;
            }
            z.push(log_q[0] - g_d.ln());
            for t in 1..n {
                z.push(logaddexp(z[t - 1], log_q[t - 1]));
            }
        }
        ExperienceMode::Raw => {
            z.push(log_q[0]);
            for t in 1..n {
                z.push(logaddexp(z[t - 1], log_q[t]));
            }
        }
    }
    Some(z)
}

/// Long-run approximation `(E[X], Var[X]) ~ (g, sigma_q^2 tanh(g / 2))`.
pub fn sigma_x_theory(g: f64, sigma_q: f64) -> Result<(f64, f64)> {
    if !(g > 0.0) {
        return Err(invalid(format!("production drift must be positive, got {g}")));
    }
    Ok((g, sigma_q * sigma_q * (g / 2.0).tanh()))
}

/// Production and experience growth rates of one simulated path of
/// `burn_in + t_len` periods, keeping the last `t_len - 1` differences.
pub fn growth_path(t_len: usize, burn_in: usize, g: f64, sigma_q: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    sigma_x_theory(g, sigma_q)?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(sub_seed(seed, 0, 0, STREAM_PRODUCTION, attempt));
        let lq = gen_log_production(burn_in + t_len, g, sigma_q, &mut rng);
        if let Some(lz) = log_experience(&lq, ExperienceMode::Corrected) {
            let dq = stats::diff(&lq[burn_in..]);
            let dx = stats::diff(&lz[burn_in..]);
            return Ok((dq, dx));
        }
    }
    Err(invalid("could not draw a production path with positive growth"))
}

/// Generative parameters of one synthetic technology.
#[derive(Debug, Clone, PartialEq)]
pub struct TechParams {
    pub name: String,
    pub t_len: usize,
    pub g: f64,
    pub sigma_q: f64,
    pub omega: f64,
    pub sigma_eta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpec {
    pub techs: Vec<TechParams>,
    /// One production path for all technologies (needs equal lengths and
    /// takes `g`, `sigma_q` from the first technology).
    pub shared_production: bool,
    pub experience: ExperienceMode,
    pub seed: u64,
    pub n_ensembles: usize,
}

impl SurrogateSpec {
    /// `n_tech` identical technologies.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_tech: usize,
        t_len: usize,
        g: f64,
        sigma_q: f64,
        omega: f64,
        sigma_eta: f64,
        rho: f64,
        seed: u64,
    ) -> Self {
        let techs = (0..n_tech)
            .map(|i| TechParams {
                name: format!("tech{i:04}"),
                t_len,
                g,
                sigma_q,
                omega,
                sigma_eta,
                rho,
            })
            .collect();
        Self {
            techs,
            shared_production: false,
            experience: ExperienceMode::Corrected,
            seed,
            n_ensembles: 1000,
        }
    }

    /// 200 technologies, 50 periods, one shared production path with
    /// `g = sigma_q = 0.1`, raw experience, `omega = -0.3`,
    /// `sigma_eta = 0.1`, `rho = 0.6`.
    pub fn appendix_a(seed: u64) -> Self {
        Self {
            shared_production: true,
            experience: ExperienceMode::Raw,
            ..Self::uniform(200, 50, 0.1, 0.1, -0.3, 0.1, 0.6, seed)
        }
    }

    /// One technology per table row, with every `rho` forced to `rho_star`.
    pub fn from_table1(rows: &[ParamRow], rho_star: f64, seed: u64) -> Self {
        let techs = rows
            .iter()
            .map(|r| TechParams {
                name: r.technology.clone(),
                t_len: r.t_len,
                g: r.g,
                sigma_q: r.sigma_q,
                omega: r.omega,
                sigma_eta: r.sigma_eta,
                rho: rho_star,
            })
            .collect();
        Self {
            techs,
            shared_production: false,
            experience: ExperienceMode::Corrected,
            seed,
            n_ensembles: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.techs.is_empty() {
            return Err(invalid("surrogate spec has no technologies"));
        }
        for t in &self.techs {
            if t.t_len < 3 {
                return Err(invalid(format!("{}: need at least 3 periods", t.name)));
            }
            if !(t.sigma_q >= 0.0 && t.sigma_eta >= 0.0) {
                return Err(invalid(format!("{}: volatilities must be non-negative", t.name)));
            }
            if !(t.rho.abs() <= 1.0) {
                return Err(invalid(format!("{}: rho must lie in [-1, 1]", t.name)));
            }
        }
        if self.shared_production && self.techs.iter().any(|t| t.t_len != self.techs[0].t_len) {
            return Err(invalid("shared production needs equal series lengths"));
        }
        if self.n_ensembles == 0 {
            return Err(invalid("n_ensembles must be positive"));
        }
        Ok(())
    }
}

fn draw_experience(
    seed: u64,
    replicate: u64,
    tech: u64,
    t_len: usize,
    g: f64,
    sigma_q: f64,
    mode: ExperienceMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(sub_seed(seed, replicate, tech, STREAM_PRODUCTION, attempt));
        let lq = gen_log_production(t_len, g, sigma_q, &mut rng);
        if let Some(lz) = log_experience(&lq, mode) {
            return Ok((lq, lz));
        }
    }
    Err(invalid(format!(
        "no production path with positive growth after {MAX_ATTEMPTS} draws (g={g}, sigma_q={sigma_q})"
    )))
}

/// One synthetic dataset (replicate `replicate` of `spec`).
pub fn generate_dataset(spec: &SurrogateSpec, replicate: u64) -> Result<Vec<TechSeries>> {
    spec.validate()?;
    let shared = if spec.shared_production {
        let t0 = &spec.techs[0];
        Some(draw_experience(spec.seed, replicate, SHARED, t0.t_len, t0.g, t0.sigma_q, spec.experience)?)
    } else {
        None
    };
    spec.techs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (lq, lz) = match &shared {
                Some(s) => s.clone(),
                None => draw_experience(spec.seed, replicate, i as u64, p.t_len, p.g, p.sigma_q, spec.experience)?,
            };
            let dx = stats::diff(&lz);
            let mut rng = rng_for(sub_seed(spec.seed, replicate, i as u64, STREAM_COST, 0));
            let y = gen_cost_with(&dx, p.omega, p.sigma_eta, p.rho, &mut rng);
            let years: Vec<i32> = (1..=p.t_len as i32).collect();
            let cost = y.iter().map(|v| v.exp()).collect();
            let production = lq.iter().map(|v| v.exp()).collect();
            let experience = lz.iter().map(|v| v.exp()).collect();
            TechSeries::new(p.name.clone(), years, cost, production)?.with_experience(experience)
        })
        .collect()
}

/// Pointwise mean and 2.5% / 97.5% nearest-rank bands of a statistic over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Replicates contributing a finite value at each grid point.
    pub count: Vec<usize>,
}

impl EnsembleResult {
    /// Summarises `values[replicate][grid point]`; non-finite values are skipped.
    pub fn from_replicates(grid: Vec<f64>, values: &[Vec<f64>]) -> Result<Self> {
        let k = grid.len();
        if values.iter().any(|v| v.len() != k) {
            return Err(Error::MismatchedGrids);
        }
        let mut out = Self {
            grid,
            mean: Vec::with_capacity(k),
            lo: Vec::with_capacity(k),
            hi: Vec::with_capacity(k),
            count: Vec::with_capacity(k),
        };
        for j in 0..k {
            let mut col: Vec<f64> = values.iter().map(|v| v[j]).filter(|v| v.is_finite()).collect();
            col.sort_by(f64::total_cmp);
            out.count.push(col.len());
            if col.is_empty() {
                out.mean.push(f64::NAN);
                out.lo.push(f64::NAN);
                out.hi.push(f64::NAN);
            } else {
                out.mean.push(stats::mean(&col));
                out.lo.push(stats::percentile_nearest_rank(&col, 0.025));
                out.hi.push(stats::percentile_nearest_rank(&col, 0.975));
            }
        }
        Ok(out)
    }

    pub fn brackets(&self, j: usize, value: f64) -> bool {
        self.lo[j] <= value && value <= self.hi[j]
    }
}

/// Runs `statistic` on `spec.n_ensembles` synthetic datasets in parallel.
/// `statistic` must return one value per grid point.
pub fn run_ensemble<F>(spec: &SurrogateSpec, grid: Vec<f64>, statistic: F) -> Result<EnsembleResult>
where
    F: Fn(&[TechSeries]) -> Result<Vec<f64>> + Sync,
{
    spec.validate()?;
    let values: Vec<Vec<f64>> = (0..spec.n_ensembles as u64)
        .into_par_iter()
        .map(|r| {
            generate_dataset(spec, r)
                .and_then(|d| statistic(&d))
                .map_err(|e| Error::Replicate {
                    replicate: r as usize,
                    seed: spec.seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    EnsembleResult::from_replicates(grid, &values)
}

/// Window length and variance treatment for the simulation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendixMode {
    M5Estimated,
    M5True,
    M40Estimated,
    M40True,
}

impl AppendixMode {
    pub fn m(&self) -> usize {
        match self {
            AppendixMode::M5Estimated | AppendixMode::M5True => 5,
            AppendixMode::M40Estimated | AppendixMode::M40True => 40,
        }
    }

    pub fn true_variance(&self) -> bool {
        matches!(self, AppendixMode::M5True | AppendixMode::M40True)
    }

    pub fn reference(&self) -> Reference {
        if self.true_variance() {
            Reference::Normal
        } else {
            Reference::Student((self.m() - 1) as f64)
        }
    }
}

impl std::str::FromStr for AppendixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m5-estimated" => Ok(AppendixMode::M5Estimated),
            "m5-true" => Ok(AppendixMode::M5True),
            "m40-estimated" => Ok(AppendixMode::M40Estimated),
            "m40-true" => Ok(AppendixMode::M40True),
            other => Err(invalid(format!("unknown mode '{other}'"))),
        }
    }
}

/// Normalised Wright errors and their comparison with the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixResult {
    pub normalized: Vec<f64>,
    pub check: DistCheck,
}

fn normalize_wright(
    errors: &[crate::hindcast::HindcastError],
    true_sigma_u2: Option<f64>,
) -> Vec<f64> {
    exact_normalized(errors, |e| match true_sigma_u2 {
        Some(v) => v,
        None => e.sigma_eta_hat * e.sigma_eta_hat / (1.0 + e.rho * e.rho),
    })
}

/// Hindcasts the shared-production dataset with Wright's model and
/// normalises each error by its MA(1) variance given the realised
/// experience growth, using either the true or the estimated noise scale.
pub fn replicate_appendix_a(mode: AppendixMode, seed: u64) -> Result<AppendixResult> {
    let spec = SurrogateSpec::appendix_a(seed);
    let p = &spec.techs[0];
    let config = HindcastConfig {
        m: mode.m(),
        tau_max: 20,
        rho: p.rho,
        reference: ReferenceKind::Normal,
        ..Default::default()
    };
    let sigma_u2 = p.sigma_eta * p.sigma_eta / (1.0 + p.rho * p.rho);
    let dataset = generate_dataset(&spec, 0)?;
    let per_tech: Vec<Vec<f64>> = dataset
        .par_iter()
        .map(|s| {
            let errors = hindcast_series(s, &config)?;
            Ok(normalize_wright(&errors, mode.true_variance().then_some(sigma_u2)))
        })
        .collect::<Result<_>>()?;
    let normalized: Vec<f64> = per_tech.into_iter().flatten().collect();
    let check = ecdf_vs_reference(&normalized, mode.reference())?;
    Ok(AppendixResult { normalized, check })
}

/// Independent-window variant: 198000 series of 7 periods (one forecast
/// error each), `m = 5`, true variance. Each series draws its own production.
pub fn replicate_appendix_a_iid(seed: u64) -> Result<AppendixResult> {
    replicate_iid(seed, 198_000)
}

pub(crate) fn replicate_iid(seed: u64, n_series: usize) -> Result<AppendixResult> {
    let base = SurrogateSpec::appendix_a(seed);
    let p = base.techs[0].clone();
    let spec = SurrogateSpec {
        techs: vec![TechParams { t_len: 7, ..p.clone() }; n_series],
        shared_production: false,
        ..base
    };
    let config = HindcastConfig {
        m: 5,
        tau_max: 1,
        rho: p.rho,
        reference: ReferenceKind::Normal,
        ..Default::default()
    };
    let sigma_u2 = p.sigma_eta * p.sigma_eta / (1.0 + p.rho * p.rho);
    let dataset = generate_dataset(&spec, 0)?;
    let per_tech: Vec<Vec<f64>> = dataset
        .par_iter()
        .map(|s| Ok(normalize_wright(&hindcast_series(s, &config)?, Some(sigma_u2))))
        .collect::<Result<_>>()?;
    let normalized: Vec<f64> = per_tech.into_iter().flatten().collect();
    let pit = crate::diagnostics::pit(&normalized, Reference::Normal)?;
    let check = ecdf_vs_reference(&pit, Reference::Uniform)?;
    Ok(AppendixResult { normalized, check })
}
