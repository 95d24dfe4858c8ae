//! Subcommand implementations for the `expcurve` binary.
//!
//! Every command writes its CSV outputs atomically (temp file + rename) and
//! a `<command>.manifest` file of `key=value` lines next to them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use expcurve::data_model::{build_experience, fmt_f64, growth_stats, ingest_csv, write_derived_csv, write_input_csv};
use expcurve::diagnostics::{ecdf_vs_reference, ks_critical, sahal_check, tanh_check, DistCheck, Reference};
use expcurve::estimators::{fit_moore, fit_wright, fit_wright_ma1, pool_rho, MooreParams, WrightParams};
use expcurve::forecast::{
    compare_forecasts, forecast_moore, forecast_moore_from_parts, forecast_wright, forecast_wright_from_parts,
    DistForecast, FutureGrowth, BAND_MULTIPLIERS,
};
use expcurve::hindcast::{mse_by_horizon, run_hindcast, HindcastConfig, Model, Normalization, ReferenceKind};
use expcurve::params::{load_params, table1, ParamRow};
use expcurve::surrogate::{
    generate_dataset, replicate_appendix_a, replicate_appendix_a_iid, run_ensemble, AppendixMode, ExperienceMode,
    SurrogateSpec,
};
use expcurve::TechSeries;

pub const DEFAULT_SEED: u64 = 42;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    /// 0 means all available cores.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub command_line: String,
}

impl Context {
    fn run<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.threads).build()?;
        pool.install(f)
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .with_context(|| format!("writing {}", dir.join(name).display()))?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Flat `key=value` description of a run.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    fn new(ctx: &Context, command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("command_line", &ctx.command_line);
        m.set("seed", ctx.seed);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn input(&mut self, key: &str, path: &Path) -> Result<()> {
        self.set(key, path.display());
        self.set(&format!("{key}_sha256"), sha256_file(path)?);
        Ok(())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn write(&self, ctx: &Context) -> Result<()> {
        let name = format!("{}.manifest", self.entries["command"]);
        write_atomic(&ctx.output_dir, &name, self.render().as_bytes())
    }
}

/// Small CSV builder over pre-formatted fields.
struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(header)?;
        Ok(Self { out })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.out.write_record(fields)?;
        Ok(())
    }

    fn save(self, ctx: &Context, name: &str) -> Result<()> {
        let bytes = self.out.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        write_atomic(&ctx.output_dir, name, &bytes)
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

fn load_with_experience(path: &Path) -> Result<Vec<TechSeries>> {
    let data = ingest_csv(path).with_context(|| format!("reading {}", path.display()))?;
    data.into_iter()
        .map(|s| {
            let name = s.name().to_string();
            build_experience(s).with_context(|| format!("technology {name}"))
        })
        .collect()
}

fn load_table(arg: &str) -> Result<Vec<ParamRow>> {
    if arg == "bundled" {
        Ok(table1())
    } else {
        load_params(arg).with_context(|| format!("reading {arg}"))
    }
}

pub struct EstimateOpts {
    pub input: PathBuf,
}

/// Full-sample fits: one row per technology in the layout of the parameter table.
pub fn cmd_estimate(ctx: &Context, opts: &EstimateOpts) -> Result<()> {
    ctx.run(|| {
        let data = load_with_experience(&opts.input)?;
        let mut t = Table::new(&[
            "technology", "T", "mu", "K", "g", "sigma_q", "r", "sigma_x", "omega", "sigma_eta", "rho",
            "rho_boundary", "progress_ratio",
        ])?;
        let mut rhos = Vec::new();
        for s in &data {
            let ctx_msg = || format!("technology {}", s.name());
            let gs = growth_stats(s).with_context(ctx_msg)?;
            let d = s.diffs().with_context(ctx_msg)?;
            let w = fit_wright(&d).with_context(ctx_msg)?;
            let mo = fit_moore(&d).with_context(ctx_msg)?;
            let ma = fit_wright_ma1(&d).with_context(ctx_msg)?;
            rhos.push(ma.rho());
            t.row([
                s.name().to_string(),
                s.len().to_string(),
                f(mo.mu),
                f(mo.k),
                f(gs.g),
                f(gs.sigma_q),
                f(gs.r),
                f(gs.sigma_x),
                f(w.omega),
                f(w.sigma_eta),
                f(ma.rho()),
                ma.boundary().to_string(),
                f(w.progress_ratio()),
            ])?;
        }
        t.save(ctx, "estimates.csv")?;
        let mut series = Vec::new();
        write_derived_csv(&mut series, &data)?;
        write_atomic(&ctx.output_dir, "series.csv", &series)?;

        let mut man = RunManifest::new(ctx, "estimate");
        man.input("input", &opts.input)?;
        man.set("technologies", data.len());
        match pool_rho(&rhos) {
            Ok(p) => {
                man.set("pooled_rho", f(p.rho_star));
                man.set("pooled_rho_excluded", p.excluded);
                println!("pooled rho = {:.4} ({} excluded)", p.rho_star, p.excluded);
            }
            Err(e) => log::warn!("no pooled rho: {e}"),
        }
        man.write(ctx)
    })
}

pub struct HindcastOpts {
    pub input: PathBuf,
    pub m: usize,
    pub tau_max: usize,
    pub rho: f64,
}

pub const HINDCAST_HEADER: [&str; 10] = [
    "technology", "origin_year", "tau", "model", "raw_error", "K_hat", "sigma_eta_hat", "A", "normalized_error",
    "pooled_error",
];

pub fn cmd_hindcast(ctx: &Context, opts: &HindcastOpts) -> Result<()> {
    ctx.run(|| {
        let data = load_with_experience(&opts.input)?;
        let config = HindcastConfig {
            m: opts.m,
            tau_max: opts.tau_max,
            rho: opts.rho,
            ..Default::default()
        };
        let errors = run_hindcast(&data, &config)?;
        let mut t = Table::new(&HINDCAST_HEADER)?;
        for e in &errors {
            t.row([
                e.technology.clone(),
                e.origin_year.to_string(),
                e.tau.to_string(),
                e.model.as_str().to_string(),
                f(e.raw_error),
                f(e.k_hat),
                f(e.sigma_eta_hat),
                f(e.a),
                f(e.moore_normalized()),
                f(e.pooled()),
            ])?;
        }
        t.save(ctx, "hindcast.csv")?;

        let mut t = Table::new(&["tau", "model", "mse", "count"])?;
        for model in [Model::Moore, Model::Wright] {
            for r in mse_by_horizon(&errors, model, Normalization::Moore) {
                t.row([r.tau.to_string(), model.as_str().to_string(), f(r.mse), r.count.to_string()])?;
            }
        }
        t.save(ctx, "mse.csv")?;

        let mut man = RunManifest::new(ctx, "hindcast");
        man.input("input", &opts.input)?;
        man.set("m", opts.m);
        man.set("tau_max", opts.tau_max);
        man.set("rho", opts.rho);
        man.set("errors", errors.len());
        man.write(ctx)
    })
}

/// One row of `hindcast.csv`.
#[derive(Debug, Clone, Deserialize)]
pub struct HindcastRow {
    pub technology: String,
    pub origin_year: i32,
    pub tau: usize,
    pub model: String,
    pub raw_error: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    pub sigma_eta_hat: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub normalized_error: f64,
    pub pooled_error: f64,
}

pub fn read_hindcast(path: &Path) -> Result<Vec<HindcastRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{} row {}", path.display(), i + 2)))
        .collect()
}

pub struct DiagnoseOpts {
    pub hindcast: PathBuf,
    pub m: usize,
    pub normal_reference: bool,
    pub input: Option<PathBuf>,
}

fn write_check(ecdf: &mut Table, pits: &mut Table, label: &str, check: &DistCheck) -> Result<()> {
    for (x, e, fx) in check.ecdf_rows() {
        ecdf.row([label.to_string(), f(x), f(e), f(fx)])?;
    }
    let n = check.pit_values.len() as f64;
    for (i, p) in check.pit_values.iter().enumerate() {
        pits.row([label.to_string(), f(*p), f((i + 1) as f64 / n)])?;
    }
    Ok(())
}

pub fn cmd_diagnose(ctx: &Context, opts: &DiagnoseOpts) -> Result<()> {
    ctx.run(|| {
        if opts.m < 2 {
            bail!("m must be at least 2");
        }
        let rows = read_hindcast(&opts.hindcast)?;
        let reference = if opts.normal_reference {
            Reference::Normal
        } else {
            Reference::Student((opts.m - 1) as f64)
        };
        let mut ecdf = Table::new(&["model", "x", "ecdf", "reference_cdf"])?;
        let mut pits = Table::new(&["model", "pit", "ecdf"])?;
        let mut summary = Table::new(&["model", "n", "ks_stat", "ks_critical_1pct", "reference", "dropped"])?;
        for model in ["moore", "wright"] {
            let all: Vec<f64> = rows.iter().filter(|r| r.model == model).map(|r| r.pooled_error).collect();
            let sample: Vec<f64> = all.iter().copied().filter(|v| v.is_finite()).collect();
            if sample.len() < 2 {
                continue;
            }
            let check = ecdf_vs_reference(&sample, reference)?;
            write_check(&mut ecdf, &mut pits, model, &check)?;
            summary.row([
                model.to_string(),
                sample.len().to_string(),
                f(check.ks_stat),
                f(ks_critical(sample.len(), 0.01)),
                reference.to_string(),
                (all.len() - sample.len()).to_string(),
            ])?;
        }
        ecdf.save(ctx, "ecdf.csv")?;
        pits.save(ctx, "pit.csv")?;
        summary.save(ctx, "summary.csv")?;

        let mut man = RunManifest::new(ctx, "diagnose");
        man.input("hindcast", &opts.hindcast)?;
        man.set("m", opts.m);
        man.set("reference", reference);
        if let Some(input) = &opts.input {
            let data = load_with_experience(input)?;
            let mut sahal = Table::new(&["technology", "omega", "mu_over_r", "residual"])?;
            let mut tanh = Table::new(&["technology", "sigma_x_observed", "sigma_x_theory", "r", "g"])?;
            for s in &data {
                let ctx_msg = || format!("technology {}", s.name());
                let gs = growth_stats(s).with_context(ctx_msg)?;
                let d = s.diffs().with_context(ctx_msg)?;
                let w = fit_wright(&d).with_context(ctx_msg)?;
                let mo = fit_moore(&d).with_context(ctx_msg)?;
                let p = sahal_check(&[(mo.mu, gs.r, w.omega)]).with_context(ctx_msg)?[0];
                sahal.row([s.name().to_string(), f(p.omega), f(p.mu_over_r), f(p.residual)])?;
                match tanh_check(&[gs]) {
                    Ok(v) => tanh.row([
                        s.name().to_string(),
                        f(v[0].sigma_x_observed),
                        f(v[0].sigma_x_theory),
                        f(v[0].r),
                        f(v[0].g),
                    ])?,
                    Err(e) => log::warn!("{}: {e}", s.name()),
                }
            }
            sahal.save(ctx, "sahal.csv")?;
            tanh.save(ctx, "tanh.csv")?;
            man.input("input", input)?;
        }
        man.write(ctx)
    })
}

pub struct SimulateOpts {
    pub appendix_a: bool,
    pub mode: String,
    pub table1: Option<String>,
    pub rho_star: f64,
    pub n_tech: usize,
    pub periods: usize,
    pub g: f64,
    pub sigma_q: f64,
    pub omega: f64,
    pub sigma_eta: f64,
    pub rho: f64,
    pub n_ensembles: usize,
    pub shared_production: bool,
    pub raw_experience: bool,
    pub m: usize,
    pub tau_max: usize,
    pub dataset_only: bool,
}

pub fn cmd_simulate(ctx: &Context, opts: &SimulateOpts) -> Result<()> {
    ctx.run(|| {
        let mut man = RunManifest::new(ctx, "simulate");
        if opts.appendix_a {
            let result = if opts.mode == "iid" {
                replicate_appendix_a_iid(ctx.seed)?
            } else {
                replicate_appendix_a(opts.mode.parse::<AppendixMode>()?, ctx.seed)?
            };
            let mut ecdf = Table::new(&["model", "x", "ecdf", "reference_cdf"])?;
            let mut pits = Table::new(&["model", "pit", "ecdf"])?;
            write_check(&mut ecdf, &mut pits, "wright", &result.check)?;
            ecdf.save(ctx, "ecdf.csv")?;
            pits.save(ctx, "pit.csv")?;
            let n = result.check.len();
            let mut summary = Table::new(&["mode", "n", "ks_stat", "ks_critical_1pct", "reference"])?;
            summary.row([
                opts.mode.clone(),
                n.to_string(),
                f(result.check.ks_stat),
                f(ks_critical(n, 0.01)),
                result.check.reference.to_string(),
            ])?;
            summary.save(ctx, "summary.csv")?;
            man.set("appendix_a", true);
            man.set("mode", &opts.mode);
            return man.write(ctx);
        }

        let mut spec = match &opts.table1 {
            Some(arg) => {
                man.set("table1", arg);
                man.set("rho_star", opts.rho_star);
                SurrogateSpec::from_table1(&load_table(arg)?, opts.rho_star, ctx.seed)
            }
            None => {
                for (k, v) in [
                    ("n_tech", opts.n_tech as f64),
                    ("periods", opts.periods as f64),
                    ("g", opts.g),
                    ("sigma_q", opts.sigma_q),
                    ("omega", opts.omega),
                    ("sigma_eta", opts.sigma_eta),
                    ("rho", opts.rho),
                ] {
                    man.set(k, v);
                }
                SurrogateSpec::uniform(
                    opts.n_tech,
                    opts.periods,
                    opts.g,
                    opts.sigma_q,
                    opts.omega,
                    opts.sigma_eta,
                    opts.rho,
                    ctx.seed,
                )
            }
        };
        spec.shared_production = opts.shared_production;
        spec.experience = if opts.raw_experience {
            ExperienceMode::Raw
        } else {
            ExperienceMode::Corrected
        };
        spec.n_ensembles = opts.n_ensembles;
        man.set("shared_production", opts.shared_production);
        man.set("raw_experience", opts.raw_experience);

        if opts.dataset_only {
            let data = generate_dataset(&spec, 0)?;
            let mut buf = Vec::new();
            write_input_csv(&mut buf, &data)?;
            write_atomic(&ctx.output_dir, "dataset.csv", &buf)?;
            man.set("dataset_only", true);
            return man.write(ctx);
        }

        let config = HindcastConfig {
            m: opts.m,
            tau_max: opts.tau_max,
            rho: opts.rho_star,
            reference: ReferenceKind::Student,
            ..Default::default()
        };
        let tau_max = opts.tau_max;
        let grid: Vec<f64> = (1..=2 * tau_max).map(|t| t as f64).collect();
        let result = run_ensemble(&spec, grid, |data| {
            let errors = run_hindcast(data, &config)?;
            let mut v = vec![f64::NAN; 2 * tau_max];
            for (k, model) in [Model::Moore, Model::Wright].into_iter().enumerate() {
                for r in mse_by_horizon(&errors, model, Normalization::Moore) {
                    v[k * tau_max + r.tau - 1] = r.mse;
                }
            }
            Ok(v)
        })?;
        for (k, name) in ["bands_moore.csv", "bands_wright.csv"].into_iter().enumerate() {
            let mut t = Table::new(&["grid", "stat_mean", "lo", "hi"])?;
            for j in k * tau_max..(k + 1) * tau_max {
                t.row([(j - k * tau_max + 1).to_string(), f(result.mean[j]), f(result.lo[j]), f(result.hi[j])])?;
            }
            t.save(ctx, name)?;
        }
        man.set("n_ensembles", opts.n_ensembles);
        man.set("m", opts.m);
        man.set("tau_max", opts.tau_max);
        man.write(ctx)
    })
}

pub struct ForecastOpts {
    pub tech: String,
    pub input: Option<PathBuf>,
    pub table1: Option<String>,
    pub horizon: usize,
    pub future_growth: Option<f64>,
    pub rho_star: f64,
    pub theta_star: f64,
    pub last_cost: f64,
    pub base_year: i32,
}

pub const FORECAST_HEADER: [&str; 15] = [
    "year", "model", "mean_log_cost", "var_exact", "var_simple", "lo_2sd", "lo_1_5sd", "lo_1sd", "hi_1sd",
    "hi_1_5sd", "hi_2sd", "mean_cost_level", "lo_2sd_level", "hi_2sd_level", "assumed_future_r",
];

fn forecast_rows(t: &mut Table, model: &str, fc: &DistForecast) -> Result<()> {
    let bands: Vec<(Vec<f64>, Vec<f64>)> = BAND_MULTIPLIERS.iter().map(|&k| fc.log_band(k)).collect();
    let (lvl_lo, lvl_hi) = fc.level_band(2.0);
    let levels = fc.mean_level();
    for (i, year) in fc.years().into_iter().enumerate() {
        t.row([
            year.to_string(),
            model.to_string(),
            f(fc.mean_log_cost[i]),
            f(fc.var_exact[i]),
            f(fc.var_simple[i]),
            f(bands[2].0[i]),
            f(bands[1].0[i]),
            f(bands[0].0[i]),
            f(bands[0].1[i]),
            f(bands[1].1[i]),
            f(bands[2].1[i]),
            f(levels[i]),
            f(lvl_lo[i]),
            f(lvl_hi[i]),
            f(fc.assumed_future_r),
        ])?;
    }
    Ok(())
}

pub fn cmd_forecast(ctx: &Context, opts: &ForecastOpts) -> Result<()> {
    ctx.run(|| {
        let mut man = RunManifest::new(ctx, "forecast");
        man.set("tech", &opts.tech);
        man.set("horizon", opts.horizon);
        man.set("rho_star", opts.rho_star);
        man.set("theta_star", opts.theta_star);
        let (wright, moore) = match (&opts.input, &opts.table1) {
            (Some(input), _) => {
                man.input("input", input)?;
                let data = load_with_experience(input)?;
                let s = data
                    .iter()
                    .find(|s| s.name() == opts.tech)
                    .with_context(|| format!("technology {} not in {}", opts.tech, input.display()))?;
                let d = s.diffs()?;
                let wp = fit_wright(&d)?.with_rho(opts.rho_star);
                let mp = fit_moore(&d)?.with_theta(opts.theta_star);
                let r = opts.future_growth.unwrap_or_else(|| expcurve::stats::mean(d.x()));
                man.set("future_growth", r);
                (
                    forecast_wright(s, &wp, &FutureGrowth::Constant(r), opts.horizon)?,
                    forecast_moore(s, &mp, opts.horizon)?,
                )
            }
            (None, Some(arg)) => {
                man.set("table1", arg);
                let rows = load_table(arg)?;
                let row = rows
                    .iter()
                    .find(|r| r.technology == opts.tech)
                    .with_context(|| format!("technology {} not in table", opts.tech))?;
                if row.t_len < 3 {
                    bail!("technology {} has fewer than 3 observations", opts.tech);
                }
                let m = row.t_len - 1;
                let r = opts.future_growth.unwrap_or(row.r);
                man.set("future_growth", r);
                let wp = WrightParams {
                    omega: row.omega,
                    sigma_eta: row.sigma_eta,
                    rho: 0.0,
                    m,
                    boundary: false,
                }
                .with_rho(opts.rho_star);
                let mp = MooreParams {
                    mu: row.mu,
                    k: row.k,
                    theta: opts.theta_star,
                    m,
                };
                let y_t = opts.last_cost.ln();
                (
                    forecast_wright_from_parts(&vec![row.r; m], y_t, opts.base_year, &wp, &FutureGrowth::Constant(r), opts.horizon)?,
                    forecast_moore_from_parts(y_t, opts.base_year, &mp, opts.horizon)?,
                )
            }
            (None, None) => bail!("forecast needs --input or --table1"),
        };
        let mut t = Table::new(&FORECAST_HEADER)?;
        forecast_rows(&mut t, "wright", &wright)?;
        forecast_rows(&mut t, "moore", &moore)?;
        t.save(ctx, "forecast.csv")?;

        let mut t = Table::new(&["tau", "mean_diff", "width_ratio", "width_ratio_simple"])?;
        for c in compare_forecasts(&moore, &wright)? {
            t.row([c.tau.to_string(), f(c.mean_diff), f(c.width_ratio), f(c.width_ratio_simple)])?;
        }
        t.save(ctx, "compare.csv")?;
        man.write(ctx)
    })
}

/// Parses the pooled errors of one model back from `hindcast.csv` rows.
pub fn pooled_from_rows(rows: &[HindcastRow], model: Model) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.model == model.as_str())
        .map(|r| r.pooled_error)
        .filter(|v| v.is_finite())
        .collect()
}
