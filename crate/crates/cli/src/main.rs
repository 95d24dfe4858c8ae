use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use expcurve_cli::{
    cmd_diagnose, cmd_estimate, cmd_forecast, cmd_hindcast, cmd_simulate, Context, DiagnoseOpts, EstimateOpts,
    ForecastOpts, HindcastOpts, SimulateOpts,
};

#[derive(Parser)]
#[command(name = "expcurve", version, about = "Experience-curve cost forecasting and validation")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = expcurve_cli::DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit both models on each full series.
    Estimate(EstimateArgs),
    /// Rolling-origin pseudo forecasts.
    Hindcast(HindcastArgs),
    /// Distributional checks of hindcast errors.
    Diagnose(DiagnoseArgs),
    /// Surrogate datasets and ensemble bands.
    Simulate(SimulateArgs),
    /// Distributional forecast for one technology.
    Forecast(ForecastArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct HindcastArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    tau_max: usize,
    /// Pooled MA(1) coefficient for the Wright normaliser.
    #[arg(long, default_value_t = 0.19)]
    rho: f64,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Output of `hindcast`.
    #[arg(long)]
    hindcast: PathBuf,
    /// Window length the hindcast used (sets the Student degrees of freedom).
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, value_parser = ["student", "normal"], default_value = "student")]
    reference: String,
    /// Raw data, for the Sahal and tanh scatter files.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run the 200-technology simulation check instead of an ensemble.
    #[arg(long)]
    appendix_a: bool,
    #[arg(long, value_parser = ["m5-estimated", "m5-true", "m40-estimated", "m40-true", "iid"], default_value = "m5-estimated")]
    mode: String,
    /// Mimic a parameter table (`bundled` for the shipped one).
    #[arg(long)]
    table1: Option<String>,
    #[arg(long, default_value_t = 0.19)]
    rho_star: f64,
    #[arg(long, default_value_t = 200)]
    n_tech: usize,
    #[arg(long, default_value_t = 50)]
    periods: usize,
    #[arg(long, default_value_t = 0.1)]
    g: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_q: f64,
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_eta: f64,
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    #[arg(long, default_value_t = 1000)]
    n_ensembles: usize,
    /// One production path for every technology.
    #[arg(long)]
    shared_production: bool,
    /// Cumulative production without the initial-stock correction.
    #[arg(long)]
    raw_experience: bool,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    tau_max: usize,
    /// Write replicate 0 as an input CSV instead of running the ensemble.
    #[arg(long)]
    dataset_only: bool,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    tech: String,
    /// Raw data; the series is fitted on its full sample.
    #[arg(long, conflicts_with = "table1")]
    input: Option<PathBuf>,
    /// Take parameters from a table (`bundled` for the shipped one).
    #[arg(long)]
    table1: Option<String>,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Future log experience growth per year (default: past mean).
    #[arg(long)]
    future_growth: Option<f64>,
    #[arg(long, default_value_t = 0.19)]
    rho_star: f64,
    #[arg(long, default_value_t = 0.23)]
    theta_star: f64,
    /// Anchor cost level for table-based forecasts.
    #[arg(long, default_value_t = 1.0)]
    last_cost: f64,
    /// Anchor year for table-based forecasts.
    #[arg(long, default_value_t = 0)]
    base_year: i32,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let ctx = Context {
        seed: cli.seed,
        threads: cli.threads,
        output_dir: cli.output_dir,
        command_line: argv.join(" "),
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&ctx, &EstimateOpts { input: a.input }),
        Command::Hindcast(a) => cmd_hindcast(
            &ctx,
            &HindcastOpts {
                input: a.input,
                m: a.m,
                tau_max: a.tau_max,
                rho: a.rho,
            },
        ),
        Command::Diagnose(a) => cmd_diagnose(
            &ctx,
            &DiagnoseOpts {
                hindcast: a.hindcast,
                m: a.m,
                normal_reference: a.reference == "normal",
                input: a.input,
            },
        ),
        Command::Simulate(a) => cmd_simulate(
            &ctx,
            &SimulateOpts {
                appendix_a: a.appendix_a,
                mode: a.mode,
                table1: a.table1,
                rho_star: a.rho_star,
                n_tech: a.n_tech,
                periods: a.periods,
                g: a.g,
                sigma_q: a.sigma_q,
                omega: a.omega,
                sigma_eta: a.sigma_eta,
                rho: a.rho,
                n_ensembles: a.n_ensembles,
                shared_production: a.shared_production,
                raw_experience: a.raw_experience,
                m: a.m,
                tau_max: a.tau_max,
                dataset_only: a.dataset_only,
            },
        ),
        Command::Forecast(a) => cmd_forecast(
            &ctx,
            &ForecastOpts {
                tech: a.tech,
                input: a.input,
                table1: a.table1,
                horizon: a.horizon,
                future_growth: a.future_growth,
                rho_star: a.rho_star,
                theta_star: a.theta_star,
                last_cost: a.last_cost,
                base_year: a.base_year,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
