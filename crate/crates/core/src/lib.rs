//! Experience-curve (Wright) and time-trend (Moore) models of technology
//! cost, with forecast-error theory, rolling-origin hindcasting,
//! surrogate-data ensembles and distributional forecasts.
//!
//! ```
//! use expcurve::estimators::progress_ratio;
//!
//! // A 23% cost drop per doubling of experience.
//! assert!((progress_ratio(-0.38) - 0.768).abs() < 1e-3);
//! ```

pub mod data_model;
pub mod diagnostics;
pub mod error;
pub mod error_theory;
pub mod estimators;
pub mod forecast;
pub mod hindcast;
pub mod params;
pub mod stats;
pub mod surrogate;

pub use data_model::{build_experience, growth_stats, ingest_csv, DiffSeries, GrowthStats, TechSeries};
pub use error::{Error, Result};
pub use estimators::{fit_moore, fit_wright, fit_wright_ma1, MooreParams, WrightParams};
pub use hindcast::{run_hindcast, HindcastConfig, HindcastError, Model};
