//! Per-technology parameter tables (full-sample estimates), used to build
//! dataset-mimicking surrogates and forecasts without the raw series.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One row of a parameter table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ParamRow {
    pub technology: String,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub mu: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub g: f64,
    pub sigma_q: f64,
    pub r: f64,
    pub sigma_x: f64,
    pub omega: f64,
    pub sigma_eta: f64,
    pub rho: f64,
}

/// Full-sample estimates for 51 technologies, bundled with the crate.
pub const TABLE1_CSV: &str = include_str!("../data/table1_params.csv");

pub fn read_params<R: Read>(reader: R) -> Result<Vec<ParamRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["technology", "T", "mu", "K", "g", "sigma_q", "r", "sigma_x", "omega", "sigma_eta", "rho"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn load_params(path: impl AsRef<Path>) -> Result<Vec<ParamRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_params(file)
}

/// The bundled table.
pub fn table1() -> Vec<ParamRow> {
    read_params(TABLE1_CSV.as_bytes()).expect("bundled parameter table parses")
}
