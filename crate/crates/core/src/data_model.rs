//! Cost/production series, CSV ingestion, and construction of the experience
//! (cumulative production) variable with an initial-stock correction.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::stats;

/// Discrete growth rates at or below this value are treated as zero growth.
pub const MIN_DISCRETE_GROWTH: f64 = 1e-9;

/// Annual cost and production observations for one technology.
///
/// Experience (cumulative production) is optional: it is filled in by
/// [`build_experience`] or supplied directly with [`TechSeries::with_experience`].
#[derive(Debug, Clone, PartialEq)]
pub struct TechSeries {
    name: String,
    years: Vec<i32>,
    cost: Vec<f64>,
    production: Vec<f64>,
    experience: Option<Vec<f64>>,
}

impl TechSeries {
    /// Validates and builds a series. Years must be consecutive and all costs
    /// and production values strictly positive; at least 3 observations.
    pub fn new(
        name: impl Into<String>,
        years: Vec<i32>,
        cost: Vec<f64>,
        production: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if years.len() != cost.len() || years.len() != production.len() {
            return Err(Error::LengthMismatch { technology: name });
        }
        if years.len() < 3 {
            return Err(Error::TooFewRows {
                technology: name,
                rows: years.len(),
            });
        }
        for (i, w) in years.windows(2).enumerate() {
            if w[1] != w[0] + 1 {
                let row = i as u64 + 2;
                return Err(if w[1] == w[0] {
                    Error::DuplicateYear {
                        technology: name,
                        row,
                        year: w[1],
                    }
                } else {
                    Error::YearGap {
                        technology: name,
                        row,
                        previous: w[0],
                        year: w[1],
                    }
                });
            }
        }
        for (i, (&c, &q)) in cost.iter().zip(&production).enumerate() {
            let row = i as u64 + 1;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::NonPositiveCost {
                    technology: name,
                    row,
                    value: c,
                });
            }
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::NonPositiveProduction {
                    technology: name,
                    row,
                    value: q,
                });
            }
        }
        Ok(Self {
            name,
            years,
            cost,
            production,
            experience: None,
        })
    }

    /// Attaches an externally constructed experience series (no initial-stock
    /// correction). It must be positive and strictly increasing.
    pub fn with_experience(mut self, experience: Vec<f64>) -> Result<Self> {
        if experience.len() != self.len() {
            return Err(Error::LengthMismatch {
                technology: self.name,
            });
        }
        if experience[0] <= 0.0 || experience.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneExperience);
        }
        self.experience = Some(experience);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn production(&self) -> &[f64] {
        &self.production
    }

    pub fn experience(&self) -> Option<&[f64]> {
        self.experience.as_deref()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn log_cost(&self) -> Vec<f64> {
        self.cost.iter().map(|c| c.ln()).collect()
    }

    pub fn log_production(&self) -> Vec<f64> {
        self.production.iter().map(|q| q.ln()).collect()
    }

    pub fn log_experience(&self) -> Option<Vec<f64>> {
        self.experience
            .as_ref()
            .map(|z| z.iter().map(|v| v.ln()).collect())
    }

    /// First differences of log cost and log experience.
    pub fn diffs(&self) -> Result<DiffSeries> {
        let x = self
            .log_experience()
            .ok_or_else(|| Error::ExperienceMissing(self.name.clone()))?;
        DiffSeries::new(stats::diff(&self.log_cost()), stats::diff(&x))
    }
}

/// First differences `Y_t` of log cost and `X_t` of log experience.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSeries {
    y: Vec<f64>,
    x: Vec<f64>,
}

impl DiffSeries {
    pub fn new(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::LengthMismatch {
                technology: String::from("<diffs>"),
            });
        }
        Ok(Self { y, x })
    }

    /// Cost differences against a unit regressor, which turns the Wright
    /// machinery into the drift-only (Moore) model.
    pub fn moore(y: Vec<f64>) -> Self {
        let x = vec![1.0; y.len()];
        Self { y, x }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Number of differences `m`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Sub-window of differences `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> DiffSeries {
        DiffSeries {
            y: self.y[start..end].to_vec(),
            x: self.x[start..end].to_vec(),
        }
    }
}

/// Drift and volatility of log production and log experience.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthStats {
    /// Mean of the log-production differences.
    pub g: f64,
    pub sigma_q: f64,
    /// Mean of the log-experience differences.
    pub r: f64,
    pub sigma_x: f64,
    /// Discrete annual production growth rate.
    pub g_d: f64,
}

/// Result of [`estimate_discrete_growth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteGrowth {
    pub rate: f64,
    /// False when `rate <= MIN_DISCRETE_GROWTH`; such series cannot be corrected.
    pub usable: bool,
}

/// `exp(log(Q_last / Q_first) / (T - 1)) - 1`.
pub fn estimate_discrete_growth(production: &[f64]) -> Result<DiscreteGrowth> {
    let n = production.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let (first, last) = (production[0], production[n - 1]);
    if first <= 0.0 || last <= 0.0 {
        return Err(invalid_production(first.min(last)));
    }
    let rate = ((last / first).ln() / (n - 1) as f64).exp_m1();
    Ok(DiscreteGrowth {
        rate,
        usable: rate > MIN_DISCRETE_GROWTH,
    })
}

fn invalid_production(value: f64) -> Error {
    Error::NonPositiveProduction {
        technology: String::new(),
        row: 0,
        value,
    }
}

/// Fills in experience with the initial stock `Q_0 / g_d` followed by
/// `Z_{t+1} = Z_t + Q_t`, so experience at `t` excludes production of `t`.
pub fn build_experience(series: TechSeries) -> Result<TechSeries> {
    let growth = estimate_discrete_growth(&series.production)?;
    if !growth.usable {
        return Err(Error::ZeroGrowth { g_d: growth.rate });
    }
    let q = &series.production;
    let mut z = Vec::with_capacity(q.len());
    z.push(q[0] / growth.rate);
    for t in 1..q.len() {
        z.push(z[t - 1] + q[t - 1]);
    }
    series.with_experience(z)
}

/// Means and sample standard deviations of log-production and log-experience
/// growth, plus the discrete growth rate.
pub fn growth_stats(series: &TechSeries) -> Result<GrowthStats> {
    if series.len() < 3 {
        return Err(Error::TooFewRows {
            technology: series.name.clone(),
            rows: series.len(),
        });
    }
    let dq = stats::diff(&series.log_production());
    let dx = stats::diff(
        &series
            .log_experience()
            .ok_or_else(|| Error::ExperienceMissing(series.name.clone()))?,
    );
    Ok(GrowthStats {
        g: stats::mean(&dq),
        sigma_q: stats::sample_std(&dq),
        r: stats::mean(&dx),
        sigma_x: stats::sample_std(&dx),
        g_d: estimate_discrete_growth(&series.production)?.rate,
    })
}

#[derive(Debug, Deserialize)]
struct InputRow {
    technology: String,
    year: i32,
    cost: f64,
    production: f64,
}

const INPUT_COLUMNS: [&str; 4] = ["technology", "year", "cost", "production"];

/// Reads `technology,year,cost,production` rows from a file. Technologies are
/// returned in order of first appearance, rows sorted by year.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<TechSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<TechSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in INPUT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }

    // (row number, parsed row) grouped by technology
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(u64, InputRow)>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let parsed: InputRow = record.deserialize(Some(&headers))?;
        if parsed.cost <= 0.0 || !parsed.cost.is_finite() {
            return Err(Error::NonPositiveCost {
                technology: parsed.technology,
                row,
                value: parsed.cost,
            });
        }
        if parsed.production <= 0.0 || !parsed.production.is_finite() {
            return Err(Error::NonPositiveProduction {
                technology: parsed.technology,
                row,
                value: parsed.production,
            });
        }
        let entry = groups.entry(parsed.technology.clone()).or_insert_with(|| {
            order.push(parsed.technology.clone());
            Vec::new()
        });
        entry.push((row, parsed));
    }

    let mut out = Vec::with_capacity(order.len());
    for name in order {
        let mut rows = groups.remove(&name).unwrap_or_default();
        rows.sort_by_key(|(_, r)| r.year);
        if rows.len() < 3 {
            return Err(Error::TooFewRows {
                technology: name,
                rows: rows.len(),
            });
        }
        for w in rows.windows(2) {
            let (prev, (row, cur)) = (&w[0].1, &w[1]);
            if cur.year == prev.year {
                return Err(Error::DuplicateYear {
                    technology: name,
                    row: *row,
                    year: cur.year,
                });
            }
            if cur.year != prev.year + 1 {
                return Err(Error::YearGap {
                    technology: name,
                    row: *row,
                    previous: prev.year,
                    year: cur.year,
                });
            }
        }
        let years = rows.iter().map(|(_, r)| r.year).collect();
        let cost = rows.iter().map(|(_, r)| r.cost).collect();
        let production = rows.iter().map(|(_, r)| r.production).collect();
        out.push(TechSeries::new(name, years, cost, production)?);
    }
    Ok(out)
}

/// Writes series in the ingestion format, values with 17 significant digits.
pub fn write_input_csv<W: Write>(writer: W, dataset: &[TechSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INPUT_COLUMNS)?;
    for s in dataset {
        for i in 0..s.len() {
            w.write_record([
                s.name.clone(),
                s.years[i].to_string(),
                fmt_f64(s.cost[i]),
                fmt_f64(s.production[i]),
            ])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: String::from("<csv writer>"),
        source,
    })?;
    Ok(())
}

/// Writes the derived-series table
/// `technology,year,cost,production,experience,log_cost,log_experience`.
pub fn write_derived_csv<W: Write>(writer: W, dataset: &[TechSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "technology",
        "year",
        "cost",
        "production",
        "experience",
        "log_cost",
        "log_experience",
    ])?;
    for s in dataset {
        let z = s
            .experience()
            .ok_or_else(|| Error::ExperienceMissing(s.name.clone()))?;
        for i in 0..s.len() {
            w.write_record([
                s.name.clone(),
                s.years[i].to_string(),
                fmt_f64(s.cost[i]),
                fmt_f64(s.production[i]),
                fmt_f64(z[i]),
                fmt_f64(s.cost[i].ln()),
                fmt_f64(z[i].ln()),
            ])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: String::from("<csv writer>"),
        source,
    })?;
    Ok(())
}

/// Float formatting used for every CSV this crate writes: 17 significant
/// digits, which round-trips an `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(q: &[f64]) -> TechSeries {
        let years = (2000..2000 + q.len() as i32).collect();
        TechSeries::new("A", years, vec![1.0; q.len()], q.to_vec()).unwrap()
    }

    #[test]
    fn ingest_minimal() {
        let data = "technology,year,cost,production\nA,2000,1.0,1\nA,2001,0.9,1\nA,2002,0.8,1\n";
        let out = read_csv(data.as_bytes()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 3);
        assert!(out[0].experience().is_none());
    }

    #[test]
    fn ingest_sorts_and_groups() {
        let data = "technology,year,cost,production\nB,2001,2,1\nA,2002,0.8,1\nA,2000,1.0,1\nB,2000,2,1\nA,2001,0.9,1\nB,2002,2,1\n";
        let out = read_csv(data.as_bytes()).unwrap();
        assert_eq!(out[0].name(), "B");
        assert_eq!(out[1].years(), &[2000, 2001, 2002]);
        assert_eq!(out[1].cost(), &[1.0, 0.9, 0.8]);
    }

    #[test]
    fn ingest_rejects_zero_cost() {
        let data = "technology,year,cost,production\nA,2000,1.0,1\nA,2001,0,1\nA,2002,0.8,1\n";
        let err = read_csv(data.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveCost { row: 3, .. }), "{err}");
        assert!(err.to_string().contains("non-positive cost"));
    }

    #[test]
    fn ingest_rejects_gap() {
        let data = "technology,year,cost,production\nA,2000,1.0,1\nA,2002,0.9,1\nA,2003,0.8,1\n";
        let err = read_csv(data.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("gap in years"), "{err}");
    }

    #[test]
    fn ingest_rejects_missing_column_and_short_series() {
        let data = "technology,year,cost\nA,2000,1.0\n";
        assert!(matches!(
            read_csv(data.as_bytes()),
            Err(Error::MissingColumn(c)) if c == "production"
        ));
        let data = "technology,year,cost,production\nA,2000,1.0,1\nA,2001,0.9,1\n";
        assert!(matches!(
            read_csv(data.as_bytes()),
            Err(Error::TooFewRows { rows: 2, .. })
        ));
    }

    #[test]
    fn discrete_growth_examples() {
        let g = estimate_discrete_growth(&[1.0, 2.0, 4.0]).unwrap();
        assert!((g.rate - 1.0).abs() < 1e-12);
        assert!(g.usable);
        let g = estimate_discrete_growth(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(g.rate, 0.0);
        assert!(!g.usable);
        let g = estimate_discrete_growth(&[1.0, 1.1, 1.21]).unwrap();
        assert!((g.rate - 0.1).abs() < 1e-12);
        assert!(estimate_discrete_growth(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn experience_recursion() {
        let s = build_experience(series(&[1.0, 2.0, 4.0])).unwrap();
        let z = s.experience().unwrap();
        for (a, b) in z.iter().zip([1.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let x = s.log_experience().unwrap();
        assert!((x[1] - 2f64.ln()).abs() < 1e-12);
        assert!((x[2] - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_production_rejected() {
        assert!(matches!(
            build_experience(series(&[3.0, 3.0, 3.0, 3.0])),
            Err(Error::ZeroGrowth { .. })
        ));
    }

    #[test]
    fn geometric_production_gives_constant_growth() {
        let gd: f64 = 0.25;
        let q: Vec<f64> = (0..12).map(|t| 2.0 * (1.0 + gd).powi(t)).collect();
        let s = build_experience(series(&q)).unwrap();
        let z = s.experience().unwrap();
        for (zt, qt) in z.iter().zip(&q) {
            assert!((zt - qt / gd).abs() / zt < 1e-12);
        }
        for x in s.diffs().unwrap().x() {
            assert!((x - (1.0 + gd).ln()).abs() < 1e-12);
        }
        let gs = growth_stats(&s).unwrap();
        assert!(gs.sigma_x < 1e-12);
    }

    #[test]
    fn growth_stats_examples() {
        // Δlog Q = [0.1, 0.1]
        let q = [1.0, 0.1f64.exp(), 0.2f64.exp()];
        let gs = growth_stats(&build_experience(series(&q)).unwrap()).unwrap();
        assert!((gs.g - 0.1).abs() < 1e-12);
        assert!(gs.sigma_q < 1e-12);
        // Δlog Q = [0.0, 0.2]
        let q = [1.0, 1.0, 0.2f64.exp()];
        let gs = growth_stats(&build_experience(series(&q)).unwrap()).unwrap();
        assert!((gs.g - 0.1).abs() < 1e-12);
        assert!((gs.sigma_q - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diffs_need_experience() {
        assert!(matches!(
            series(&[1.0, 2.0, 3.0]).diffs(),
            Err(Error::ExperienceMissing(_))
        ));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
