use std::path::Path;
use std::process::{Command, Output};

use expcurve::hindcast::{pooled_errors, run_hindcast, HindcastConfig, Model};
use expcurve::{build_experience, fit_wright, ingest_csv};
use expcurve_cli::{pooled_from_rows, read_hindcast};

fn expcurve(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expcurve"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) {
    let o = expcurve(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_input(dir: &Path, techs: &[(&str, usize, f64)]) -> String {
    let mut s = String::from("technology,year,cost,production\n");
    for (name, t_len, omega) in techs {
        for t in 0..*t_len {
            let q = (0.3 * t as f64).exp();
            let wobble = 0.02 * ((t * 7 % 5) as f64 - 2.0);
            let c = (omega * 0.3 * t as f64 + wobble).exp();
            s.push_str(&format!("{name},{},{c},{q}\n", 2000 + t));
        }
    }
    let path = dir.join("input.csv");
    std::fs::write(&path, s).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn ten_year_series_gives_ten_errors_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), &[("a", 10, -0.4)]);
    ok(dir.path(), &["hindcast", "--input", &input, "--m", "5", "--tau-max", "20"]);
    let rows = read_hindcast(&dir.path().join("hindcast.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.model == "moore").count(), 10);
    assert_eq!(rows.iter().filter(|r| r.model == "wright").count(), 10);
    assert!(dir.path().join("hindcast.manifest").exists());
}

#[test]
fn diagnose_from_csv_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), &[("a", 18, -0.4), ("b", 14, -0.2), ("c", 20, -0.6)]);
    ok(dir.path(), &["hindcast", "--input", &input]);
    ok(dir.path(), &["diagnose", "--hindcast", dir.path().join("hindcast.csv").to_str().unwrap()]);

    let data: Vec<_> = ingest_csv(&input)
        .unwrap()
        .into_iter()
        .map(|s| build_experience(s).unwrap())
        .collect();
    let errors = run_hindcast(&data, &HindcastConfig::default()).unwrap();
    let rows = read_hindcast(&dir.path().join("hindcast.csv")).unwrap();
    for model in [Model::Moore, Model::Wright] {
        let direct = pooled_errors(&errors, model);
        let parsed = pooled_from_rows(&rows, model);
        assert_eq!(direct, parsed);
        let check = expcurve::diagnostics::ecdf_vs_reference(&direct, expcurve::diagnostics::Reference::Student(4.0))
            .unwrap();
        let summary = csv_rows(&dir.path().join("summary.csv"));
        let line = summary.iter().find(|r| &r[0] == model.as_str()).unwrap();
        assert_eq!(line[2].parse::<f64>().unwrap(), check.ks_stat);
    }
}

#[test]
fn estimate_writes_one_row_per_technology() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), &[("a", 12, -0.4), ("b", 9, -0.2), ("c", 15, -0.6)]);
    ok(dir.path(), &["estimate", "--input", &input]);
    let rows = csv_rows(&dir.path().join("estimates.csv"));
    assert_eq!(rows.len(), 3);
    let data = ingest_csv(&input).unwrap();
    for (row, s) in rows.iter().zip(data) {
        let s = build_experience(s).unwrap();
        let w = fit_wright(&s.diffs().unwrap()).unwrap();
        assert_eq!(&row[0], s.name());
        assert_eq!(row[8].parse::<f64>().unwrap(), w.omega);
    }
}

#[test]
fn bad_input_fails_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "technology,year,cost,production\nx,2000,1,1\nx,2001,-2,2\nx,2002,1,3\n").unwrap();
    let o = expcurve(dir.path(), &["estimate", "--input", path.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("non-positive cost") && err.contains("`x`"), "{err}");
    assert!(!dir.path().join("estimates.csv").exists());

    let o = expcurve(dir.path(), &["hindcast", "--input", "/nonexistent.csv"]);
    assert!(!o.status.success());
}

#[test]
fn simulated_dataset_feeds_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--dataset-only", "--n-tech", "4", "--periods", "15"]);
    let data = dir.path().join("dataset.csv");
    assert_eq!(ingest_csv(&data).unwrap().len(), 4);
    ok(dir.path(), &["estimate", "--input", data.to_str().unwrap()]);
    ok(dir.path(), &["hindcast", "--input", data.to_str().unwrap()]);
    let h = dir.path().join("hindcast.csv");
    ok(dir.path(), &["diagnose", "--hindcast", h.to_str().unwrap(), "--input", data.to_str().unwrap()]);
    assert_eq!(csv_rows(&dir.path().join("sahal.csv")).len(), 4);
    let manifest = std::fs::read_to_string(dir.path().join("simulate.manifest")).unwrap();
    assert!(manifest.contains("seed=42"), "{manifest}");
}

#[test]
fn table_forecast_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["forecast", "--table1", "bundled", "--tech", "Photovoltaics", "--horizon", "12", "--base-year", "2013"],
    );
    let rows = csv_rows(&dir.path().join("forecast.csv"));
    assert_eq!(rows.len(), 24);
    let first = rows.iter().find(|r| &r[1] == "wright").unwrap();
    assert_eq!(&first[0], "2014");
    assert!((first[2].parse::<f64>().unwrap() + 0.1209).abs() < 1.5e-4);
    for r in csv_rows(&dir.path().join("compare.csv")) {
        assert!(r[2].parse::<f64>().unwrap() > 1.0);
    }
}
