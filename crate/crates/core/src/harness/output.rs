//! CSV tables and the manifest written next to them.
//!
//! CSV bytes depend only on the configuration, the seed list and the crate
//! version. Anything that varies between runs (wall time) goes in the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::BoundReport;

use super::sweep::FraunhoferRow;
use super::{ExperimentConfig, HarnessError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical TOML rendering, so formatting and comments in
/// the source file do not change it but command-line overrides do.
pub fn config_hash(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml_string().as_bytes()))
}

#[derive(Debug, Serialize)]
struct BoundRow<'a> {
    experiment: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    scenario: &'static str,
    regime: &'static str,
    f_c_hz: f64,
    l_r_m: f64,
    n_u: usize,
    seed: u64,
    /// 1-based
    sensor: usize,
    symbols: usize,
    subcarriers: usize,
    oeb_rad: Option<f64>,
    oeb_trace_rad2: Option<f64>,
    peb_m: Option<f64>,
    peb_trace_m2: Option<f64>,
    lambda_max: f64,
    lambda_min: f64,
    nullity_ratio: f64,
    identifiable: bool,
    receiver_in_near_field: bool,
}

pub fn write_bounds_csv<W: Write>(
    writer: W,
    experiment: &str,
    config_sha256: &str,
    rows: &[BoundReport],
) -> Result<(), HarnessError> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in rows {
        csv.serialize(BoundRow {
            experiment,
            version: VERSION,
            config_sha256,
            scenario: r.scenario.as_str(),
            regime: r.echo.regime.as_str(),
            f_c_hz: r.echo.carrier_hz,
            l_r_m: r.echo.side_length_m,
            n_u: r.echo.antennas,
            seed: r.echo.seed,
            sensor: r.sensor + 1,
            symbols: r.echo.symbols,
            subcarriers: r.echo.subcarriers,
            oeb_rad: r.oeb.map(|b| b.root),
            oeb_trace_rad2: r.oeb.map(|b| b.trace),
            peb_m: r.peb.map(|b| b.root),
            peb_trace_m2: r.peb.map(|b| b.trace),
            lambda_max: r.lambda_max,
            lambda_min: r.lambda_min,
            nullity_ratio: r.nullity_ratio,
            identifiable: r.identifiable,
            receiver_in_near_field: r.receiver_in_near_field,
        })?;
    }
    if rows.is_empty() {
        // serialize() emits the header with the first record only
        csv.write_record(BOUND_HEADER)?;
    }
    csv.flush()?;
    Ok(())
}

const BOUND_HEADER: [&str; 21] = [
    "experiment",
    "version",
    "config_sha256",
    "scenario",
    "regime",
    "f_c_hz",
    "l_r_m",
    "n_u",
    "seed",
    "sensor",
    "symbols",
    "subcarriers",
    "oeb_rad",
    "oeb_trace_rad2",
    "peb_m",
    "peb_trace_m2",
    "lambda_max",
    "lambda_min",
    "nullity_ratio",
    "identifiable",
    "receiver_in_near_field",
];

pub fn write_fraunhofer_csv<W: Write>(writer: W, rows: &[FraunhoferRow]) -> Result<(), HarnessError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["f_c_hz", "l_r_m", "aperture_m", "d_f_m"])?;
    for r in rows {
        csv.serialize((r.f_c_hz, r.l_r_m, r.aperture_m, r.d_f_m))?;
    }
    csv.flush()?;
    Ok(())
}

/// Run record stored beside each CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub config_sha256: String,
    pub csv_file: String,
    pub rows: usize,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(experiment: &str, config: &ExperimentConfig, rows: usize, wall_time_s: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            version: VERSION.to_string(),
            config_sha256: config_hash(config),
            csv_file: format!("{experiment}.csv"),
            rows,
            seeds: config.seeds.clone(),
            wall_time_s,
            config: config.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }
}

/// Writes `<dir>/<experiment>.csv` and `<dir>/<experiment>.manifest.toml`.
pub fn write_experiment(dir: &Path, csv: &[u8], manifest: &Manifest) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(&manifest.csv_file);
    let manifest_path = dir.join(format!("{}.manifest.toml", manifest.experiment));
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&manifest_path, manifest.to_toml_string())?;
    Ok((csv_path, manifest_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::{run_fraunhofer_curve, run_scenario1_sweep};

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let a = ExperimentConfig::from_toml_str("seeds = [1, 2]").unwrap();
        let b = ExperimentConfig::from_toml_str("# comment\nseeds = [ 1,2 ]\n").unwrap();
        let c = ExperimentConfig::from_toml_str("seeds = [1, 3]").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn bounds_csv_has_fixed_header_and_blank_missing_bounds() {
        let mut config = ExperimentConfig::default();
        config.sweep.n_u = vec![1];
        config.sweep.l_r_m = vec![0.03];
        config.seeds = vec![0];
        config.numerology.subcarriers = 4;
        let rows = run_scenario1_sweep(&config).unwrap();
        let mut buf = Vec::new();
        write_bounds_csv(&mut buf, "scenario1", "abc", &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), BOUND_HEADER.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), BOUND_HEADER.len());
        assert_eq!(&fields[..5], &["scenario1", VERSION, "abc", "rest", "near"]);
        assert_eq!(fields[12], "");
        assert_eq!(fields[19], "false");

        let mut empty = Vec::new();
        write_bounds_csv(&mut empty, "scenario1", "abc", &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), BOUND_HEADER.join(","));
    }

    #[test]
    fn fraunhofer_csv_and_manifest_files() {
        let config = ExperimentConfig::default();
        let rows = run_fraunhofer_curve(&config).unwrap();
        let mut buf = Vec::new();
        write_fraunhofer_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f_c_hz,l_r_m,aperture_m,d_f_m\n"));
        assert!(text.contains("\n10000000000.0,0.035,"));

        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new("fraunhofer", &config, rows.len(), 0.25);
        let (csv_path, manifest_path) = write_experiment(dir.path(), &buf, &manifest).unwrap();
        assert_eq!(std::fs::read(csv_path).unwrap(), buf);
        let parsed: toml::Table = std::fs::read_to_string(manifest_path).unwrap().parse().unwrap();
        assert_eq!(parsed["config_sha256"].as_str().unwrap(), config_hash(&config));
        assert_eq!(parsed["rows"].as_integer().unwrap() as usize, rows.len());
        assert!(parsed["config"].is_table());
    }
}
