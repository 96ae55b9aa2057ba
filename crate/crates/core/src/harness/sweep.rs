//! Sweeps over carrier, sensor size, antenna count and seed.
//!
//! Points are evaluated on the current rayon pool and collected back in
//! [`ExperimentConfig::sweep_points`] order, so the output never depends on
//! thread scheduling.

use rayon::prelude::*;

use crate::bounds::{bound_from_efim, path_efim, scenario_fim, BoundReport, ConfigEcho};
use crate::channel::SPEED_OF_LIGHT;
use crate::fim::{AnalyticDerivatives, DerivativeProvider, Scenario};
use crate::geometry::square_fraunhofer_distance;

use super::{ExperimentConfig, HarnessError, SweepPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FraunhoferRow {
    pub f_c_hz: f64,
    pub l_r_m: f64,
    /// diagonal of the square surface
    pub aperture_m: f64,
    pub d_f_m: f64,
}

/// Fraunhofer distance of a square sensor over the configured carriers and side lengths.
pub fn run_fraunhofer_curve(config: &ExperimentConfig) -> Result<Vec<FraunhoferRow>, HarnessError> {
    let f = &config.fraunhofer;
    if f.f_c_hz.is_empty() {
        return Err(HarnessError::Config("fraunhofer.f_c_hz must be non-empty".into()));
    }
    let mut rows = Vec::new();
    for &f_c_hz in &f.f_c_hz {
        let lambda = SPEED_OF_LIGHT / f_c_hz;
        for l_r_m in f.side_lengths() {
            rows.push(FraunhoferRow {
                f_c_hz,
                l_r_m,
                aperture_m: l_r_m * std::f64::consts::SQRT_2,
                d_f_m: square_fraunhofer_distance(l_r_m, lambda)?,
            });
        }
    }
    Ok(rows)
}

/// Bounds of the reported sensors at one sweep point.
pub fn evaluate_point(
    config: &ExperimentConfig,
    point: &SweepPoint,
    scenario: Scenario,
    provider: &dyn DerivativeProvider,
) -> Result<Vec<BoundReport>, HarnessError> {
    let model = config.build_model(point, config.regime)?;
    let codes = config.codes()?;
    let fim = scenario_fim(&model, &codes, provider, scenario)?;
    let echo = ConfigEcho {
        regime: config.regime,
        antennas: point.antennas,
        side_length_m: point.side_length_m,
        carrier_hz: point.carrier_hz,
        symbols: config.numerology.symbols,
        subcarriers: config.numerology.subcarriers,
        seed: point.seed,
    };
    config
        .sweep
        .report_sensors
        .iter()
        .map(|&number| {
            let m = number - 1;
            let bound = bound_from_efim(path_efim(&fim, scenario, m)?, scenario, m)?;
            let near = model.fraunhofer_checks()[m].receiver_in_near_field();
            Ok(BoundReport::new(echo, &bound, near))
        })
        .collect()
}

/// One row per (sweep point, reported sensor), in sweep order.
pub fn run_scenario_sweep(
    config: &ExperimentConfig,
    scenario: Scenario,
    provider: &dyn DerivativeProvider,
) -> Result<Vec<BoundReport>, HarnessError> {
    // surface the code precondition once instead of per point
    config.codes()?;
    let per_point: Vec<Vec<BoundReport>> = config
        .sweep_points()
        .par_iter()
        .map(|p| evaluate_point(config, p, scenario, provider))
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Orientation bounds with known sensor positions.
pub fn run_scenario1_sweep(config: &ExperimentConfig) -> Result<Vec<BoundReport>, HarnessError> {
    run_scenario_sweep(config, Scenario::Rest, &AnalyticDerivatives)
}

/// Joint position and orientation bounds.
pub fn run_scenario2_sweep(config: &ExperimentConfig) -> Result<Vec<BoundReport>, HarnessError> {
    run_scenario_sweep(config, Scenario::Exercise, &AnalyticDerivatives)
}

/// Median over seeds at one `(f_c, L_R, N_U, sensor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianPoint {
    pub carrier_hz: f64,
    pub side_length_m: f64,
    pub antennas: usize,
    pub sensor: usize,
    pub median: f64,
    pub seeds: usize,
}

/// Median of `values`; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    // equal middle values short-circuit so that two infinities stay infinite
    Some(if sorted.len() % 2 == 1 || sorted[mid - 1] == sorted[mid] {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Seed medians of `value`, ordered by first appearance in `rows`.
///
/// Non-identifiable rows usually have no bound; callers decide what they
/// count as (an infinite bound, zero information) through `value`.
pub fn seed_medians(rows: &[BoundReport], value: impl Fn(&BoundReport) -> f64) -> Vec<MedianPoint> {
    let mut groups: Vec<(MedianPoint, Vec<f64>)> = Vec::new();
    for row in rows {
        let e = &row.echo;
        let found = groups.iter_mut().find(|(p, _)| {
            p.carrier_hz == e.carrier_hz
                && p.side_length_m == e.side_length_m
                && p.antennas == e.antennas
                && p.sensor == row.sensor
        });
        match found {
            Some((_, values)) => values.push(value(row)),
            None => groups.push((
                MedianPoint {
                    carrier_hz: e.carrier_hz,
                    side_length_m: e.side_length_m,
                    antennas: e.antennas,
                    sensor: row.sensor,
                    median: f64::NAN,
                    seeds: 0,
                },
                vec![value(row)],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut p, values)| {
            p.median = median(&values).unwrap_or(f64::NAN);
            p.seeds = values.len();
            p
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
}

/// Consecutive antenna counts (per carrier, side length and sensor) whose
/// medians break `trend`, as `(smaller, larger)` pairs.
pub fn trend_violations(points: &[MedianPoint], trend: Trend) -> Vec<(MedianPoint, MedianPoint)> {
    let mut curves: Vec<Vec<MedianPoint>> = Vec::new();
    for p in points {
        match curves.iter_mut().find(|c| {
            c[0].carrier_hz == p.carrier_hz && c[0].side_length_m == p.side_length_m && c[0].sensor == p.sensor
        }) {
            Some(c) => c.push(*p),
            None => curves.push(vec![*p]),
        }
    }
    let mut out = Vec::new();
    for mut curve in curves {
        curve.sort_by_key(|p| p.antennas);
        for w in curve.windows(2) {
            let (a, b) = (w[0].median, w[1].median);
            let ok = match trend {
                Trend::NonIncreasing => b <= a,
                Trend::NonDecreasing => b >= a,
            };
            if !ok {
                out.push((w[0], w[1]));
            }
        }
    }
    out
}
