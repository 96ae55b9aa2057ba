//! Self-checks run by the `validate` subcommand.
//!
//! Each check names the module it exercises, the tolerance it was held to and
//! the residual it observed. Failures never abort the suite except when the
//! code construction itself fails, since every later check needs the codes.

use std::fmt;

use crate::bounds::{bound_from_efim, path_efim, scenario_fim, DEFAULT_TOLERANCE};
use crate::channel::{Receiver, Regime, SignalModel, SPEED_OF_LIGHT};
use crate::codes::{verify_code_constraints, FastVaryingCode};
use crate::fim::{column_errors, fd_oracle, DerivativeProvider, FdSteps, FimMatrix, ParamLabel, ParamVector, Scenario};
use crate::geometry::{direction_between, square_fraunhofer_distance};

use super::{ExperimentConfig, HarnessError, SweepPoint};

pub const FD_TOLERANCE: f64 = 1e-6;
pub const STRUCTURE_TOLERANCE: f64 = 1e-9;
pub const REGIME_TOLERANCE: f64 = 1e-3;
pub const CODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub tolerance: f64,
    pub residual: f64,
    pub passed: bool,
    /// error text when the check could not be evaluated
    pub error: Option<String>,
}

impl Check {
    fn measured(module: &'static str, name: String, tolerance: f64, residual: f64) -> Self {
        Self {
            module,
            name,
            tolerance,
            residual,
            passed: residual < tolerance,
            error: None,
        }
    }

    fn failed(module: &'static str, name: String, tolerance: f64, error: &HarnessError) -> Self {
        Self {
            module,
            name,
            tolerance,
            residual: f64::NAN,
            passed: false,
            error: Some(error.to_string()),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} [{}] {}: residual {:.3e}, tolerance {:.0e}",
            self.module, self.name, self.residual, self.tolerance
        )?;
        if let Some(e) = &self.error {
            write!(f, " ({e})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub provider: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn record(&mut self, module: &'static str, name: String, tolerance: f64, residual: Result<f64, HarnessError>) {
        self.checks.push(match residual {
            Ok(r) => Check::measured(module, name, tolerance, r),
            Err(e) => Check::failed(module, name, tolerance, &e),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} checks, {} failed (derivatives: {})",
            self.checks.len(),
            failed,
            self.provider
        )
    }
}

fn params_for(model: &SignalModel, scenario: Scenario) -> ParamVector {
    match scenario {
        Scenario::Rest => ParamVector::scenario1(model),
        Scenario::Exercise => ParamVector::scenario2(model),
    }
}

fn point(config: &ExperimentConfig, side_length_m: f64, antennas: usize) -> SweepPoint {
    SweepPoint {
        carrier_hz: config.sweep.f_c_hz[0],
        side_length_m,
        antennas,
        seed: config.seeds[0],
    }
}

fn max_f(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Model at `point` with a reduced subcarrier count. Every sample scales
/// with the same pilot, so relative residuals do not depend on `N`.
fn light_model(config: &ExperimentConfig, point: &SweepPoint, regime: Regime) -> Result<SignalModel, HarnessError> {
    let model = config.build_model(point, regime)?;
    Ok(model.with_numerology(model.numerology().with_subcarriers(1)))
}

fn fd_residual(
    config: &ExperimentConfig,
    codes: &FastVaryingCode,
    provider: &dyn DerivativeProvider,
    point: &SweepPoint,
    regime: Regime,
    scenario: Scenario,
) -> Result<f64, HarnessError> {
    let model = light_model(config, point, regime)?;
    let params = params_for(&model, scenario);
    let analytic = provider.jacobian(&model, codes, &params)?;
    let numeric = fd_oracle(&model, codes, &params, FdSteps::default())?;
    Ok(max_f(column_errors(&numeric, &analytic)?))
}

/// Same sensors and gains, with transmitter and receiver moved out along
/// their original directions to `range_factor · d_f` from the first sensor.
fn distant_copy(model: &SignalModel, range_factor: f64) -> Result<SignalModel, HarnessError> {
    let centre = model.sensors()[0].pose().position;
    let d_f = model
        .fraunhofer_checks()
        .iter()
        .map(|c| c.fraunhofer_distance)
        .fold(0.0, f64::max);
    let range = range_factor * d_f.max(1.0);
    let to_rx = direction_between(&centre, model.receiver().position())?;
    let to_tx = direction_between(&centre, model.transmitter())?;
    let receiver = Receiver::new(centre + to_rx.unit * range, model.receiver().layout().clone())?;
    Ok(SignalModel::new(
        model.numerology().clone(),
        centre + to_tx.unit * range,
        receiver,
        model.sensors().to_vec(),
        model.los_gain(),
        model.regime(),
    )?)
}

fn regime_residual(config: &ExperimentConfig, codes: &FastVaryingCode, point: &SweepPoint) -> Result<f64, HarnessError> {
    let near = distant_copy(&light_model(config, point, Regime::Near)?, 1000.0)?;
    let far = near.with_regime(Regime::Far);
    let a = near.signal_block(codes)?;
    let b = far.signal_block(codes)?;
    let scale = max_f(a.iter().map(|v| v.norm()));
    Ok(max_f(a.iter().zip(&b).map(|(x, y)| (x - y).norm())) / scale)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Structural residuals of one FIM.
struct Structure {
    symmetry: f64,
    /// `max(0, −λ_min) / λ_max`
    negativity: f64,
    /// worst `|J_{β_R β_R} − J_{β_I β_I}|` relative to the pair
    gain_pairs: f64,
    /// worst `|J_{β_R β_I}|` relative to `J_{β_R β_R}`
    gain_cross: f64,
    /// same, for the direct path only
    los_cross: Option<f64>,
    cross_path: f64,
}

fn structure(fim: &FimMatrix) -> Result<Structure, HarnessError> {
    let ev = fim.eigenvalues();
    let (min, max) = (ev[0], ev[ev.len() - 1]);
    let mut gain_pairs = 0.0f64;
    let mut gain_cross = 0.0f64;
    let mut los_cross = None;
    let mut pairs: Vec<(Option<usize>, ParamLabel, ParamLabel)> = Vec::new();
    if fim.index_of(&ParamLabel::LosGainRe).is_some() {
        pairs.push((None, ParamLabel::LosGainRe, ParamLabel::LosGainIm));
    }
    for label in fim.labels() {
        if let ParamLabel::GainRe { sensor } = *label {
            let [re, im] = ParamLabel::gains(sensor);
            pairs.push((Some(sensor), re, im));
        }
    }
    for (sensor, re, im) in pairs {
        let rr = fim.entry(&re, &re)?;
        let ii = fim.entry(&im, &im)?;
        let ri = fim.entry(&re, &im)?;
        gain_pairs = gain_pairs.max(relative_gap(rr, ii));
        let cross = if rr > 0.0 { ri.abs() / rr } else { ri.abs() };
        gain_cross = gain_cross.max(cross);
        if sensor.is_none() {
            los_cross = Some(cross);
        }
    }
    Ok(Structure {
        symmetry: fim.symmetry_residual(),
        negativity: if max > 0.0 { (-min).max(0.0) / max } else { 0.0 },
        gain_pairs,
        gain_cross,
        los_cross,
        cross_path: fim.cross_path_ratio(),
    })
}

/// Both bounds (or, where the point is not identifiable, `λ_max`) at noise
/// PSD `N0` and `2 N0`; returns the worst deviation from the `√2` ratio.
fn snr_homogeneity(
    config: &ExperimentConfig,
    codes: &FastVaryingCode,
    provider: &dyn DerivativeProvider,
    point: &SweepPoint,
    scenario: Scenario,
) -> Result<f64, HarnessError> {
    let model = config.build_model(point, Regime::Near)?;
    let doubled = model.with_numerology(model.numerology().with_noise_psd(2.0 * model.numerology().noise_psd()));
    let evaluate = |m: &SignalModel| -> Result<_, HarnessError> {
        let fim = scenario_fim(m, codes, provider, scenario)?;
        Ok(bound_from_efim(path_efim(&fim, scenario, 0)?, scenario, 0)?)
    };
    let (a, b) = (evaluate(&model)?, evaluate(&doubled)?);
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut worst = relative_gap(a.verdict.lambda_max, 2.0 * b.verdict.lambda_max);
    for (x, y) in [(a.oeb, b.oeb), (a.peb, b.peb)] {
        match (x, y) {
            (Some(x), Some(y)) => worst = worst.max(relative_gap(x.root * sqrt2, y.root)),
            (None, None) => {}
            _ => worst = f64::INFINITY,
        }
    }
    Ok(worst)
}

fn path_nullity(
    config: &ExperimentConfig,
    codes: &FastVaryingCode,
    provider: &dyn DerivativeProvider,
    point: &SweepPoint,
    regime: Regime,
) -> Result<f64, HarnessError> {
    let model = light_model(config, point, regime)?;
    let fim = scenario_fim(&model, codes, provider, Scenario::Rest)?;
    let mut worst = 0.0f64;
    for m in 0..model.sensors().len() {
        worst = worst.max(path_efim(&fim, Scenario::Rest, m)?.nullity_ratio());
    }
    Ok(worst)
}

/// Runs every check against `config` with derivatives from `provider`.
pub fn run_validation_suite(config: &ExperimentConfig, provider: &dyn DerivativeProvider) -> ValidationReport {
    let mut report = ValidationReport {
        provider: provider.name().to_string(),
        checks: Vec::new(),
    };

    let codes = match config.codes() {
        Ok(codes) => codes,
        Err(e) => {
            report.checks.push(Check::failed("ris-codes", "code construction".into(), CODE_TOLERANCE, &e));
            return report;
        }
    };
    report.record(
        "ris-codes",
        format!("separability constraints (T = {}, M = {})", codes.symbols(), codes.sensors()),
        CODE_TOLERANCE,
        Ok(verify_code_constraints(&codes).max()),
    );

    for (f_c, l, expected) in [(10e9, 0.08, 0.85), (100e9, 0.03, 1.2), (100e9, 0.08, 8.5)] {
        let d_f = square_fraunhofer_distance(l, SPEED_OF_LIGHT / f_c).map_err(HarnessError::from);
        report.record(
            "geometry",
            format!("fraunhofer distance {} GHz, {} cm vs {expected} m", f_c / 1e9, l * 100.0),
            0.05,
            d_f.map(|d| (d - expected).abs() / expected),
        );
    }

    let sizes: Vec<f64> = {
        let mut v = vec![config.sweep.l_r_m[0]];
        let last = *config.sweep.l_r_m.last().expect("validated non-empty");
        if last != v[0] {
            v.push(last);
        }
        v
    };
    let largest_n_u = *config.sweep.n_u.iter().max().expect("validated non-empty");
    let largest_l = config.sweep.l_r_m.iter().copied().fold(f64::MIN, f64::max);

    for &l in &sizes {
        let p = point(config, l, 4);
        report.record(
            "channel",
            format!("near/far agreement at 1000 d_f, L_R = {l} m"),
            REGIME_TOLERANCE,
            regime_residual(config, &codes, &p),
        );
    }

    for &l in &sizes {
        let p = point(config, l, 4);
        for regime in [Regime::Near, Regime::Far] {
            for scenario in [Scenario::Rest, Scenario::Exercise] {
                report.record(
                    "fim",
                    format!(
                        "analytic vs central differences, {} {}-field, L_R = {l} m, N_U = 4",
                        scenario.as_str(),
                        regime.as_str()
                    ),
                    FD_TOLERANCE,
                    fd_residual(config, &codes, provider, &p, regime, scenario),
                );
            }
        }
    }

    let big = point(config, largest_l, largest_n_u);
    for regime in [Regime::Near, Regime::Far] {
        for scenario in [Scenario::Rest, Scenario::Exercise] {
            let tag = format!(
                "{} {}-field, L_R = {largest_l} m, N_U = {largest_n_u}",
                scenario.as_str(),
                regime.as_str()
            );
            let s = match config
                .build_model(&big, regime)
                .and_then(|m| Ok(scenario_fim(&m, &codes, provider, scenario)?))
                .and_then(|fim| structure(&fim))
            {
                Ok(s) => s,
                Err(e) => {
                    report.checks.push(Check::failed("fim", format!("structure, {tag}"), STRUCTURE_TOLERANCE, &e));
                    continue;
                }
            };
            let mut rows = vec![
                ("symmetry", s.symmetry),
                ("positive semidefinite", s.negativity),
                ("J(beta_re) = J(beta_im)", s.gain_pairs),
                ("beta_re/beta_im cross terms vanish", s.gain_cross),
                ("cross-path blocks vanish", s.cross_path),
            ];
            if scenario == Scenario::Rest {
                rows.push((
                    "direct-path beta_re/beta_im cross term vanishes",
                    s.los_cross.unwrap_or(f64::INFINITY),
                ));
            }
            for (what, residual) in rows {
                report.record("fim", format!("{what}, {tag}"), STRUCTURE_TOLERANCE, Ok(residual));
            }
        }
    }

    let mut far_worst: Result<f64, HarnessError> = Ok(0.0);
    let mut far_count = 0;
    for &l in &config.sweep.l_r_m {
        for &n_u in &config.sweep.n_u {
            for &seed in config.seeds.iter().take(2) {
                let p = SweepPoint { seed, ..point(config, l, n_u) };
                far_count += 1;
                far_worst = far_worst.and_then(|w| Ok(w.max(path_nullity(config, &codes, provider, &p, Regime::Far)?)));
            }
        }
    }
    report.record(
        "bounds",
        format!("far-field orientation Schur complement vanishes ({far_count} points)"),
        DEFAULT_TOLERANCE,
        far_worst,
    );
    for &l in &sizes {
        report.record(
            "bounds",
            format!("near-field orientation Schur complement vanishes with one antenna, L_R = {l} m"),
            DEFAULT_TOLERANCE,
            path_nullity(config, &codes, provider, &point(config, l, 1), Regime::Near),
        );
    }

    for scenario in [Scenario::Rest, Scenario::Exercise] {
        report.record(
            "bounds",
            format!(
                "doubling N0 scales {} bounds by sqrt 2, L_R = {largest_l} m, N_U = {largest_n_u}",
                scenario.as_str()
            ),
            STRUCTURE_TOLERANCE,
            snr_homogeneity(config, &codes, provider, &big, scenario),
        );
    }

    report
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::fim::{AnalyticDerivatives, Jacobian};

    /// Analytic derivatives with one orientation column perturbed by 1%.
    struct Corrupted;

    impl DerivativeProvider for Corrupted {
        fn name(&self) -> &str {
            "corrupted"
        }

        fn jacobian(
            &self,
            model: &SignalModel,
            codes: &FastVaryingCode,
            params: &ParamVector,
        ) -> Result<Jacobian, crate::fim::FimError> {
            let mut j = AnalyticDerivatives.jacobian(model, codes, params)?;
            if let Some(k) = params.labels().iter().position(|l| l.is_orientation()) {
                j.scale_column(k, Complex64::new(1.01, 0.0));
            }
            Ok(j)
        }
    }

    fn quick_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.sweep.n_u = vec![1, 2, 8];
        config.sweep.l_r_m = vec![0.03, 0.05];
        config.seeds = vec![0, 1];
        config.numerology.subcarriers = 16;
        config
    }

    #[test]
    fn default_checks_pass() {
        let report = run_validation_suite(&quick_config(), &AnalyticDerivatives);
        assert!(report.passed(), "{report}");
        for module in ["ris-codes", "geometry", "channel", "fim", "bounds"] {
            assert!(report.checks.iter().any(|c| c.module == module), "no {module} checks");
        }
    }

    #[test]
    fn corrupted_derivatives_fail_in_fim() {
        let report = run_validation_suite(&quick_config(), &Corrupted);
        assert!(!report.passed());
        let failing: Vec<&Check> = report.failures().collect();
        assert!(failing.iter().any(|c| c.module == "fim" && c.name.contains("central differences")));
        assert!(failing.iter().all(|c| c.residual > c.tolerance || c.error.is_some()));
    }

    #[test]
    fn too_few_symbols_reports_code_precondition() {
        let mut config = quick_config();
        config.numerology.symbols = 2;
        let report = run_validation_suite(&config, &AnalyticDerivatives);
        assert!(!report.passed());
        assert_eq!(report.checks.len(), 1);
        let c = &report.checks[0];
        assert_eq!(c.module, "ris-codes");
        assert!(c.error.as_deref().unwrap().contains("symbols"), "{c}");
        assert!(c.to_string().starts_with("FAIL [ris-codes]"));
    }
}
