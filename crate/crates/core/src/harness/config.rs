//! Experiment configuration, loaded from TOML.
//!
//! Every physical quantity carries its unit in the key name. A file only needs
//! the keys it wants to change; everything else falls back to [`ExperimentConfig::default`].

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    db_to_linear, dbm_to_watts, los_pathloss_gain, pathloss_gain, OfdmNumerology, Receiver, Regime,
    RisSensor, SignalModel, SPEED_OF_LIGHT,
};
use crate::codes::{dft_code_assignment, random_phase_profile, FastVaryingCode};
use crate::geometry::{ArrayLayout, EulerAngles, Pose, Vec3};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumerologyConfig {
    pub subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    /// OFDM symbols `T`; must exceed the sensor count
    pub symbols: usize,
    pub p_tx_dbm: f64,
    pub n0_dbm_per_hz: f64,
}

impl Default for NumerologyConfig {
    fn default() -> Self {
        Self {
            subcarriers: 256,
            subcarrier_spacing_hz: 120e3,
            symbols: 16,
            p_tx_dbm: 23.0,
            n0_dbm_per_hz: -174.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaConfig {
    pub g_b_db: f64,
    pub g_u_db: f64,
    /// pathloss gain controlling factor
    pub q0: f64,
    pub ris_spacing_wavelengths: f64,
    pub receiver_spacing_wavelengths: f64,
    /// direction of the receive ULA in global coordinates
    pub receiver_axis: [f64; 3],
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            g_b_db: 20.0,
            g_u_db: 20.0,
            q0: 0.285,
            ris_spacing_wavelengths: 0.5,
            receiver_spacing_wavelengths: 0.5,
            receiver_axis: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub p_m: [f64; 3],
    /// `[yaw, pitch, roll]`
    pub phi_rad: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub p_b_m: [f64; 3],
    pub p_u_m: [f64; 3],
    pub sensors: Vec<SensorConfig>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            p_b_m: [0.0, 0.0, 4.0],
            p_u_m: [2.0, 3.0, 4.0],
            sensors: vec![
                SensorConfig {
                    p_m: [2.0, 2.0, 4.0],
                    phi_rad: [0.1, 0.2, 0.1],
                },
                SensorConfig {
                    p_m: [2.0, 2.3, 4.0],
                    phi_rad: [0.15, 0.12, 0.1],
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_u: Vec<usize>,
    pub l_r_m: Vec<f64>,
    pub f_c_hz: Vec<f64>,
    /// 1-based sensor numbers written to the scenario CSVs
    pub report_sensors: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_u: vec![1, 2, 4, 8, 16, 32, 64],
            l_r_m: vec![0.03, 0.05, 0.08],
            f_c_hz: vec![100e9],
            report_sensors: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FraunhoferConfig {
    pub f_c_hz: Vec<f64>,
    pub l_r_min_m: f64,
    pub l_r_max_m: f64,
    pub l_r_step_m: f64,
}

impl Default for FraunhoferConfig {
    fn default() -> Self {
        Self {
            f_c_hz: vec![10e9, 30e9, 60e9, 100e9],
            l_r_min_m: 0.03,
            l_r_max_m: 0.08,
            l_r_step_m: 0.005,
        }
    }
}

impl FraunhoferConfig {
    /// Inclusive grid `min, min + step, …, max`.
    pub fn side_lengths(&self) -> Vec<f64> {
        let count = ((self.l_r_max_m - self.l_r_min_m) / self.l_r_step_m + 1e-9).floor() as usize + 1;
        (0..count)
            // rounded to the nanometre so that 0.03 + 1 * 0.005 prints as 0.035
            .map(|i| ((self.l_r_min_m + i as f64 * self.l_r_step_m) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSelector {
    Rest,
    Exercise,
    Both,
}

impl ScenarioSelector {
    pub fn includes_rest(self) -> bool {
        matches!(self, ScenarioSelector::Rest | ScenarioSelector::Both)
    }

    pub fn includes_exercise(self) -> bool {
        matches!(self, ScenarioSelector::Exercise | ScenarioSelector::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Orientation,
    Position,
}

/// Externally sourced error level drawn next to a bound curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceCurve {
    pub label: String,
    pub quantity: Quantity,
    /// rad for orientation, m for position
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub numerology: NumerologyConfig,
    pub antennas: AntennaConfig,
    pub geometry: GeometryConfig,
    pub sweep: SweepConfig,
    pub fraunhofer: FraunhoferConfig,
    pub seeds: Vec<u64>,
    pub scenario: ScenarioSelector,
    pub regime: Regime,
    pub reference_curves: Vec<ReferenceCurve>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            numerology: NumerologyConfig::default(),
            antennas: AntennaConfig::default(),
            geometry: GeometryConfig::default(),
            sweep: SweepConfig::default(),
            fraunhofer: FraunhoferConfig::default(),
            seeds: (0..11).collect(),
            scenario: ScenarioSelector::Both,
            regime: Regime::Near,
            reference_curves: Vec::new(),
        }
    }
}

/// One point of a scenario sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub carrier_hz: f64,
    pub side_length_m: f64,
    pub antennas: usize,
    pub seed: u64,
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn positive(name: &str, value: f64) -> Result<(), HarnessError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive and finite, got {value}")))
    }
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Mixes `(seed, stream, a, b)` into an independent 64-bit seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ a.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ b.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GAIN_STREAM: u64 = 1;
const PROFILE_STREAM: u64 = 2;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Structural checks. The `T > M` code precondition is deliberately left
    /// to code construction so that `validate` can report it.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let n = &self.numerology;
        if n.subcarriers == 0 || n.symbols == 0 {
            return Err(config_error("subcarriers and symbols must be >= 1"));
        }
        positive("subcarrier_spacing_hz", n.subcarrier_spacing_hz)?;
        for (name, v) in [("p_tx_dbm", n.p_tx_dbm), ("n0_dbm_per_hz", n.n0_dbm_per_hz)] {
            if !v.is_finite() {
                return Err(config_error(format!("{name} must be finite")));
            }
        }
        let a = &self.antennas;
        positive("ris_spacing_wavelengths", a.ris_spacing_wavelengths)?;
        positive("receiver_spacing_wavelengths", a.receiver_spacing_wavelengths)?;
        if !(a.q0.is_finite() && a.g_b_db.is_finite() && a.g_u_db.is_finite()) {
            return Err(config_error("antenna gains and q0 must be finite"));
        }
        if !(vec3(a.receiver_axis).norm() > 0.0) {
            return Err(config_error("receiver_axis must be a nonzero vector"));
        }
        let g = &self.geometry;
        if g.sensors.is_empty() {
            return Err(config_error("geometry needs at least one sensor"));
        }
        let p_b = vec3(g.p_b_m);
        let p_u = vec3(g.p_u_m);
        positive("|p_u - p_b|", (p_u - p_b).norm())?;
        for (i, s) in g.sensors.iter().enumerate() {
            let p = vec3(s.p_m);
            positive(&format!("distance from transmitter to sensor {}", i + 1), (p - p_b).norm())?;
            positive(&format!("distance from sensor {} to receiver", i + 1), (p_u - p).norm())?;
            if !s.phi_rad.iter().all(|v| v.is_finite()) {
                return Err(config_error(format!("sensor {} orientation must be finite", i + 1)));
            }
        }
        let s = &self.sweep;
        if s.n_u.is_empty() || s.l_r_m.is_empty() || s.f_c_hz.is_empty() {
            return Err(config_error("sweep lists n_u, l_r_m and f_c_hz must be non-empty"));
        }
        if s.n_u.contains(&0) {
            return Err(config_error("n_u entries must be >= 1"));
        }
        for &l in &s.l_r_m {
            positive("l_r_m", l)?;
        }
        for &f in &s.f_c_hz {
            positive("f_c_hz", f)?;
        }
        if s.report_sensors.is_empty()
            || s.report_sensors.iter().any(|&m| m == 0 || m > g.sensors.len())
        {
            return Err(config_error(format!(
                "report_sensors must list sensor numbers in 1..={}",
                g.sensors.len()
            )));
        }
        let f = &self.fraunhofer;
        for &fc in &f.f_c_hz {
            positive("fraunhofer.f_c_hz", fc)?;
        }
        positive("fraunhofer.l_r_min_m", f.l_r_min_m)?;
        positive("fraunhofer.l_r_step_m", f.l_r_step_m)?;
        if f.l_r_max_m < f.l_r_min_m {
            return Err(config_error("fraunhofer.l_r_max_m must be >= l_r_min_m"));
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds must be non-empty"));
        }
        for c in &self.reference_curves {
            positive(&format!("reference curve '{}'", c.label), c.value)?;
        }
        Ok(())
    }

    /// Sweep points in output order: carrier, side length, antenna count, seed.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let mut points = Vec::new();
        for &carrier_hz in &self.sweep.f_c_hz {
            for &side_length_m in &self.sweep.l_r_m {
                for &antennas in &self.sweep.n_u {
                    for &seed in &self.seeds {
                        points.push(SweepPoint {
                            carrier_hz,
                            side_length_m,
                            antennas,
                            seed,
                        });
                    }
                }
            }
        }
        points
    }

    pub fn numerology(&self, carrier_hz: f64) -> Result<OfdmNumerology, HarnessError> {
        let n = &self.numerology;
        Ok(OfdmNumerology::new(
            carrier_hz,
            n.subcarriers,
            n.subcarrier_spacing_hz,
            n.symbols,
            dbm_to_watts(n.p_tx_dbm),
            dbm_to_watts(n.n0_dbm_per_hz),
        )?)
    }

    pub fn codes(&self) -> Result<FastVaryingCode, HarnessError> {
        Ok(dft_code_assignment(self.geometry.sensors.len(), self.numerology.symbols)?)
    }

    /// Signal model of one sweep point.
    ///
    /// Path-gain phases depend only on the seed, and each sensor's phase
    /// profile only on `(seed, sensor, element count)`, so points that differ
    /// in antenna count alone share every random quantity.
    pub fn build_model(&self, point: &SweepPoint, regime: Regime) -> Result<SignalModel, HarnessError> {
        let numerology = self.numerology(point.carrier_hz)?;
        let lambda = SPEED_OF_LIGHT / point.carrier_hz;
        let a = &self.antennas;
        let (g_b, g_u) = (db_to_linear(a.g_b_db), db_to_linear(a.g_u_db));
        let p_b = vec3(self.geometry.p_b_m);
        let p_u = vec3(self.geometry.p_u_m);
        let layout = ArrayLayout::square(point.side_length_m, a.ris_spacing_wavelengths * lambda)?;

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(point.seed, GAIN_STREAM, 0, 0));
        let mut phase = || rng.gen_range(0.0..std::f64::consts::TAU);
        let los = Complex64::from_polar(los_pathloss_gain((p_u - p_b).norm(), lambda, g_b, g_u, a.q0)?, phase());
        let mut sensors = Vec::with_capacity(self.geometry.sensors.len());
        for (m, s) in self.geometry.sensors.iter().enumerate() {
            let p = vec3(s.p_m);
            let amp = pathloss_gain((p - p_b).norm(), (p_u - p).norm(), lambda, g_b, g_u, a.q0)?;
            let gain = Complex64::from_polar(amp, phase());
            let profile_seed = derive_seed(point.seed, PROFILE_STREAM, m as u64, layout.len() as u64);
            sensors.push(RisSensor::new(
                layout.clone(),
                Pose::new(p, EulerAngles::from_array(s.phi_rad)?),
                random_phase_profile(profile_seed, layout.len())?,
                gain,
            )?);
        }
        let rx_layout = ArrayLayout::linear(
            point.antennas,
            a.receiver_spacing_wavelengths * lambda,
            vec3(a.receiver_axis),
        )?;
        let receiver = Receiver::new(p_u, rx_layout)?;
        Ok(SignalModel::new(numerology, p_b, receiver, sensors, los, regime)?)
    }
}
