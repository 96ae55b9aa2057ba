//! Received-signal model for a line-of-sight path plus `M` RIS sensor paths.
//!
//! In the near field every element-to-antenna delay is evaluated from exact
//! distances. In the far field distances are expanded to first order around
//! the array centroids, which turns the per-element phases into plane-wave
//! steering vectors.
//!
//! The signal on subcarrier `n` depends on `n` only through the pilot
//! `x_B[n]` (delays enter through the carrier phase alone), so the model is
//! evaluated as a per-unit-pilot response `ν_{t,u}` with `μ_{t,u}[n] = ν_{t,u} x_B[n]`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{FastVaryingCode, SlowVaryingProfile};
use crate::geometry::{
    direction_between, fraunhofer_distance, ArrayLayout, Direction,
    GeometryError, Pose, Vec3,
};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("source coincides with element {0}")]
    CoincidentElement(usize),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("operation requires the {expected:?}-field model, got {actual:?}")]
    RegimeMismatch { expected: Regime, actual: Regime },
    #[error("sensor {sensor}: profile has {profile} entries but layout has {layout} elements")]
    ProfileLength {
        sensor: usize,
        profile: usize,
        layout: usize,
    },
    #[error("code covers {code_sensors} sensors x {code_symbols} symbols, model has {sensors} x {symbols}")]
    CodeShape {
        code_sensors: usize,
        code_symbols: usize,
        sensors: usize,
        symbols: usize,
    },
    #[error("receiver needs at least one antenna")]
    NoAntennas,
    #[error("invalid numerology: {0}")]
    Numerology(String),
}

/// Propagation regime used to evaluate the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Near,
    Far,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Near => "near",
            Regime::Far => "far",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "near" => Ok(Regime::Near),
            "far" => Ok(Regime::Far),
            other => Err(format!("unknown regime '{other}' (expected near|far)")),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// OFDM pilot numerology and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmNumerology {
    carrier_hz: f64,
    wavelength: f64,
    subcarriers: usize,
    subcarrier_spacing_hz: f64,
    symbols: usize,
    noise_psd: f64,
    pilot_magnitude: f64,
}

impl OfdmNumerology {
    /// `noise_psd` in W/Hz; the pilot is constant-modulus with total power
    /// `tx_power_w` spread over the subcarriers, `|x_B[n]| = √(P/N)`.
    pub fn new(
        carrier_hz: f64,
        subcarriers: usize,
        subcarrier_spacing_hz: f64,
        symbols: usize,
        tx_power_w: f64,
        noise_psd: f64,
    ) -> Result<Self, ChannelError> {
        for (name, value) in [
            ("carrier frequency", carrier_hz),
            ("subcarrier spacing", subcarrier_spacing_hz),
            ("transmit power", tx_power_w),
            ("noise PSD", noise_psd),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ChannelError::NonPositive { name, value });
            }
        }
        if subcarriers == 0 || symbols == 0 {
            return Err(ChannelError::Numerology(
                "subcarrier and symbol counts must be >= 1".into(),
            ));
        }
        Ok(Self {
            carrier_hz,
            wavelength: SPEED_OF_LIGHT / carrier_hz,
            subcarriers,
            subcarrier_spacing_hz,
            symbols,
            noise_psd,
            pilot_magnitude: (tx_power_w / subcarriers as f64).sqrt(),
        })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `2π / λ`
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn noise_psd(&self) -> f64 {
        self.noise_psd
    }

    /// Noise variance of one frequency-domain sample, `N0 · Δf`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_psd * self.subcarrier_spacing_hz
    }

    pub fn pilot_magnitude(&self) -> f64 {
        self.pilot_magnitude
    }

    /// `x_B[n]`; identical on every subcarrier.
    pub fn pilot(&self, _n: usize) -> Complex64 {
        Complex64::new(self.pilot_magnitude, 0.0)
    }

    pub fn pilots(&self) -> Vec<Complex64> {
        (0..self.subcarriers).map(|n| self.pilot(n)).collect()
    }

    pub fn with_symbols(&self, symbols: usize) -> Self {
        Self {
            symbols,
            ..self.clone()
        }
    }

    pub fn with_subcarriers(&self, subcarriers: usize) -> Self {
        let power = self.pilot_magnitude.powi(2) * self.subcarriers as f64;
        Self {
            subcarriers,
            pilot_magnitude: (power / subcarriers as f64).sqrt(),
            ..self.clone()
        }
    }

    pub fn with_noise_psd(&self, noise_psd: f64) -> Self {
        Self {
            noise_psd,
            ..self.clone()
        }
    }
}

/// Per-element phase factors of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: Vec<Complex64>,
    pub regime: Regime,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Spherical-wavefront factors `exp(−j2π d_r / λ)` from exact source-to-element distances.
pub fn near_field_steering(
    source: &Vec3,
    element_positions: &[Vec3],
    wavelength: f64,
) -> Result<SteeringVector, ChannelError> {
    let k = TAU / wavelength;
    let entries = element_positions
        .iter()
        .enumerate()
        .map(|(r, p)| {
            let d = (p - source).norm();
            if d == 0.0 {
                Err(ChannelError::CoincidentElement(r))
            } else {
                Ok(Complex64::from_polar(1.0, -k * d))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(SteeringVector {
        entries,
        regime: Regime::Near,
    })
}

/// Plane-wave factors `exp(−j(2π/λ) Δᵀ s_r)` for offsets relative to the array centroid.
pub fn far_field_steering(direction: &Direction, local_offsets: &[Vec3], wavelength: f64) -> SteeringVector {
    let k = TAU / wavelength;
    let entries = local_offsets
        .iter()
        .map(|s| Complex64::from_polar(1.0, -k * direction.unit.dot(s)))
        .collect();
    SteeringVector {
        entries,
        regime: Regime::Far,
    }
}

/// `|base + v| − |base|`, evaluated without cancellation; `None` if `base + v = 0`.
fn path_excess(base: &Vec3, base_norm: f64, v: &Vec3) -> Option<f64> {
    let full = (base + v).norm();
    if full == 0.0 {
        return None;
    }
    Some((2.0 * base.dot(v) + v.norm_squared()) / (full + base_norm))
}

/// Antenna gains and exponent of the RIS pathloss law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams {
    /// linear transmit antenna gain
    pub g_b: f64,
    /// linear receive antenna gain
    pub g_u: f64,
    /// gain controlling factor
    pub q0: f64,
}

/// Amplitude gain `λ² √G_B √G_U / (32π d1^{q0+1} d2^{q0+1})` of a reflected path.
pub fn pathloss_gain(
    d1: f64,
    d2: f64,
    wavelength: f64,
    g_b: f64,
    g_u: f64,
    q0: f64,
) -> Result<f64, ChannelError> {
    for (name, value) in [("distance d1", d1), ("distance d2", d2), ("wavelength", wavelength)] {
        if !(value > 0.0) {
            return Err(ChannelError::NonPositive { name, value });
        }
    }
    Ok(wavelength * wavelength * g_b.sqrt() * g_u.sqrt()
        / (32.0 * PI * d1.powf(q0 + 1.0) * d2.powf(q0 + 1.0)))
}

/// Same law for the direct path, with the single distance raised to `q0 + 1` once.
pub fn los_pathloss_gain(
    distance: f64,
    wavelength: f64,
    g_b: f64,
    g_u: f64,
    q0: f64,
) -> Result<f64, ChannelError> {
    pathloss_gain(distance, 1.0, wavelength, g_b, g_u, q0)
}

/// An on-body RIS: element grid, pose, static phase profile and complex path gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RisSensor {
    layout: ArrayLayout,
    pose: Pose,
    profile: SlowVaryingProfile,
    gain: Complex64,
    rotated_offsets: Vec<Vec3>,
    elements: Vec<Vec3>,
}

impl RisSensor {
    pub fn new(
        layout: ArrayLayout,
        pose: Pose,
        profile: SlowVaryingProfile,
        gain: Complex64,
    ) -> Result<Self, ChannelError> {
        if profile.len() != layout.len() {
            return Err(ChannelError::ProfileLength {
                sensor: 0,
                profile: profile.len(),
                layout: layout.len(),
            });
        }
        let (rotated_offsets, elements) = placed(&layout, &pose);
        Ok(Self {
            layout,
            pose,
            profile,
            gain,
            rotated_offsets,
            elements,
        })
    }

    pub fn layout(&self) -> &ArrayLayout {
        &self.layout
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn profile(&self) -> &SlowVaryingProfile {
        &self.profile
    }

    pub fn gain(&self) -> Complex64 {
        self.gain
    }

    /// Global element positions `p_R + Q s̃_r`.
    pub fn elements(&self) -> &[Vec3] {
        &self.elements
    }

    /// `Q s̃_r`, element offsets in global axes.
    pub fn rotated_offsets(&self) -> &[Vec3] {
        &self.rotated_offsets
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        let (rotated_offsets, elements) = placed(&self.layout, &pose);
        Self {
            rotated_offsets,
            elements,
            pose,
            ..self.clone()
        }
    }

    pub fn with_gain(&self, gain: Complex64) -> Self {
        Self {
            gain,
            ..self.clone()
        }
    }
}

fn placed(layout: &ArrayLayout, pose: &Pose) -> (Vec<Vec3>, Vec<Vec3>) {
    let q = pose.rotation();
    let rotated: Vec<Vec3> = layout.offsets().iter().map(|s| q.apply(s)).collect();
    let elements = rotated.iter().map(|v| pose.position + v).collect();
    (rotated, elements)
}

/// Multi-antenna receiver whose axes are aligned with the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    position: Vec3,
    layout: ArrayLayout,
    antennas: Vec<Vec3>,
}

impl Receiver {
    pub fn new(position: Vec3, layout: ArrayLayout) -> Result<Self, ChannelError> {
        if layout.is_empty() {
            return Err(ChannelError::NoAntennas);
        }
        let antennas = layout.offsets().iter().map(|s| position + s).collect();
        Ok(Self {
            position,
            layout,
            antennas,
        })
    }

    pub fn position(&self) -> &Vec3 {
        &self.position
    }

    pub fn layout(&self) -> &ArrayLayout {
        &self.layout
    }

    pub fn antennas(&self) -> &[Vec3] {
        &self.antennas
    }

    pub fn len(&self) -> usize {
        self.antennas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antennas.is_empty()
    }
}

/// Whether the receiver sits inside a sensor's radiating near field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FraunhoferCheck {
    pub sensor: usize,
    pub fraunhofer_distance: f64,
    pub receiver_distance: f64,
}

impl FraunhoferCheck {
    pub fn receiver_in_near_field(&self) -> bool {
        self.receiver_distance < self.fraunhofer_distance
    }
}

/// Complete, immutable description of one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    numerology: OfdmNumerology,
    transmitter: Vec3,
    receiver: Receiver,
    sensors: Vec<RisSensor>,
    los_gain: Complex64,
    regime: Regime,
    fraunhofer: Vec<FraunhoferCheck>,
}

impl SignalModel {
    pub fn new(
        numerology: OfdmNumerology,
        transmitter: Vec3,
        receiver: Receiver,
        sensors: Vec<RisSensor>,
        los_gain: Complex64,
        regime: Regime,
    ) -> Result<Self, ChannelError> {
        if receiver.is_empty() {
            return Err(ChannelError::NoAntennas);
        }
        let lambda = numerology.wavelength();
        let mut fraunhofer = Vec::with_capacity(sensors.len());
        for (m, sensor) in sensors.iter().enumerate() {
            if sensor.profile.len() != sensor.layout.len() {
                return Err(ChannelError::ProfileLength {
                    sensor: m,
                    profile: sensor.profile.len(),
                    layout: sensor.layout.len(),
                });
            }
            direction_between(&transmitter, &sensor.pose.position)?;
            let to_rx = direction_between(&sensor.pose.position, receiver.position())?;
            let side = sensor.layout.side_length();
            let d_f = if side > 0.0 {
                fraunhofer_distance(side * std::f64::consts::SQRT_2, lambda)?
            } else {
                0.0
            };
            fraunhofer.push(FraunhoferCheck {
                sensor: m,
                fraunhofer_distance: d_f,
                receiver_distance: to_rx.distance,
            });
        }
        direction_between(&transmitter, receiver.position())?;
        Ok(Self {
            numerology,
            transmitter,
            receiver,
            sensors,
            los_gain,
            regime,
            fraunhofer,
        })
    }

    pub fn numerology(&self) -> &OfdmNumerology {
        &self.numerology
    }

    pub fn transmitter(&self) -> &Vec3 {
        &self.transmitter
    }

    pub fn receiver(&self) -> &Receiver {
        &self.receiver
    }

    pub fn sensors(&self) -> &[RisSensor] {
        &self.sensors
    }

    pub fn los_gain(&self) -> Complex64 {
        self.los_gain
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn fraunhofer_checks(&self) -> &[FraunhoferCheck] {
        &self.fraunhofer
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self {
            regime,
            ..self.clone()
        }
    }

    pub fn with_los_gain(&self, los_gain: Complex64) -> Self {
        Self {
            los_gain,
            ..self.clone()
        }
    }

    pub fn with_numerology(&self, numerology: OfdmNumerology) -> Self {
        Self {
            numerology,
            ..self.clone()
        }
    }

    /// Replaces sensor `m`; Fraunhofer checks are not recomputed.
    pub fn with_sensor(&self, m: usize, sensor: RisSensor) -> Self {
        let mut sensors = self.sensors.clone();
        sensors[m] = sensor;
        Self {
            sensors,
            ..self.clone()
        }
    }

    pub fn check_codes(&self, codes: &FastVaryingCode) -> Result<(), ChannelError> {
        if codes.sensors() != self.sensors.len() || codes.symbols() != self.numerology.symbols() {
            return Err(ChannelError::CodeShape {
                code_sensors: codes.sensors(),
                code_symbols: codes.symbols(),
                sensors: self.sensors.len(),
                symbols: self.numerology.symbols(),
            });
        }
        Ok(())
    }

    fn check_index(what: &'static str, index: usize, limit: usize) -> Result<(), ChannelError> {
        if index >= limit {
            return Err(ChannelError::IndexOutOfRange { what, index, limit });
        }
        Ok(())
    }

    fn require(&self, regime: Regime) -> Result<(), ChannelError> {
        if self.regime != regime {
            return Err(ChannelError::RegimeMismatch {
                expected: regime,
                actual: self.regime,
            });
        }
        Ok(())
    }

    /// `e^{−j2π d_{B,u}/λ}` for antenna `u`, exact distance.
    pub fn near_los_phase(&self, u: usize) -> Result<Complex64, ChannelError> {
        let d = (self.receiver.antennas[u] - self.transmitter).norm();
        if d == 0.0 {
            return Err(ChannelError::CoincidentElement(u));
        }
        Ok(Complex64::from_polar(1.0, -self.numerology.wavenumber() * d))
    }

    /// Near-field cascade `a_{p_u}ᵀ Γ a_{p_B}` of sensor `m` at antenna `u`.
    ///
    /// Each element's two-hop distance is split into the centroid distances
    /// plus a small excess, so that rotating the sensor by a micro-radian
    /// changes the phase by an amount far above double-precision roundoff of
    /// metre-scale coordinates.
    pub fn near_sensor_response(&self, m: usize, u: usize) -> Result<Complex64, ChannelError> {
        let sensor = &self.sensors[m];
        let k = self.numerology.wavenumber();
        let from_tx = sensor.pose.position - self.transmitter;
        let from_rx = sensor.pose.position - self.receiver.antennas[u];
        let (d_b, d_u) = (from_tx.norm(), from_rx.norm());
        let mut sum = Complex64::default();
        for (r, (v, g)) in sensor
            .rotated_offsets
            .iter()
            .zip(sensor.profile.coefficients())
            .enumerate()
        {
            let excess = path_excess(&from_tx, d_b, v).ok_or(ChannelError::CoincidentElement(r))?
                + path_excess(&from_rx, d_u, v).ok_or(ChannelError::CoincidentElement(r))?;
            sum += g * Complex64::from_polar(1.0, -k * excess);
        }
        Ok(sum * Complex64::from_polar(1.0, -k * (d_b + d_u)))
    }

    /// Far-field reflection factor `a_RUᴴ Γ a_RB` of sensor `m`.
    pub fn far_sensor_factor(&self, m: usize) -> Result<Complex64, ChannelError> {
        let sensor = &self.sensors[m];
        let lambda = self.numerology.wavelength();
        let q = sensor.pose.rotation();
        let offsets: Vec<Vec3> = sensor.layout.offsets().iter().map(|s| q.apply(s)).collect();
        let incidence = direction_between(&self.transmitter, &sensor.pose.position)?;
        let departure = direction_between(&sensor.pose.position, self.receiver.position())?;
        let a_rb = far_field_steering(&incidence, &offsets, lambda);
        let a_ru = far_field_steering(&departure, &offsets, lambda);
        Ok(a_ru
            .entries
            .iter()
            .zip(&a_rb.entries)
            .zip(sensor.profile.coefficients())
            .map(|((ru, rb), g)| ru.conj() * g * rb)
            .sum())
    }

    /// `μ_{t,u}[n]` of the near-field model (0-based indices).
    pub fn noise_free_signal(
        &self,
        codes: &FastVaryingCode,
        t: usize,
        u: usize,
        n: usize,
    ) -> Result<Complex64, ChannelError> {
        self.require(Regime::Near)?;
        self.check_codes(codes)?;
        Self::check_index("symbol", t, self.numerology.symbols())?;
        Self::check_index("antenna", u, self.receiver.len())?;
        Self::check_index("subcarrier", n, self.numerology.subcarriers())?;
        let mut nu = self.los_gain * self.near_los_phase(u)?;
        for m in 0..self.sensors.len() {
            nu += codes.get(t, m) * self.sensors[m].gain * self.near_sensor_response(m, u)?;
        }
        Ok(nu * self.numerology.pilot(n))
    }

    /// `μ_t[n]` over all antennas for the far-field model.
    pub fn far_field_signal(
        &self,
        codes: &FastVaryingCode,
        t: usize,
        n: usize,
    ) -> Result<Vec<Complex64>, ChannelError> {
        self.require(Regime::Far)?;
        self.check_codes(codes)?;
        Self::check_index("symbol", t, self.numerology.symbols())?;
        Self::check_index("subcarrier", n, self.numerology.subcarriers())?;
        let far = FarFieldTerms::new(self)?;
        let x = self.numerology.pilot(n);
        Ok((0..self.receiver.len())
            .map(|u| far.unit_pilot_response(codes, t, u) * x)
            .collect())
    }

    /// Every noise-free sample, indexed `(t * N_U + u) * N + n`.
    ///
    /// Same values as [`noise_free_signal`](Self::noise_free_signal) /
    /// [`far_field_signal`](Self::far_field_signal), with per-antenna
    /// responses computed once instead of per sample.
    pub fn signal_block(&self, codes: &FastVaryingCode) -> Result<Vec<Complex64>, ChannelError> {
        self.check_codes(codes)?;
        let symbols = self.numerology.symbols();
        let antennas = self.receiver.len();
        let pilots = self.numerology.pilots();
        let mut out = Vec::with_capacity(symbols * antennas * pilots.len());
        match self.regime {
            Regime::Near => {
                let mut los = Vec::with_capacity(antennas);
                let mut paths = vec![Vec::with_capacity(antennas); self.sensors.len()];
                for u in 0..antennas {
                    los.push(self.los_gain * self.near_los_phase(u)?);
                    for (m, path) in paths.iter_mut().enumerate() {
                        path.push(self.sensors[m].gain * self.near_sensor_response(m, u)?);
                    }
                }
                for t in 0..symbols {
                    for u in 0..antennas {
                        let mut nu = los[u];
                        for (m, path) in paths.iter().enumerate() {
                            nu += codes.get(t, m) * path[u];
                        }
                        out.extend(pilots.iter().map(|x| nu * x));
                    }
                }
            }
            Regime::Far => {
                let far = FarFieldTerms::new(self)?;
                for t in 0..symbols {
                    for u in 0..antennas {
                        let nu = far.unit_pilot_response(codes, t, u);
                        out.extend(pilots.iter().map(|x| nu * x));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Centroid delays and steering factors of the far-field model.
pub(crate) struct FarFieldTerms {
    /// `β0 e^{−jk d_BU} a_UB[u]`
    pub los: Vec<Complex64>,
    /// per sensor: `e^{−jk(d_BR + d_RU)} a_UR[u]`
    pub carriers: Vec<Vec<Complex64>>,
    /// per sensor: `a_RUᴴ Γ a_RB`
    pub factors: Vec<Complex64>,
    pub gains: Vec<Complex64>,
}

impl FarFieldTerms {
    pub fn new(model: &SignalModel) -> Result<Self, ChannelError> {
        let lambda = model.numerology.wavelength();
        let k = model.numerology.wavenumber();
        let rx = model.receiver.position();
        let rx_offsets = model.receiver.layout.offsets();
        let direct = direction_between(&model.transmitter, rx)?;
        let a_ub = far_field_steering(&direct, rx_offsets, lambda);
        let los_phase = Complex64::from_polar(1.0, -k * direct.distance);
        let los = a_ub
            .entries
            .iter()
            .map(|a| model.los_gain * los_phase * a)
            .collect();
        let mut carriers = Vec::with_capacity(model.sensors.len());
        let mut factors = Vec::with_capacity(model.sensors.len());
        for (m, sensor) in model.sensors.iter().enumerate() {
            let incidence = direction_between(&model.transmitter, &sensor.pose.position)?;
            let departure = direction_between(&sensor.pose.position, rx)?;
            let a_ur = far_field_steering(&departure, rx_offsets, lambda);
            let phase = Complex64::from_polar(1.0, -k * (incidence.distance + departure.distance));
            carriers.push(a_ur.entries.iter().map(|a| phase * a).collect());
            factors.push(model.far_sensor_factor(m)?);
        }
        Ok(Self {
            los,
            carriers,
            factors,
            gains: model.sensors.iter().map(|s| s.gain).collect(),
        })
    }

    pub fn unit_pilot_response(&self, codes: &FastVaryingCode, t: usize, u: usize) -> Complex64 {
        let mut nu = self.los[u];
        for m in 0..self.factors.len() {
            nu += codes.get(t, m) * self.gains[m] * self.carriers[m][u] * self.factors[m];
        }
        nu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{dft_code_assignment, random_phase_profile};
    use crate::geometry::{element_positions, square_fraunhofer_distance, EulerAngles};

    const LAMBDA: f64 = 0.003;

    fn numerology(symbols: usize, subcarriers: usize) -> OfdmNumerology {
        OfdmNumerology::new(
            SPEED_OF_LIGHT / LAMBDA,
            subcarriers,
            120e3,
            symbols,
            0.2,
            dbm_to_watts(-174.0),
        )
        .unwrap()
    }

    fn wrap(p: f64) -> f64 {
        crate::geometry::wrap_angle(p)
    }

    #[test]
    fn numerology_is_consistent() {
        let num = numerology(16, 256);
        assert!((num.wavelength() * num.carrier_hz() / SPEED_OF_LIGHT - 1.0).abs() < 1e-12);
        assert!((num.pilot_magnitude().powi(2) * 256.0 - 0.2).abs() < 1e-15);
        assert!(OfdmNumerology::new(1e9, 0, 1.0, 1, 1.0, 1.0).is_err());
        assert!(OfdmNumerology::new(1e9, 1, 1.0, 1, 1.0, -1.0).is_err());
    }

    #[test]
    fn full_wavelength_gives_unit_phase() {
        let v = near_field_steering(&Vec3::zeros(), &[Vec3::new(LAMBDA, 0.0, 0.0)], LAMBDA).unwrap();
        assert!((v.entries[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn near_field_rejects_coincident_source() {
        let err = near_field_steering(&Vec3::x(), &[Vec3::zeros(), Vec3::x()], LAMBDA).unwrap_err();
        assert_eq!(err, ChannelError::CoincidentElement(1));
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let layout = ArrayLayout::square(0.03, LAMBDA / 2.0).unwrap();
        let pose = Pose::new(
            Vec3::new(2.0, 2.0, 4.0),
            EulerAngles::new(0.1, 0.2, 0.1).unwrap(),
        );
        let elements = element_positions(&layout, &pose);
        let near = near_field_steering(&Vec3::new(0.0, 0.0, 4.0), &elements, LAMBDA).unwrap();
        let dir = direction_between(&Vec3::new(0.0, 0.0, 4.0), &pose.position).unwrap();
        let far = far_field_steering(&dir, layout.offsets(), LAMBDA);
        for e in near.entries.iter().chain(&far.entries) {
            assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_field_phase_is_reciprocal() {
        let a = Vec3::new(0.1, -0.3, 2.0);
        let b = Vec3::new(1.7, 0.4, 3.9);
        let ab = near_field_steering(&a, &[b], LAMBDA).unwrap();
        let ba = near_field_steering(&b, &[a], LAMBDA).unwrap();
        assert!((ab.entries[0] - ba.entries[0]).norm() < 1e-12);
    }

    #[test]
    fn far_field_special_cases() {
        let dir = direction_between(&Vec3::zeros(), &Vec3::new(0.3, 0.4, 0.5)).unwrap();
        let ones = far_field_steering(&dir, &[Vec3::zeros(); 5], LAMBDA);
        assert!(ones.entries.iter().all(|e| (e - 1.0).norm() < 1e-15));

        let broadside = direction_between(&Vec3::zeros(), &Vec3::z()).unwrap();
        let layout = ArrayLayout::square_with_count(4, LAMBDA / 2.0, 2.0 * LAMBDA);
        let v = far_field_steering(&broadside, layout.offsets(), LAMBDA);
        assert!(v.entries.iter().all(|e| (e - 1.0).norm() < 1e-12));

        let endfire = direction_between(&Vec3::zeros(), &Vec3::x()).unwrap();
        let offsets: Vec<Vec3> = (0..6).map(|i| Vec3::new(i as f64 * LAMBDA / 2.0, 0.0, 0.0)).collect();
        let v = far_field_steering(&endfire, &offsets, LAMBDA);
        for (i, e) in v.entries.iter().enumerate() {
            let expected = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((e - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn near_field_converges_to_far_field_steering() {
        let layout = ArrayLayout::square_with_count(4, LAMBDA / 2.0, 2.0 * LAMBDA);
        let d_f = square_fraunhofer_distance(layout.side_length(), LAMBDA).unwrap();
        let centroid = Vec3::new(0.2, -0.1, 0.3);
        let source = centroid + Vec3::new(0.6, 0.64, 0.48) * (1000.0 * d_f);
        let elements: Vec<Vec3> = layout.offsets().iter().map(|s| centroid + s).collect();
        let near = near_field_steering(&source, &elements, LAMBDA).unwrap();
        let dir = direction_between(&source, &centroid).unwrap();
        let far = far_field_steering(&dir, layout.offsets(), LAMBDA);
        let common = -TAU * dir.distance / LAMBDA;
        for (n, f) in near.entries.iter().zip(&far.entries) {
            let diff = wrap(n.arg() - f.arg() - common);
            assert!(diff.abs() < 1e-3, "{diff}");
        }
    }

    #[test]
    fn pathloss_examples() {
        let g = pathloss_gain(1.0, 1.0, 0.003, 100.0, 100.0, 0.285).unwrap();
        assert!((g - 9e-6 * 100.0 / (32.0 * PI)).abs() < 1e-18);
        assert!((g - 8.952e-6).abs() < 1e-9);
        let half = pathloss_gain(1.0, 1.0, 0.0015, 100.0, 100.0, 0.285).unwrap();
        assert!((half / g - 0.25).abs() < 1e-12);
        let mut last = g;
        for i in 1..10 {
            let d = 1.0 + 0.3 * i as f64;
            let a = pathloss_gain(d, 1.0, 0.003, 100.0, 100.0, 0.285).unwrap();
            let b = pathloss_gain(1.0, d, 0.003, 100.0, 100.0, 0.285).unwrap();
            assert!(a < last && b < last);
            last = a;
        }
        assert!(pathloss_gain(0.0, 1.0, 0.003, 1.0, 1.0, 0.2).is_err());
        assert!(pathloss_gain(1.0, -1.0, 0.003, 1.0, 1.0, 0.2).is_err());
    }

    fn single_element_model(regime: Regime, beta0: Complex64, beta1: Complex64, theta: f64) -> SignalModel {
        let sensor = RisSensor::new(
            ArrayLayout::point(),
            Pose::at(Vec3::new(2.0, 2.0, 4.0)),
            SlowVaryingProfile::from_phases(vec![theta]).unwrap(),
            beta1,
        )
        .unwrap();
        let rx = Receiver::new(Vec3::new(2.0, 3.0, 4.0), ArrayLayout::point()).unwrap();
        SignalModel::new(numerology(2, 4), Vec3::new(0.0, 0.0, 4.0), rx, vec![sensor], beta0, regime).unwrap()
    }

    #[test]
    fn zero_gains_give_zero_signal() {
        let model = single_element_model(Regime::Near, Complex64::default(), Complex64::default(), 0.3);
        let codes = dft_code_assignment(1, 2).unwrap();
        for t in 0..2 {
            for n in 0..4 {
                assert_eq!(model.noise_free_signal(&codes, t, 0, n).unwrap(), Complex64::default());
            }
        }
        let far = model.with_regime(Regime::Far);
        assert!(far.far_field_signal(&codes, 1, 2).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn los_only_unit_gain_passes_pilot() {
        // transmitter an integer number of wavelengths away gives τ-phase 1
        let num = numerology(1, 8);
        let rx = Receiver::new(Vec3::new(0.0, 0.0, 1000.0 * LAMBDA), ArrayLayout::point()).unwrap();
        let model = SignalModel::new(num.clone(), Vec3::zeros(), rx, vec![], Complex64::new(1.0, 0.0), Regime::Near).unwrap();
        let codes = FastVaryingCode::from_values(1, 0, vec![]).unwrap();
        for n in 0..8 {
            let mu = model.noise_free_signal(&codes, 0, 0, n).unwrap();
            assert!((mu - num.pilot(n)).norm() < 1e-9 * num.pilot_magnitude());
        }
    }

    #[test]
    fn single_element_hand_evaluation() {
        let beta0 = Complex64::new(0.7, -0.2);
        let beta1 = Complex64::new(-0.4, 0.9);
        let theta = 1.3;
        let model = single_element_model(Regime::Near, beta0, beta1, theta);
        let codes = dft_code_assignment(1, 2).unwrap();
        let k = TAU / model.numerology().wavelength();
        let d0 = (Vec3::new(2.0, 3.0, 4.0) - Vec3::new(0.0, 0.0, 4.0)).norm();
        let d1 = 8f64.sqrt();
        let d2 = 1.0;
        for t in 0..2 {
            let x = model.numerology().pilot(0);
            let expected = beta0 * Complex64::from_polar(1.0, -k * d0) * x
                + codes.get(t, 0)
                    * beta1
                    * Complex64::from_polar(1.0, -k * d1)
                    * Complex64::from_polar(1.0, theta)
                    * Complex64::from_polar(1.0, -k * d2)
                    * x;
            let mu = model.noise_free_signal(&codes, t, 0, 0).unwrap();
            assert!((mu - expected).norm() < 1e-12 * expected.norm(), "{mu} vs {expected}");
        }
    }

    #[test]
    fn degenerate_far_model_matches_near_model() {
        let beta0 = Complex64::new(0.7, -0.2);
        let beta1 = Complex64::new(-0.4, 0.9);
        let near = single_element_model(Regime::Near, beta0, beta1, 0.4);
        let far = near.with_regime(Regime::Far);
        let codes = dft_code_assignment(1, 2).unwrap();
        for t in 0..2 {
            for n in 0..4 {
                let a = near.noise_free_signal(&codes, t, 0, n).unwrap();
                let b = far.far_field_signal(&codes, t, n).unwrap()[0];
                assert!((a - b).norm() < 1e-12 * a.norm());
            }
        }
    }

    #[test]
    fn index_and_regime_errors() {
        let model = single_element_model(Regime::Near, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 0.0);
        let codes = dft_code_assignment(1, 2).unwrap();
        assert!(matches!(
            model.noise_free_signal(&codes, 2, 0, 0),
            Err(ChannelError::IndexOutOfRange { what: "symbol", .. })
        ));
        assert!(matches!(
            model.noise_free_signal(&codes, 0, 1, 0),
            Err(ChannelError::IndexOutOfRange { what: "antenna", .. })
        ));
        assert!(matches!(
            model.noise_free_signal(&codes, 0, 0, 4),
            Err(ChannelError::IndexOutOfRange { what: "subcarrier", .. })
        ));
        assert!(matches!(
            model.far_field_signal(&codes, 0, 0),
            Err(ChannelError::RegimeMismatch { .. })
        ));
    }

    fn seeded_model(regime: Regime, rx_distance: f64) -> (SignalModel, FastVaryingCode) {
        let lambda = LAMBDA;
        let layout = ArrayLayout::square_with_count(4, lambda / 2.0, 2.0 * lambda);
        let mk = |pos: Vec3, ang: [f64; 3], seed: u64, gain: Complex64| {
            RisSensor::new(
                layout.clone(),
                Pose::new(pos, EulerAngles::from_array(ang).unwrap()),
                random_phase_profile(seed, layout.len()).unwrap(),
                gain,
            )
            .unwrap()
        };
        let sensors = vec![
            mk(Vec3::new(2.0, 2.0, 4.0), [0.1, 0.2, 0.1], 1, Complex64::new(0.3, 0.8)),
            mk(Vec3::new(2.0, 2.3, 4.0), [0.15, 0.12, 0.1], 2, Complex64::new(-0.5, 0.1)),
        ];
        let rx_layout = ArrayLayout::linear(4, lambda / 2.0, Vec3::x()).unwrap();
        let dir = Vec3::new(0.0, 1.0, 0.2).normalize();
        let rx = Receiver::new(Vec3::new(2.0, 2.0, 4.0) + dir * rx_distance, rx_layout).unwrap();
        let tx_dir = Vec3::new(-1.0, -1.0, 0.1).normalize();
        let tx_distance = rx_distance.max(8f64.sqrt());
        let model = SignalModel::new(
            numerology(4, 3),
            Vec3::new(2.0, 2.0, 4.0) + tx_dir * tx_distance,
            rx,
            sensors,
            Complex64::new(0.2, -0.1),
            regime,
        )
        .unwrap();
        (model, dft_code_assignment(2, 4).unwrap())
    }

    #[test]
    fn signal_block_matches_scalar_evaluators() {
        let (near, codes) = seeded_model(Regime::Near, 1.0);
        let block = near.signal_block(&codes).unwrap();
        let far = near.with_regime(Regime::Far);
        let far_block = far.signal_block(&codes).unwrap();
        let (nu, nn) = (near.receiver().len(), near.numerology().subcarriers());
        for t in 0..4 {
            let far_samples: Vec<Vec<Complex64>> =
                (0..nn).map(|n| far.far_field_signal(&codes, t, n).unwrap()).collect();
            for u in 0..nu {
                for n in 0..nn {
                    let idx = (t * nu + u) * nn + n;
                    let a = near.noise_free_signal(&codes, t, u, n).unwrap();
                    assert!((block[idx] - a).norm() <= 1e-14 * a.norm().max(1.0));
                    assert!((far_block[idx] - far_samples[n][u]).norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn near_signal_is_linear_in_gains_and_pilot() {
        let (model, codes) = seeded_model(Regime::Near, 1.0);
        let base = model.signal_block(&codes).unwrap();
        let scaled_pilot = model.with_numerology(model.numerology().with_subcarriers(3).with_noise_psd(1.0));
        assert_eq!(scaled_pilot.signal_block(&codes).unwrap(), base);
        let s = Complex64::new(2.5, -1.0);
        let sensors: Vec<RisSensor> = model.sensors().iter().map(|x| x.with_gain(x.gain() * s)).collect();
        let mut scaled = model.with_los_gain(model.los_gain() * s);
        for (m, sensor) in sensors.into_iter().enumerate() {
            scaled = scaled.with_sensor(m, sensor);
        }
        for (a, b) in scaled.signal_block(&codes).unwrap().iter().zip(&base) {
            assert!((a - b * s).norm() < 1e-13 * b.norm().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn far_model_matches_near_model_at_long_range() {
        let (probe, _) = seeded_model(Regime::Near, 1.0);
        let d_f = probe.fraunhofer_checks()[0].fraunhofer_distance;
        let (near, codes) = seeded_model(Regime::Near, 1000.0 * d_f.max(1.0));
        let far = near.with_regime(Regime::Far);
        let a = near.signal_block(&codes).unwrap();
        let b = far.signal_block(&codes).unwrap();
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-3 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn fraunhofer_checks_are_recorded() {
        let (model, _) = seeded_model(Regime::Near, 1.0);
        assert_eq!(model.fraunhofer_checks().len(), 2);
        for c in model.fraunhofer_checks() {
            assert!(c.fraunhofer_distance > 0.0);
        }
    }
}
