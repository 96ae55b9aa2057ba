use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::channel::{far_field_steering, ChannelError, Regime, SignalModel};
use crate::codes::FastVaryingCode;
use crate::geometry::{direction_between, rotation_derivative_axis, EulerAxis, Vec3};

use super::{FimError, Jacobian, JacobianData, ParamLabel, ParamVector, Scenario};

/// Source of signal Jacobians. The validation suite takes one of these so that
/// a deliberately broken implementation can be swapped in.
pub trait DerivativeProvider: Send + Sync {
    fn name(&self) -> &str;

    fn jacobian(
        &self,
        model: &SignalModel,
        codes: &FastVaryingCode,
        params: &ParamVector,
    ) -> Result<Jacobian, FimError>;
}

/// Closed-form derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyticDerivatives;

impl DerivativeProvider for AnalyticDerivatives {
    fn name(&self) -> &str {
        "analytic"
    }

    fn jacobian(
        &self,
        model: &SignalModel,
        codes: &FastVaryingCode,
        params: &ParamVector,
    ) -> Result<Jacobian, FimError> {
        analytic_jacobian(model, codes, params)
    }
}

fn require(
    model: &SignalModel,
    params: &ParamVector,
    regime: Regime,
    scenario: Scenario,
) -> Result<(), FimError> {
    if model.regime() != regime {
        return Err(ChannelError::RegimeMismatch {
            expected: regime,
            actual: model.regime(),
        }
        .into());
    }
    if params.scenario() != scenario {
        return Err(FimError::ScenarioMismatch {
            expected: scenario.as_str(),
            actual: params.scenario().as_str(),
        });
    }
    Ok(())
}

pub fn derivatives_scenario1_near(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
) -> Result<Jacobian, FimError> {
    require(model, params, Regime::Near, Scenario::Rest)?;
    analytic_jacobian(model, codes, params)
}

pub fn derivatives_scenario1_far(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
) -> Result<Jacobian, FimError> {
    require(model, params, Regime::Far, Scenario::Rest)?;
    analytic_jacobian(model, codes, params)
}

pub fn derivatives_scenario2_near(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
) -> Result<Jacobian, FimError> {
    require(model, params, Regime::Near, Scenario::Exercise)?;
    analytic_jacobian(model, codes, params)
}

pub fn derivatives_scenario2_far(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
) -> Result<Jacobian, FimError> {
    require(model, params, Regime::Far, Scenario::Exercise)?;
    analytic_jacobian(model, codes, params)
}

/// Per-antenna reflected response of one sensor and its geometric derivatives,
/// all without the code and gain factors.
struct PathTerms {
    response: Vec<Complex64>,
    d_orientation: Vec<[Complex64; 3]>,
    d_position: Vec<[Complex64; 3]>,
}

fn scale3(c: Complex64, v: &Vec3) -> [Complex64; 3] {
    [c * v.x, c * v.y, c * v.z]
}

fn add3(acc: &mut [Complex64; 3], rhs: [Complex64; 3]) {
    for (a, b) in acc.iter_mut().zip(rhs) {
        *a += b;
    }
}

/// `Q_i s̃_r` for the three Euler axes.
fn levers(model: &SignalModel, m: usize) -> Vec<[Vec3; 3]> {
    let sensor = &model.sensors()[m];
    let dq: [Matrix3<f64>; 3] =
        EulerAxis::ALL.map(|axis| rotation_derivative_axis(&sensor.pose().orientation, axis));
    sensor
        .layout()
        .offsets()
        .iter()
        .map(|s| [dq[0] * s, dq[1] * s, dq[2] * s])
        .collect()
}

/// Exact-distance model: `∂τ_r/∂p_R ∝ unit(p_r − p_B) + unit(p_r − p_u)`,
/// and the orientation gradient projects that onto `Q_i s̃_r`.
fn near_path_terms(model: &SignalModel, m: usize) -> Result<PathTerms, FimError> {
    let sensor = &model.sensors()[m];
    let k = model.numerology().wavenumber();
    let minus_jk = Complex64::new(0.0, -k);
    let tx = model.transmitter();
    let levers = levers(model, m);
    let mut incident = Vec::with_capacity(sensor.elements().len());
    for (r, (p, g)) in sensor
        .elements()
        .iter()
        .zip(sensor.profile().coefficients())
        .enumerate()
    {
        let diff = p - tx;
        let d = diff.norm();
        if d == 0.0 {
            return Err(ChannelError::CoincidentElement(r).into());
        }
        incident.push((g * Complex64::from_polar(1.0, -k * d), diff / d));
    }
    let antennas = model.receiver().antennas();
    let mut out = PathTerms {
        response: Vec::with_capacity(antennas.len()),
        d_orientation: Vec::with_capacity(antennas.len()),
        d_position: Vec::with_capacity(antennas.len()),
    };
    for pu in antennas {
        let mut h = Complex64::default();
        let mut d_phi = [Complex64::default(); 3];
        let mut d_pos = [Complex64::default(); 3];
        for ((p, (incoming, e_b)), lever) in sensor.elements().iter().zip(&incident).zip(&levers) {
            let diff = p - pu;
            let d = diff.norm();
            if d == 0.0 {
                return Err(ChannelError::CoincidentElement(0).into());
            }
            let c = incoming * Complex64::from_polar(1.0, -k * d);
            let grad = e_b + diff / d;
            h += c;
            add3(&mut d_pos, scale3(c, &grad));
            for i in 0..3 {
                d_phi[i] += c * grad.dot(&lever[i]);
            }
        }
        out.response.push(h);
        out.d_orientation.push(d_phi.map(|z| z * minus_jk));
        out.d_position.push(d_pos.map(|z| z * minus_jk));
    }
    Ok(out)
}

/// Plane-wave model: phases expanded to first order around the centroids.
///
/// With `w = Δ_BR − Δ_RU` and `v_r = Q s̃_r`, antenna `u` sees phase
/// `−k (d_BR + d_RU + Δ_RUᵀ s_u + wᵀ v_r)`; moving the sensor also rotates
/// both unit vectors, which gives the projector terms in `∂/∂p_R`.
fn far_path_terms(model: &SignalModel, m: usize) -> Result<PathTerms, FimError> {
    let sensor = &model.sensors()[m];
    let lambda = model.numerology().wavelength();
    let k = model.numerology().wavenumber();
    let minus_jk = Complex64::new(0.0, -k);
    let p_r = sensor.pose().position;
    let incidence = direction_between(model.transmitter(), &p_r).map_err(ChannelError::from)?;
    let departure =
        direction_between(&p_r, model.receiver().position()).map_err(ChannelError::from)?;
    let w = incidence.unit - departure.unit;
    let proj_br = (Matrix3::identity() - incidence.unit * incidence.unit.transpose()) / incidence.distance;
    let proj_ru = (Matrix3::identity() - departure.unit * departure.unit.transpose()) / departure.distance;
    let q = sensor.pose().rotation();
    let levers = levers(model, m);

    let mut g = Complex64::default();
    let mut g_phi = [Complex64::default(); 3];
    let mut g_pos = [Complex64::default(); 3];
    for ((s, gamma), lever) in sensor
        .layout()
        .offsets()
        .iter()
        .zip(sensor.profile().coefficients())
        .zip(&levers)
    {
        let v = q.apply(s);
        let e = gamma * Complex64::from_polar(1.0, -k * w.dot(&v));
        g += e;
        for i in 0..3 {
            g_phi[i] += e * w.dot(&lever[i]);
        }
        add3(&mut g_pos, scale3(e, &((proj_br + proj_ru) * v)));
    }
    let g_phi = g_phi.map(|z| z * minus_jk);

    let rx_offsets = model.receiver().layout().offsets();
    let a_ur = far_field_steering(&departure, rx_offsets, lambda);
    let carrier = Complex64::from_polar(1.0, -k * (incidence.distance + departure.distance));
    let mut out = PathTerms {
        response: Vec::with_capacity(rx_offsets.len()),
        d_orientation: Vec::with_capacity(rx_offsets.len()),
        d_position: Vec::with_capacity(rx_offsets.len()),
    };
    for (s_u, a) in rx_offsets.iter().zip(&a_ur.entries) {
        let c = carrier * a;
        let shift = w - proj_ru * s_u;
        let mut d_pos = scale3(g, &shift);
        add3(&mut d_pos, g_pos);
        out.response.push(c * g);
        out.d_orientation.push(g_phi.map(|z| z * c));
        out.d_position.push(d_pos.map(|z| z * c * minus_jk));
    }
    Ok(out)
}

fn los_terms(model: &SignalModel) -> Result<Vec<Complex64>, FimError> {
    match model.regime() {
        Regime::Near => (0..model.receiver().len())
            .map(|u| model.near_los_phase(u).map_err(FimError::from))
            .collect(),
        Regime::Far => {
            let k = model.numerology().wavenumber();
            let direct = direction_between(model.transmitter(), model.receiver().position())
                .map_err(ChannelError::from)?;
            let a_ub = far_field_steering(
                &direct,
                model.receiver().layout().offsets(),
                model.numerology().wavelength(),
            );
            let phase = Complex64::from_polar(1.0, -k * direct.distance);
            Ok(a_ub.entries.iter().map(|a| phase * a).collect())
        }
    }
}

/// Analytic Jacobian for any label set in the model's own regime.
pub fn analytic_jacobian(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
) -> Result<Jacobian, FimError> {
    if params.regime() != model.regime() {
        return Err(FimError::RegimeMismatch {
            params: params.regime(),
            model: model.regime(),
        });
    }
    model.check_codes(codes)?;
    let labels = params.labels();
    let sensors = model.sensors().len();
    let mut paths: Vec<Option<PathTerms>> = (0..sensors).map(|_| None).collect();
    for label in labels {
        if let Some(m) = label.sensor() {
            if paths[m].is_none() {
                paths[m] = Some(match model.regime() {
                    Regime::Near => near_path_terms(model, m)?,
                    Regime::Far => far_path_terms(model, m)?,
                });
            }
        }
    }
    let los = if labels.iter().any(|l| l.sensor().is_none()) {
        los_terms(model)?
    } else {
        Vec::new()
    };

    let symbols = model.numerology().symbols();
    let antennas = model.receiver().len();
    let j = Complex64::new(0.0, 1.0);
    let mut response = DMatrix::<Complex64>::zeros(symbols * antennas, labels.len());
    for (col, label) in labels.iter().enumerate() {
        for t in 0..symbols {
            for u in 0..antennas {
                let value = match *label {
                    ParamLabel::LosGainRe => los[u],
                    ParamLabel::LosGainIm => j * los[u],
                    ParamLabel::GainRe { sensor } => {
                        codes.get(t, sensor) * terms(&paths, sensor).response[u]
                    }
                    ParamLabel::GainIm { sensor } => {
                        j * codes.get(t, sensor) * terms(&paths, sensor).response[u]
                    }
                    ParamLabel::Orientation { sensor, axis } => {
                        codes.get(t, sensor)
                            * model.sensors()[sensor].gain()
                            * terms(&paths, sensor).d_orientation[u][axis.index() - 1]
                    }
                    ParamLabel::Position { sensor, axis } => {
                        codes.get(t, sensor)
                            * model.sensors()[sensor].gain()
                            * terms(&paths, sensor).d_position[u][axis]
                    }
                };
                response[(t * antennas + u, col)] = value;
            }
        }
    }
    Jacobian::new(
        labels.to_vec(),
        symbols,
        antennas,
        model.numerology().subcarriers(),
        JacobianData::Separable {
            response,
            pilots: model.numerology().pilots(),
        },
    )
}

fn terms(paths: &[Option<PathTerms>], m: usize) -> &PathTerms {
    paths[m].as_ref().expect("terms computed for every referenced sensor")
}
