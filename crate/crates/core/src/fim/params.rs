use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::channel::{Regime, SignalModel};
use crate::geometry::{EulerAngles, EulerAxis, Pose};

use super::FimError;

/// Which limb state is being bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Sensor positions known, orientations unknown.
    Rest,
    /// Positions and orientations unknown.
    Exercise,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Rest => "rest",
            Scenario::Exercise => "exercise",
        }
    }
}

/// One real unknown. Sensor indices are 0-based; names use 1-based path numbers
/// so that path 0 is the line-of-sight path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamLabel {
    LosGainRe,
    LosGainIm,
    GainRe { sensor: usize },
    GainIm { sensor: usize },
    Orientation { sensor: usize, axis: EulerAxis },
    Position { sensor: usize, axis: usize },
}

impl ParamLabel {
    /// Owning sensor, `None` for the line-of-sight gain.
    pub fn sensor(&self) -> Option<usize> {
        match *self {
            ParamLabel::LosGainRe | ParamLabel::LosGainIm => None,
            ParamLabel::GainRe { sensor }
            | ParamLabel::GainIm { sensor }
            | ParamLabel::Orientation { sensor, .. }
            | ParamLabel::Position { sensor, .. } => Some(sensor),
        }
    }

    pub fn is_gain(&self) -> bool {
        matches!(
            self,
            ParamLabel::LosGainRe
                | ParamLabel::LosGainIm
                | ParamLabel::GainRe { .. }
                | ParamLabel::GainIm { .. }
        )
    }

    pub fn is_orientation(&self) -> bool {
        matches!(self, ParamLabel::Orientation { .. })
    }

    pub fn is_position(&self) -> bool {
        matches!(self, ParamLabel::Position { .. })
    }

    pub fn orientations(sensor: usize) -> [ParamLabel; 3] {
        EulerAxis::ALL.map(|axis| ParamLabel::Orientation { sensor, axis })
    }

    pub fn positions(sensor: usize) -> [ParamLabel; 3] {
        [0, 1, 2].map(|axis| ParamLabel::Position { sensor, axis })
    }

    pub fn gains(sensor: usize) -> [ParamLabel; 2] {
        [ParamLabel::GainRe { sensor }, ParamLabel::GainIm { sensor }]
    }
}

impl fmt::Display for ParamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamLabel::LosGainRe => write!(f, "beta0_re"),
            ParamLabel::LosGainIm => write!(f, "beta0_im"),
            ParamLabel::GainRe { sensor } => write!(f, "beta{}_re", sensor + 1),
            ParamLabel::GainIm { sensor } => write!(f, "beta{}_im", sensor + 1),
            ParamLabel::Orientation { sensor, axis } => {
                write!(f, "phi{}_{}", sensor + 1, axis.short_name())
            }
            ParamLabel::Position { sensor, axis } => {
                write!(f, "p{}_{}", sensor + 1, ["x", "y", "z"][axis])
            }
        }
    }
}

/// Ordered, labeled real parameter vector read from a signal model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    scenario: Scenario,
    regime: Regime,
    labels: Vec<ParamLabel>,
    values: Vec<f64>,
}

impl ParamVector {
    /// `η = [β0_R, β0_I, Φ^[1], β^[1]_R, β^[1]_I, …]`.
    pub fn scenario1(model: &SignalModel) -> Self {
        let mut labels = vec![ParamLabel::LosGainRe, ParamLabel::LosGainIm];
        for m in 0..model.sensors().len() {
            labels.extend(ParamLabel::orientations(m));
            labels.extend(ParamLabel::gains(m));
        }
        Self::from_labels(model, Scenario::Rest, labels).expect("generated labels are unique")
    }

    /// Concatenated `κ^[m] = [p^[m], Φ^[m], β^[m]_R, β^[m]_I]`; the line-of-sight gain is not included.
    pub fn scenario2(model: &SignalModel) -> Self {
        let mut labels = Vec::new();
        for m in 0..model.sensors().len() {
            labels.extend(ParamLabel::positions(m));
            labels.extend(ParamLabel::orientations(m));
            labels.extend(ParamLabel::gains(m));
        }
        Self::from_labels(model, Scenario::Exercise, labels).expect("generated labels are unique")
    }

    pub fn from_labels(
        model: &SignalModel,
        scenario: Scenario,
        labels: Vec<ParamLabel>,
    ) -> Result<Self, FimError> {
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(*label) {
                return Err(FimError::DuplicateLabel(label.to_string()));
            }
            if let Some(m) = label.sensor() {
                if m >= model.sensors().len() {
                    return Err(FimError::UnknownLabel(label.to_string()));
                }
            }
        }
        let values = labels.iter().map(|l| read_value(model, l)).collect();
        Ok(Self {
            scenario,
            regime: model.regime(),
            labels,
            values,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn labels(&self) -> &[ParamLabel] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &ParamLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Copy of `model` with parameter `k` set to `value`.
    pub fn apply(&self, model: &SignalModel, k: usize, value: f64) -> SignalModel {
        write_value(model, &self.labels[k], value)
    }
}

fn read_value(model: &SignalModel, label: &ParamLabel) -> f64 {
    match *label {
        ParamLabel::LosGainRe => model.los_gain().re,
        ParamLabel::LosGainIm => model.los_gain().im,
        ParamLabel::GainRe { sensor } => model.sensors()[sensor].gain().re,
        ParamLabel::GainIm { sensor } => model.sensors()[sensor].gain().im,
        ParamLabel::Orientation { sensor, axis } => {
            model.sensors()[sensor].pose().orientation.get(axis)
        }
        ParamLabel::Position { sensor, axis } => model.sensors()[sensor].pose().position[axis],
    }
}

fn write_value(model: &SignalModel, label: &ParamLabel, value: f64) -> SignalModel {
    match *label {
        ParamLabel::LosGainRe => model.with_los_gain(Complex64::new(value, model.los_gain().im)),
        ParamLabel::LosGainIm => model.with_los_gain(Complex64::new(model.los_gain().re, value)),
        ParamLabel::GainRe { sensor } => {
            let s = &model.sensors()[sensor];
            model.with_sensor(sensor, s.with_gain(Complex64::new(value, s.gain().im)))
        }
        ParamLabel::GainIm { sensor } => {
            let s = &model.sensors()[sensor];
            model.with_sensor(sensor, s.with_gain(Complex64::new(s.gain().re, value)))
        }
        ParamLabel::Orientation { sensor, axis } => {
            let s = &model.sensors()[sensor];
            let mut angles = s.pose().orientation.to_array();
            angles[axis.index() - 1] = value;
            let orientation = EulerAngles::from_array(angles).expect("finite angle");
            model.with_sensor(sensor, s.with_pose(Pose::new(s.pose().position, orientation)))
        }
        ParamLabel::Position { sensor, axis } => {
            let s = &model.sensors()[sensor];
            let mut position = s.pose().position;
            position[axis] = value;
            model.with_sensor(sensor, s.with_pose(Pose::new(position, s.pose().orientation)))
        }
    }
}
