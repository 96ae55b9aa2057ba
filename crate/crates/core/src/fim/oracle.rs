use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::SignalModel;
use crate::codes::FastVaryingCode;

use super::{FimError, Jacobian, JacobianData, ParamVector};

/// Central-difference step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    /// meters
    pub position: f64,
    /// radians
    pub angle: f64,
    /// relative to the largest path-gain magnitude
    pub gain_rel: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            position: 1e-6,
            angle: 1e-6,
            gain_rel: 1e-3,
        }
    }
}

impl FdSteps {
    pub fn halved(&self) -> Self {
        Self {
            position: self.position / 2.0,
            angle: self.angle / 2.0,
            gain_rel: self.gain_rel / 2.0,
        }
    }
}

/// Central differences of [`SignalModel::signal_block`], parameter by parameter.
pub fn fd_oracle(
    model: &SignalModel,
    codes: &FastVaryingCode,
    params: &ParamVector,
    steps: FdSteps,
) -> Result<Jacobian, FimError> {
    let gain_scale = model
        .sensors()
        .iter()
        .map(|s| s.gain().norm())
        .chain(std::iter::once(model.los_gain().norm()))
        .fold(0.0, f64::max);
    let gain_scale = if gain_scale > 0.0 { gain_scale } else { 1.0 };
    let rows = model.numerology().symbols() * model.receiver().len() * model.numerology().subcarriers();
    let mut dense = DMatrix::<Complex64>::zeros(rows, params.len());
    for (k, label) in params.labels().iter().enumerate() {
        let h = if label.is_gain() {
            steps.gain_rel * gain_scale
        } else if label.is_orientation() {
            steps.angle
        } else {
            steps.position
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(FimError::Step {
                label: label.to_string(),
                step: h,
            });
        }
        let x = params.values()[k];
        let plus = params.apply(model, k, x + h).signal_block(codes)?;
        let minus = params.apply(model, k, x - h).signal_block(codes)?;
        for (row, (a, b)) in plus.iter().zip(&minus).enumerate() {
            dense[(row, k)] = (a - b) / (2.0 * h);
        }
    }
    Jacobian::new(
        params.labels().to_vec(),
        model.numerology().symbols(),
        model.receiver().len(),
        model.numerology().subcarriers(),
        JacobianData::Dense(dense),
    )
}

/// Per-column `‖a_k − b_k‖ / ‖a_k‖` (absolute when `a_k = 0`).
pub fn column_errors(reference: &Jacobian, candidate: &Jacobian) -> Result<Vec<f64>, FimError> {
    if reference.labels() != candidate.labels() || reference.rows() != candidate.rows() {
        return Err(FimError::Dimension("jacobians have different shapes".into()));
    }
    let a = reference.to_dense();
    let b = candidate.to_dense();
    Ok((0..reference.cols())
        .map(|k| {
            let diff = (a.column(k) - b.column(k)).norm();
            let norm = a.column(k).norm();
            if norm > 0.0 {
                diff / norm
            } else {
                diff
            }
        })
        .collect())
}
