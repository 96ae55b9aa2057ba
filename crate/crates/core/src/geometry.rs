//! Positions, directions, rotations and array layouts.
//!
//! Rotations use the intrinsic Z-Y-X (yaw, pitch, roll) convention:
//!
//! ```text
//! Q(yaw, pitch, roll) = Rz(yaw) · Ry(pitch) · Rx(roll)
//! ```
//!
//! An orientation triple `[φ1, φ2, φ3]` from a configuration file maps to
//! `(yaw, pitch, roll)` in that order. Spherical angles of a direction follow
//! `unit = [cos φ sin θ, sin φ sin θ, cos θ]`, i.e. the elevation `θ` is
//! measured from the +z axis.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Point or displacement in the global frame, meters.
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate direction: points coincide")]
    DegenerateDirection,
    #[error("invalid rotation axis index {0} (expected 1..=3)")]
    InvalidAxis(usize),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// One of the three Euler angles. `index()` is 1-based: 1 = yaw (z),
/// 2 = pitch (y), 3 = roll (x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EulerAxis {
    Yaw,
    Pitch,
    Roll,
}

impl EulerAxis {
    pub const ALL: [EulerAxis; 3] = [EulerAxis::Yaw, EulerAxis::Pitch, EulerAxis::Roll];

    pub fn from_index(index: usize) -> Result<Self, GeometryError> {
        match index {
            1 => Ok(EulerAxis::Yaw),
            2 => Ok(EulerAxis::Pitch),
            3 => Ok(EulerAxis::Roll),
            other => Err(GeometryError::InvalidAxis(other)),
        }
    }

    pub fn index(self) -> usize {
        match self {
            EulerAxis::Yaw => 1,
            EulerAxis::Pitch => 2,
            EulerAxis::Roll => 3,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            EulerAxis::Yaw => "yaw",
            EulerAxis::Pitch => "pitch",
            EulerAxis::Roll => "roll",
        }
    }
}

/// Orientation angles in radians, each wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    yaw: f64,
    pitch: f64,
    roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Result<Self, GeometryError> {
        if !(yaw.is_finite() && pitch.is_finite() && roll.is_finite()) {
            return Err(GeometryError::NonFinite("euler angle"));
        }
        Ok(Self {
            yaw: wrap_angle(yaw),
            pitch: wrap_angle(pitch),
            roll: wrap_angle(roll),
        })
    }

    pub fn zero() -> Self {
        Self {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
        }
    }

    /// `[yaw, pitch, roll]`
    pub fn from_array(angles: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(angles[0], angles[1], angles[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.yaw, self.pitch, self.roll]
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    pub fn get(&self, axis: EulerAxis) -> f64 {
        match axis {
            EulerAxis::Yaw => self.yaw,
            EulerAxis::Pitch => self.pitch,
            EulerAxis::Roll => self.roll,
        }
    }

    /// Copy with one angle shifted by `delta` (re-wrapped).
    pub fn perturbed(&self, axis: EulerAxis, delta: f64) -> Self {
        let mut a = self.to_array();
        a[axis.index() - 1] += delta;
        Self {
            yaw: wrap_angle(a[0]),
            pitch: wrap_angle(a[1]),
            roll: wrap_angle(a[2]),
        }
    }
}

/// Proper rotation matrix (orthonormal, unit determinant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `max |QᵀQ − I|` and `|det Q − 1|`.
    pub fn orthonormality_residual(&self) -> (f64, f64) {
        let gram = self.0.transpose() * self.0 - Matrix3::identity();
        (gram.abs().max(), (self.0.determinant() - 1.0).abs())
    }
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn rotation_from_euler(angles: &EulerAngles) -> RotationMatrix {
    RotationMatrix(rot_z(angles.yaw) * rot_y(angles.pitch) * rot_x(angles.roll))
}

/// Analytic `∂Q/∂angle` for the 1-based `axis_index` (1 = yaw, 2 = pitch, 3 = roll).
pub fn rotation_derivative(
    angles: &EulerAngles,
    axis_index: usize,
) -> Result<Matrix3<f64>, GeometryError> {
    Ok(rotation_derivative_axis(angles, EulerAxis::from_index(axis_index)?))
}

pub fn rotation_derivative_axis(angles: &EulerAngles, axis: EulerAxis) -> Matrix3<f64> {
    let (y, p, r) = (angles.yaw, angles.pitch, angles.roll);
    match axis {
        EulerAxis::Yaw => d_rot_z(y) * rot_y(p) * rot_x(r),
        EulerAxis::Pitch => rot_z(y) * d_rot_y(p) * rot_x(r),
        EulerAxis::Roll => rot_z(y) * rot_y(p) * d_rot_x(r),
    }
}

/// Range, unit vector and spherical angles from one point to another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub distance: f64,
    pub unit: Vec3,
    /// φ, radians
    pub azimuth: f64,
    /// θ from the +z axis, radians
    pub elevation: f64,
}

impl Direction {
    /// Unit vector rebuilt from the spherical angles.
    pub fn unit_from_angles(&self) -> Vec3 {
        let (sp, cp) = self.azimuth.sin_cos();
        let (st, ct) = self.elevation.sin_cos();
        Vec3::new(cp * st, sp * st, ct)
    }
}

/// Direction pointing from `p` towards `q`.
pub fn direction_between(p: &Vec3, q: &Vec3) -> Result<Direction, GeometryError> {
    let diff = q - p;
    let distance = diff.norm();
    if !distance.is_finite() {
        return Err(GeometryError::NonFinite("direction"));
    }
    if distance == 0.0 {
        return Err(GeometryError::DegenerateDirection);
    }
    let unit = diff / distance;
    Ok(Direction {
        distance,
        unit,
        azimuth: unit.y.atan2(unit.x),
        elevation: unit.z.clamp(-1.0, 1.0).acos(),
    })
}

/// Start of the radiating far field, `2 D² / λ`.
pub fn fraunhofer_distance(aperture_diameter: f64, wavelength: f64) -> Result<f64, GeometryError> {
    if !(aperture_diameter > 0.0) {
        return Err(GeometryError::NonPositive {
            name: "aperture diameter",
            value: aperture_diameter,
        });
    }
    if !(wavelength > 0.0) {
        return Err(GeometryError::NonPositive {
            name: "wavelength",
            value: wavelength,
        });
    }
    Ok(2.0 * aperture_diameter * aperture_diameter / wavelength)
}

/// Fraunhofer distance of a square surface of side `side`, using its diagonal as aperture.
pub fn square_fraunhofer_distance(side: f64, wavelength: f64) -> Result<f64, GeometryError> {
    fraunhofer_distance(side * std::f64::consts::SQRT_2, wavelength)
}

/// Position plus orientation of an entity in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: EulerAngles,
}

impl Pose {
    pub fn new(position: Vec3, orientation: EulerAngles) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn at(position: Vec3) -> Self {
        Self::new(position, EulerAngles::zero())
    }

    pub fn rotation(&self) -> RotationMatrix {
        rotation_from_euler(&self.orientation)
    }
}

/// Local element offsets of a planar or linear array, centered on the array centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    offsets: Vec<Vec3>,
    side_length: f64,
    spacing: f64,
}

impl ArrayLayout {
    /// Square `per_side × per_side` grid in the local x–y plane.
    ///
    /// `per_side = round(side_length / spacing)`, at least 1.
    pub fn square(side_length: f64, spacing: f64) -> Result<Self, GeometryError> {
        if !(side_length > 0.0) {
            return Err(GeometryError::NonPositive {
                name: "side length",
                value: side_length,
            });
        }
        if !(spacing > 0.0) {
            return Err(GeometryError::NonPositive {
                name: "spacing",
                value: spacing,
            });
        }
        let per_side = ((side_length / spacing).round() as usize).max(1);
        Ok(Self::square_with_count(per_side, spacing, side_length))
    }

    /// Square grid with an explicit per-side count.
    pub fn square_with_count(per_side: usize, spacing: f64, side_length: f64) -> Self {
        let half = (per_side as f64 - 1.0) / 2.0;
        let mut offsets = Vec::with_capacity(per_side * per_side);
        for iy in 0..per_side {
            for ix in 0..per_side {
                offsets.push(Vec3::new(
                    (ix as f64 - half) * spacing,
                    (iy as f64 - half) * spacing,
                    0.0,
                ));
            }
        }
        Self {
            offsets,
            side_length,
            spacing,
        }
    }

    /// Uniform linear array of `count` elements along `axis`.
    ///
    /// Arrays of different sizes with the same spacing are nested: the
    /// positions of `count = k` are a subset of those of `count = 2k`.
    pub fn linear(count: usize, spacing: f64, axis: Vec3) -> Result<Self, GeometryError> {
        if count == 0 {
            return Err(GeometryError::NonPositive {
                name: "element count",
                value: 0.0,
            });
        }
        let norm = axis.norm();
        if !(norm > 0.0) {
            return Err(GeometryError::DegenerateDirection);
        }
        let axis = axis / norm;
        let half = (count as f64 - 1.0) / 2.0;
        let offsets = (0..count)
            .map(|i| axis * ((i as f64 - half) * spacing))
            .collect();
        Ok(Self {
            offsets,
            side_length: (count as f64 - 1.0) * spacing,
            spacing,
        })
    }

    /// Single element at the centroid.
    pub fn point() -> Self {
        Self {
            offsets: vec![Vec3::zeros()],
            side_length: 0.0,
            spacing: 0.0,
        }
    }

    /// Arbitrary offsets; they are not re-centered.
    pub fn from_offsets(offsets: Vec<Vec3>, spacing: f64) -> Self {
        let side_length = offsets
            .iter()
            .flat_map(|a| offsets.iter().map(move |b| (a - b).amax()))
            .fold(0.0, f64::max);
        Self {
            offsets,
            side_length,
            spacing,
        }
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn centroid(&self) -> Vec3 {
        if self.offsets.is_empty() {
            return Vec3::zeros();
        }
        self.offsets.iter().sum::<Vec3>() / self.offsets.len() as f64
    }
}

/// Global element positions `p + Q·s̃`.
pub fn element_positions(layout: &ArrayLayout, pose: &Pose) -> Vec<Vec3> {
    let q = pose.rotation();
    layout
        .offsets()
        .iter()
        .map(|s| pose.position + q.apply(s))
        .collect()
}
