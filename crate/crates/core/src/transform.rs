//! Rigid-body transforms: explicit 3×3 rotation matrix plus translation.
//!
//! Rotations are kept as plain matrices (not quaternions) so orthonormality
//! can be stated and checked entry-wise. Composition follows the usual
//! convention: `a * b` applies `b` first, then `a`.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

/// A proper rigid-body transform on ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    /// Orthonormal rotation matrix with determinant +1.
    pub rotation: Matrix3<f64>,
    /// Translation in meters.
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Build a transform from a translation and fixed-axis roll-pitch-yaw
    /// angles, composed as `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_xyz_rpy(xyz: Vector3<f64>, rpy: Vector3<f64>) -> Self {
        Self {
            rotation: rotation_rpy(rpy.x, rpy.y, rpy.z),
            translation: xyz,
        }
    }

    /// Pure rotation about a unit axis by `angle` radians (Rodrigues).
    pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_unchecked(*axis);
        Self {
            rotation: *Rotation3::from_axis_angle(&axis, angle).matrix(),
            translation: Vector3::zeros(),
        }
    }

    /// Pure translation of `distance` along a unit axis.
    pub fn translation_along(axis: &Vector3<f64>, distance: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: axis * distance,
        }
    }

    /// Apply the transform to a point: `R·p + t`.
    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Compose with another transform; `self.compose(&rhs)` applies `rhs`
    /// first, then `self`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl core::ops::Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

impl core::ops::Mul for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: Self) -> RigidTransform {
        self.compose(rhs)
    }
}

/// Fixed-axis roll-pitch-yaw rotation matrix, `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn rotation_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(roll, pitch, yaw).matrix()
}
