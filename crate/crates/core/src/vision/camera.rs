//! Pinhole camera model and reverse projection onto a horizontal plane.
//!
//! The camera frame follows the usual convention: +z looks forward, +x
//! right, +y down; `pose` places that frame in the world. A pixel defines
//! the ray `((u-cx)/fx, (v-cy)/fy, 1)` through the optical center, and the
//! reverse projection intersects it with the plane `z = plane_z`.

use nalgebra::Vector3;

use crate::transform::RigidTransform;

/// Rays closer than this to parallel with the target plane are rejected.
const PARALLEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CameraError {
    #[error("viewing ray is parallel to the target plane")]
    ParallelRay,
    #[error("intersection lies behind the camera")]
    BehindCamera,
    #[error("focal lengths must be positive")]
    BadIntrinsics,
    #[error("input is not finite")]
    NonFinite,
}

/// Intrinsics plus the camera-in-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera frame expressed in the world frame.
    pub pose: RigidTransform,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        pose: RigidTransform,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(CameraError::BadIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy, pose })
    }
}

/// Back-project pixel `(u, v)` onto the horizontal plane `z = plane_z`,
/// returning the world-frame intersection point.
pub fn pixel_to_world(
    camera: &CameraModel,
    u: f64,
    v: f64,
    plane_z: f64,
) -> Result<Vector3<f64>, CameraError> {
    if !(u.is_finite() && v.is_finite() && plane_z.is_finite()) {
        return Err(CameraError::NonFinite);
    }
    let dir_cam = Vector3::new((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
    let dir_world = camera.pose.rotation * dir_cam;
    let origin = camera.pose.translation;
    if dir_world.z.abs() < PARALLEL_TOL {
        return Err(CameraError::ParallelRay);
    }
    let s = (plane_z - origin.z) / dir_world.z;
    if s <= 0.0 {
        return Err(CameraError::BehindCamera);
    }
    Ok(origin + dir_world * s)
}

/// Project a world point into pixel coordinates.
pub fn world_to_pixel(camera: &CameraModel, point: &Vector3<f64>) -> Result<(f64, f64), CameraError> {
    if !point.iter().all(|v| v.is_finite()) {
        return Err(CameraError::NonFinite);
    }
    let p_cam = camera.pose.inverse().apply(point);
    if p_cam.z <= 0.0 {
        return Err(CameraError::BehindCamera);
    }
    Ok((
        camera.fx * p_cam.x / p_cam.z + camera.cx,
        camera.fy * p_cam.y / p_cam.z + camera.cy,
    ))
}
