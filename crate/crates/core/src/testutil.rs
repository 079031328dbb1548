//! Shared fixtures for unit tests.

use alloc::vec;
use core::f64::consts::PI;

use nalgebra::Vector3;

use crate::chain::{Joint, JointKind, JointLimits, KinematicChain};

/// Two revolute z-axis joints with unit-x link offsets; tip one more unit
/// along x. Reach 2 m, dof 2.
pub(crate) fn planar_two_link() -> KinematicChain {
    let limits = JointLimits::new(-PI, PI).unwrap();
    KinematicChain::new(
        "planar2",
        vec![
            Joint::new(
                "shoulder",
                JointKind::Revolute,
                Vector3::zeros(),
                Vector3::zeros(),
                Vector3::z(),
                Some(limits),
                false,
            )
            .unwrap(),
            Joint::new(
                "elbow",
                JointKind::Revolute,
                Vector3::x(),
                Vector3::zeros(),
                Vector3::z(),
                Some(limits),
                false,
            )
            .unwrap(),
            Joint::new(
                "tip",
                JointKind::Fixed,
                Vector3::x(),
                Vector3::zeros(),
                Vector3::x(),
                None,
                false,
            )
            .unwrap(),
        ],
    )
}

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

/// Desk-scale 5-DOF arm mirroring the packaged fixture: yaw base, three
/// pitch joints, a roll wrist whose axis carries the tool, plus a masked
/// prismatic syringe joint and a fixed tip mount. Links extend along local
/// +z; pitch joints rotate about local +y. Limits keep the workspace a
/// forward dome so the mid-range-seeded numerical solver converges.
pub(crate) fn five_dof_arm() -> KinematicChain {
    let joint = |name: &str, xyz: Vector3<f64>, axis: Vector3<f64>, lo: f64, hi: f64| {
        Joint::new(
            name,
            JointKind::Revolute,
            xyz,
            Vector3::zeros(),
            axis,
            Some(JointLimits::new(lo, hi).unwrap()),
            false,
        )
        .unwrap()
    };
    KinematicChain::new(
        "arm5",
        vec![
            joint(
                "base_yaw",
                Vector3::new(0.0, 0.0, 0.05),
                Vector3::z(),
                deg(-90.0),
                deg(90.0),
            ),
            joint(
                "shoulder_pitch",
                Vector3::new(0.0, 0.0, 0.05),
                Vector3::y(),
                deg(60.0),
                deg(160.0),
            ),
            joint(
                "elbow_pitch",
                Vector3::new(0.0, 0.0, 0.12),
                Vector3::y(),
                deg(-90.0),
                deg(0.0),
            ),
            joint(
                "wrist_pitch",
                Vector3::new(0.0, 0.0, 0.12),
                Vector3::y(),
                deg(-45.0),
                deg(45.0),
            ),
            joint(
                "wrist_roll",
                Vector3::new(0.0, 0.0, 0.03),
                Vector3::z(),
                deg(45.0),
                deg(225.0),
            ),
            Joint::new(
                "syringe_drive",
                JointKind::Prismatic,
                Vector3::new(0.0, 0.0, 0.04),
                Vector3::zeros(),
                Vector3::z(),
                Some(JointLimits::new(0.0, 0.04).unwrap()),
                true,
            )
            .unwrap(),
            Joint::new(
                "tip_mount",
                JointKind::Fixed,
                Vector3::new(0.0, 0.0, 0.05),
                Vector3::zeros(),
                Vector3::x(),
                None,
                false,
            )
            .unwrap(),
        ],
    )
}
