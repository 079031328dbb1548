//! Serial kinematic chains: joints, limits, forward kinematics, Jacobians.
//!
//! A [`KinematicChain`] is an ordered list of joints from the base link to
//! the tip link. Fixed joints and masked joints contribute only their
//! constant origin transform; the remaining joints are the chain's degrees
//! of freedom, in base-to-tip order.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3xX, Vector3};
use sha2::{Digest, Sha256};

use crate::transform::RigidTransform;

/// How close an axis norm must be to 1 to count as a unit vector.
pub const AXIS_UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("configuration has {got} values but chain has {expected} degrees of freedom")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("joint '{joint}': non-fixed joint is missing limits")]
    MissingLimits { joint: String },
    #[error("joint '{joint}': lower limit exceeds upper limit")]
    InvalidLimits { joint: String },
    #[error("joint '{joint}': axis is not a unit vector")]
    AxisNotUnit { joint: String },
    #[error("joint '{joint}': fixed joints carry no limits")]
    FixedWithLimits { joint: String },
    #[error("joint '{joint}': {field} is not finite")]
    NonFinite { joint: String, field: &'static str },
}

/// Joint articulation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    /// Rotation about the joint axis, radians.
    Revolute,
    /// Translation along the joint axis, meters.
    Prismatic,
    /// No articulation; only the origin transform applies.
    Fixed,
}

impl JointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        }
    }
}

/// Position limits of a single joint (radians, or meters for prismatic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn new(lower: f64, upper: f64) -> Option<Self> {
        (lower <= upper).then_some(Self { lower, upper })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

/// One joint of a serial chain.
///
/// The origin transform (parent-link frame to joint frame) is stored both as
/// the generating `xyz`/`rpy` parameters and as the composed
/// [`RigidTransform`]; keeping the parameters makes serialization and
/// fingerprinting exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    name: String,
    kind: JointKind,
    origin_xyz: Vector3<f64>,
    origin_rpy: Vector3<f64>,
    origin: RigidTransform,
    axis: Vector3<f64>,
    limits: Option<JointLimits>,
    /// Excluded from position control; contributes identity motion.
    masked: bool,
}

impl Joint {
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        origin_xyz: Vector3<f64>,
        origin_rpy: Vector3<f64>,
        axis: Vector3<f64>,
        limits: Option<JointLimits>,
        masked: bool,
    ) -> Result<Self, ChainError> {
        let name = name.into();
        for (vec, field) in [(&origin_xyz, "origin xyz"), (&origin_rpy, "origin rpy")] {
            if !vec.iter().all(|v| v.is_finite()) {
                return Err(ChainError::NonFinite {
                    joint: name,
                    field,
                });
            }
        }
        match kind {
            JointKind::Fixed => {
                if limits.is_some() {
                    return Err(ChainError::FixedWithLimits { joint: name });
                }
            }
            JointKind::Revolute | JointKind::Prismatic => {
                let norm = libm::sqrt(axis.dot(&axis));
                if !norm.is_finite() || (norm - 1.0).abs() > AXIS_UNIT_TOL {
                    return Err(ChainError::AxisNotUnit { joint: name });
                }
                match limits {
                    None => return Err(ChainError::MissingLimits { joint: name }),
                    Some(l) => {
                        if !l.lower.is_finite() || !l.upper.is_finite() {
                            return Err(ChainError::NonFinite {
                                joint: name,
                                field: "limits",
                            });
                        }
                        if l.lower > l.upper {
                            return Err(ChainError::InvalidLimits { joint: name });
                        }
                    }
                }
            }
        }
        let origin = RigidTransform::from_xyz_rpy(origin_xyz, origin_rpy);
        Ok(Self {
            name,
            kind,
            origin_xyz,
            origin_rpy,
            origin,
            axis,
            limits,
            masked,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> JointKind {
        self.kind
    }

    /// Parent-link frame to joint frame.
    pub fn origin(&self) -> &RigidTransform {
        &self.origin
    }

    pub fn origin_xyz(&self) -> Vector3<f64> {
        self.origin_xyz
    }

    pub fn origin_rpy(&self) -> Vector3<f64> {
        self.origin_rpy
    }

    /// Joint axis in the joint frame; unit length for non-fixed joints.
    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn limits(&self) -> Option<JointLimits> {
        self.limits
    }

    pub fn masked(&self) -> bool {
        self.masked
    }

    /// True when the joint contributes a degree of freedom.
    pub fn is_active(&self) -> bool {
        self.kind != JointKind::Fixed && !self.masked
    }

    /// Motion transform of the joint at position `q` (identity for fixed
    /// and masked joints).
    fn motion(&self, q: f64) -> RigidTransform {
        match self.kind {
            JointKind::Revolute => RigidTransform::rotation_about(&self.axis, q),
            JointKind::Prismatic => RigidTransform::translation_along(&self.axis, q),
            JointKind::Fixed => RigidTransform::identity(),
        }
    }
}

/// A configuration of the active joints, base-to-tip order.
///
/// Entries are radians for revolute joints and meters for prismatic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    pub values: Vec<f64>,
}

impl JointConfig {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// An ordered serial chain of joints from base to tip.
///
/// Immutable after construction and safe to share across threads; forward
/// kinematics and Jacobians are pure functions of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    joints: Vec<Joint>,
}

impl KinematicChain {
    pub fn new(name: impl Into<String>, joints: Vec<Joint>) -> Self {
        Self {
            name: name.into(),
            joints,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    /// Joints that contribute degrees of freedom, base-to-tip.
    pub fn active_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.is_active())
    }

    /// Number of degrees of freedom (non-fixed, non-masked joints).
    pub fn dof(&self) -> usize {
        self.active_joints().count()
    }

    /// Mid-range configuration of the active joints.
    pub fn mid_config(&self) -> JointConfig {
        JointConfig::new(
            self.active_joints()
                .map(|j| j.limits().expect("active joints carry limits").midpoint())
                .collect(),
        )
    }

    /// Clamp a configuration to the active joints' limits.
    pub fn clamped(&self, config: &JointConfig) -> Result<JointConfig, ChainError> {
        self.check_dof(config)?;
        Ok(JointConfig::new(
            self.active_joints()
                .zip(&config.values)
                .map(|(j, &q)| j.limits().expect("active joints carry limits").clamp(q))
                .collect(),
        ))
    }

    /// True when every entry lies within its joint's limits.
    pub fn within_limits(&self, config: &JointConfig) -> Result<bool, ChainError> {
        self.check_dof(config)?;
        Ok(self
            .active_joints()
            .zip(&config.values)
            .all(|(j, &q)| j.limits().expect("active joints carry limits").contains(q)))
    }

    /// Upper bound on the base-to-tip distance: the sum of consecutive
    /// origin offsets plus the maximum extension of active prismatic joints.
    pub fn max_reach(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| {
                let offset = libm::sqrt(j.origin_xyz.dot(&j.origin_xyz));
                let extension = match (j.kind, j.is_active(), j.limits) {
                    (JointKind::Prismatic, true, Some(l)) => l.lower.abs().max(l.upper.abs()),
                    _ => 0.0,
                };
                offset + extension
            })
            .sum()
    }

    /// Content hash of the chain definition: joint names, kinds, mask flags,
    /// origin parameters, axes and limits, hashed bit-exactly. Rendered as
    /// the first 16 hex digits of a SHA-256.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"mdn-ik chain v1\0");
        hash_str(&mut hasher, &self.name);
        hasher.update((self.joints.len() as u64).to_le_bytes());
        for joint in &self.joints {
            hash_str(&mut hasher, &joint.name);
            hasher.update([
                match joint.kind {
                    JointKind::Revolute => 0u8,
                    JointKind::Prismatic => 1,
                    JointKind::Fixed => 2,
                },
                joint.masked as u8,
            ]);
            for v in joint
                .origin_xyz
                .iter()
                .chain(joint.origin_rpy.iter())
                .chain(joint.axis.iter())
            {
                hasher.update(v.to_bits().to_le_bytes());
            }
            match joint.limits {
                Some(l) => {
                    hasher.update([1u8]);
                    hasher.update(l.lower.to_bits().to_le_bytes());
                    hasher.update(l.upper.to_bits().to_le_bytes());
                }
                None => hasher.update([0u8]),
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            push_hex(&mut out, *byte);
        }
        out
    }

    fn check_dof(&self, config: &JointConfig) -> Result<(), ChainError> {
        let expected = self.dof();
        if config.len() != expected {
            return Err(ChainError::DimensionMismatch {
                expected,
                got: config.len(),
            });
        }
        Ok(())
    }
}

fn hash_str(hasher: &mut Sha256, s: &str) {
    hasher.update((s.len() as u64).to_le_bytes());
    hasher.update(s.as_bytes());
}

fn push_hex(out: &mut String, byte: u8) {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    out.push(HEX[(byte >> 4) as usize] as char);
    out.push(HEX[(byte & 0xf) as usize] as char);
}

/// Base-frame pose of the tip for configuration `q`.
///
/// Revolute joints rotate about their axis by the corresponding entry,
/// prismatic joints translate along it; fixed and masked joints contribute
/// their constant origin transform only.
pub fn forward_kinematics(
    chain: &KinematicChain,
    q: &JointConfig,
) -> Result<RigidTransform, ChainError> {
    chain.check_dof(q)?;
    let mut pose = RigidTransform::identity();
    let mut qi = q.values.iter();
    for joint in chain.joints() {
        pose = pose.compose(joint.origin());
        if joint.is_active() {
            let &value = qi.next().expect("dof checked above");
            pose = pose.compose(&joint.motion(value));
        }
    }
    Ok(pose)
}

/// Translational Jacobian: column `i` is the derivative of the tip
/// translation with respect to active joint `i` (meters per radian, or
/// meters per meter for prismatic joints).
pub fn jacobian(chain: &KinematicChain, q: &JointConfig) -> Result<Matrix3xX<f64>, ChainError> {
    chain.check_dof(q)?;
    let dof = chain.dof();
    let mut axes_world = Vec::with_capacity(dof);
    let mut origins_world = Vec::with_capacity(dof);

    let mut pose = RigidTransform::identity();
    let mut qi = q.values.iter();
    for joint in chain.joints() {
        pose = pose.compose(joint.origin());
        if joint.is_active() {
            axes_world.push(pose.rotation * joint.axis());
            origins_world.push(pose.translation);
            let &value = qi.next().expect("dof checked above");
            pose = pose.compose(&joint.motion(value));
        }
    }
    let tip = pose.translation;

    let mut jac = Matrix3xX::zeros(dof);
    for (i, joint) in chain.active_joints().enumerate() {
        let column = match joint.kind() {
            JointKind::Revolute => axes_world[i].cross(&(tip - origins_world[i])),
            JointKind::Prismatic => axes_world[i],
            JointKind::Fixed => unreachable!("active joints are never fixed"),
        };
        jac.set_column(i, &column);
    }
    Ok(jac)
}
