//! mdn-ik-core — learned inverse kinematics for serial-chain manipulators.
//!
//! The crate covers the full desk-scale vision-to-action stack:
//!
//! 1. **transform / chain** – rigid transforms, serial kinematic chains,
//!    forward kinematics and translational Jacobians.
//! 2. **sampling** – deterministic uniform joint sampling and FK dataset
//!    generation.
//! 3. **mdn** – a mixture density network mapping end-effector translation
//!    to a Gaussian mixture over joint space, trained from scratch with
//!    Adam on the mixture negative log-likelihood.
//! 4. **dls** – a damped-least-squares numerical IK solver used as an
//!    independent reference for the learned model.
//! 5. **vision** – threshold/Otsu segmentation, connected-component blob
//!    extraction, mask metrics and pinhole back-projection.
//! 6. **calib** – per-joint affine calibration between model joint space
//!    and integer-degree servo commands, plus the serial wire grammar.
//!
//! Everything here is pure computation over in-memory data: the crate is
//! `no_std` (with `alloc`) and all operations are deterministic given their
//! seeds. File formats, timing and the CLI live in the companion `mdn-ik`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calib;
pub mod chain;
pub mod dls;
pub mod mdn;
pub mod sampling;
pub mod transform;
pub mod vision;

#[cfg(test)]
pub(crate) mod testutil;

pub use chain::{
    forward_kinematics, jacobian, ChainError, Joint, JointConfig, JointKind, JointLimits,
    KinematicChain,
};
pub use sampling::{generate_dataset, sample_config, IkDataset, IkSample, SampleRng};
pub use transform::RigidTransform;
