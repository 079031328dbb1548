//! mdn-ik — file formats, pipeline orchestration and the command-line
//! interface for the learned-IK toolkit.
//!
//! The numeric core lives in `mdn-ik-core`; this crate adds everything
//! that touches the filesystem or the clock:
//!
//! - **urdf** – parse the URDF subset into a kinematic chain (and write
//!   it back out).
//! - **dataset_file** – the CSV dataset format.
//! - **model_file** – the versioned JSON model envelope.
//! - **pnm** – binary PGM/PPM images, mask IO and the centroid overlay
//!   writer.
//! - **calib_file** – the per-joint calibration map format.
//! - **run_config** – the TOML run configuration.
//! - **pipeline** – the image-to-serial-command control loop with
//!   per-stage timings.
//! - **report** – training, evaluation and pipeline report rendering.

pub mod calib_file;
pub mod dataset_file;
pub mod model_file;
pub mod pipeline;
pub mod pnm;
pub mod report;
pub mod run_config;
pub mod urdf;
