//! The plate-to-command control loop.
//!
//! One run: segment the plate image, extract blobs, pick the largest,
//! back-project its centroid onto the plate plane, lift by the hover
//! offset, predict a joint configuration with the MDN, verify it through
//! forward kinematics, apply the servo calibration and write the wire
//! command to the sink. Every stage is timed; all timings stay out of the
//! machine-readable outputs so reruns are byte-identical. One run is
//! strictly stage-ordered; independent runs may execute concurrently since
//! the chain, model, calibration and camera are all immutable.

use std::io::Write;
use std::time::Instant;

use nalgebra::Vector3;

use mdn_ik_core::calib::{apply_calibration, invert_calibration, CalibrationMap};
use mdn_ik_core::chain::{forward_kinematics, JointConfig, KinematicChain};
use mdn_ik_core::mdn::MdnModel;
use mdn_ik_core::vision::{
    find_blobs, pixel_to_world, segment_threshold, CameraModel, ImageBuf, SegMask,
    SegmentSettings,
};

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

impl PipelineError {
    pub fn at(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            stage,
            message: err.to_string(),
        }
    }
}

/// Wall-clock stage durations, microseconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub segment_us: u128,
    pub blobs_us: u128,
    pub project_us: u128,
    pub predict_us: u128,
    pub calibrate_us: u128,
    pub total_us: u128,
}

/// Everything produced when a colony was found and commanded.
#[derive(Debug, Clone)]
pub struct TargetOutcome {
    /// Back-projected centroid of the chosen blob, on the plate plane.
    pub chosen_target_world: Vector3<f64>,
    /// The commanded goal: the target lifted by the hover offset.
    pub goal_world: Vector3<f64>,
    /// Raw MDN prediction clamped to the joint limits, radians.
    pub predicted_config: JointConfig,
    /// Tip position of the predicted (un-quantized) configuration.
    pub predicted_fk: Vector3<f64>,
    pub commanded_degrees: Vec<i32>,
    pub command_line: String,
    /// Tip position after quantization: FK of the inverse-calibrated
    /// command.
    pub achieved_position: Vector3<f64>,
    /// `|achieved - goal|` in millimeters.
    pub position_error_mm: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineRunReport {
    pub detected_blobs: usize,
    /// None when no colonies were detected (nothing was commanded).
    pub outcome: Option<TargetOutcome>,
    pub timings: StageTimings,
    pub seed: u64,
}

pub struct PipelineContext<'a> {
    pub chain: &'a KinematicChain,
    pub model: &'a MdnModel,
    pub map: &'a CalibrationMap,
    pub camera: &'a CameraModel,
    pub plane_z: f64,
    pub hover_m: f64,
    pub segmentation: SegmentSettings,
    pub min_area: usize,
    /// Recorded in the report; reserved for stochastic target selectors.
    pub seed: u64,
}

impl PipelineContext<'_> {
    fn validate(&self) -> Result<(), PipelineError> {
        let dof = self.chain.dof();
        if self.model.config().output_dim != dof {
            return Err(PipelineError::at(
                "validate",
                format!(
                    "model dof {} does not match chain dof {dof}",
                    self.model.config().output_dim
                ),
            ));
        }
        if self.map.len() != dof {
            return Err(PipelineError::at(
                "validate",
                format!("calibration has {} joints, chain has {dof}", self.map.len()),
            ));
        }
        Ok(())
    }
}

/// Run the control loop once. Returns the report; the wire command (if
/// any) is written to `sink`. The segmentation mask is returned alongside
/// so callers can write debug overlays.
pub fn run_pipeline(
    image: &ImageBuf,
    ctx: &PipelineContext,
    sink: &mut dyn Write,
) -> Result<(PipelineRunReport, SegMask), PipelineError> {
    ctx.validate()?;
    let t_start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let mask =
        segment_threshold(image, &ctx.segmentation).map_err(|e| PipelineError::at("segment", e))?;
    timings.segment_us = t.elapsed().as_micros();

    let t = Instant::now();
    let blobs = find_blobs(&mask, ctx.min_area);
    timings.blobs_us = t.elapsed().as_micros();

    if blobs.is_empty() {
        timings.total_us = t_start.elapsed().as_micros();
        return Ok((
            PipelineRunReport {
                detected_blobs: 0,
                outcome: None,
                timings,
                seed: ctx.seed,
            },
            mask,
        ));
    }

    // Largest blob first (find_blobs sorts); one colony per cycle.
    let chosen = &blobs[0];

    let t = Instant::now();
    let target = pixel_to_world(ctx.camera, chosen.centroid.0, chosen.centroid.1, ctx.plane_z)
        .map_err(|e| PipelineError::at("back-project", e))?;
    let goal = target + Vector3::new(0.0, 0.0, ctx.hover_m);
    timings.project_us = t.elapsed().as_micros();

    let t = Instant::now();
    let raw_prediction = ctx
        .model
        .predict_config(&goal)
        .map_err(|e| PipelineError::at("predict", e))?;
    // Predictions may overshoot the limits slightly; command within them.
    let predicted = ctx
        .chain
        .clamped(&raw_prediction)
        .map_err(|e| PipelineError::at("predict", e))?;
    timings.predict_us = t.elapsed().as_micros();

    let predicted_fk = forward_kinematics(ctx.chain, &predicted)
        .map_err(|e| PipelineError::at("verify-fk", e))?
        .translation;

    let t = Instant::now();
    let command =
        apply_calibration(ctx.map, &predicted).map_err(|e| PipelineError::at("calibrate", e))?;
    let quantized = invert_calibration(ctx.map, &command.joint_degrees)
        .map_err(|e| PipelineError::at("calibrate", e))?;
    let achieved = forward_kinematics(ctx.chain, &quantized)
        .map_err(|e| PipelineError::at("calibrate", e))?
        .translation;
    timings.calibrate_us = t.elapsed().as_micros();

    sink.write_all(command.line.as_bytes())
        .map_err(|e| PipelineError::at("emit", e))?;

    timings.total_us = t_start.elapsed().as_micros();
    let position_error_mm = (achieved - goal).norm() * 1000.0;
    Ok((
        PipelineRunReport {
            detected_blobs: blobs.len(),
            outcome: Some(TargetOutcome {
                chosen_target_world: target,
                goal_world: goal,
                predicted_config: predicted,
                predicted_fk,
                commanded_degrees: command.joint_degrees,
                command_line: command.line,
                achieved_position: achieved,
                position_error_mm,
            }),
            timings,
            seed: ctx.seed,
        },
        mask,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib_file::parse_calibration;
    use crate::urdf::parse_chain;
    use mdn_ik_core::calib::replay_serial;
    use mdn_ik_core::mdn::{train, MdnConfig, TrainSettings};
    use mdn_ik_core::sampling::generate_dataset;
    use mdn_ik_core::transform::RigidTransform;
    use mdn_ik_core::vision::{Polarity, ThresholdMethod};
    use std::f64::consts::PI;

    const PLANAR_XY: &str = r#"
        <robot name="planar_xy">
            <link name="a"/><link name="b"/><link name="c"/><link name="d"/>
            <joint name="shoulder" type="revolute">
                <parent link="a"/><child link="b"/><axis xyz="0 0 1"/>
                <limit lower="-3.141592653589793" upper="3.141592653589793"/>
            </joint>
            <joint name="elbow" type="revolute">
                <parent link="b"/><child link="c"/><origin xyz="0.1 0 0"/><axis xyz="0 0 1"/>
                <limit lower="-3.141592653589793" upper="3.141592653589793"/>
            </joint>
            <joint name="tip" type="fixed">
                <parent link="c"/><child link="d"/><origin xyz="0.1 0 0"/>
            </joint>
        </robot>
    "#;

    /// Planar 2-link in the z=0 plane, camera overhead, a trained model.
    fn setup() -> (
        mdn_ik_core::chain::KinematicChain,
        MdnModel,
        CalibrationMap,
        CameraModel,
    ) {
        let chain = parse_chain(PLANAR_XY).unwrap();
        let dataset = generate_dataset(&chain, 2000, 5).unwrap();
        let settings = TrainSettings {
            epochs: 60,
            batch_size: 128,
            seed: 5,
            ..TrainSettings::default()
        };
        let config = MdnConfig {
            input_dim: 3,
            hidden_layers: 2,
            hidden_width: 32,
            components: 3,
            output_dim: 2,
            seed: 5,
        };
        let (model, _) = train(&dataset, config, &settings).unwrap();
        let map = parse_calibration("+1 180 0 360\n+1 180 0 360\n").unwrap();
        let camera = CameraModel::new(
            400.0,
            400.0,
            80.0,
            60.0,
            RigidTransform::from_xyz_rpy(
                nalgebra::Vector3::new(0.1, 0.0, 0.4),
                nalgebra::Vector3::new(PI, 0.0, 0.0),
            ),
        )
        .unwrap();
        (chain, model, map, camera)
    }

    fn disk_image(w: u32, h: u32, cx: f64, cy: f64, radius: f64) -> ImageBuf {
        let mut data = vec![10u8; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= radius * radius {
                    data[(y * w + x) as usize] = 230;
                }
            }
        }
        ImageBuf::gray(w, h, data).unwrap()
    }

    fn context<'a>(
        chain: &'a mdn_ik_core::chain::KinematicChain,
        model: &'a MdnModel,
        map: &'a CalibrationMap,
        camera: &'a CameraModel,
    ) -> PipelineContext<'a> {
        PipelineContext {
            chain,
            model,
            map,
            camera,
            plane_z: 0.0,
            hover_m: 0.0,
            segmentation: SegmentSettings {
                method: ThresholdMethod::Fixed(128),
                polarity: Polarity::Bright,
            },
            min_area: 4,
            seed: 11,
        }
    }

    #[test]
    fn blank_plate_emits_nothing() {
        let (chain, model, map, camera) = setup();
        let ctx = context(&chain, &model, &map, &camera);
        let image = ImageBuf::gray(160, 120, vec![10; 160 * 120]).unwrap();
        let mut sink = Vec::new();
        let (report, _) = run_pipeline(&image, &ctx, &mut sink).unwrap();
        assert_eq!(report.detected_blobs, 0);
        assert!(report.outcome.is_none());
        assert!(sink.is_empty());
    }

    #[test]
    fn detected_disk_produces_a_consistent_command() {
        let (chain, model, map, camera) = setup();
        let ctx = context(&chain, &model, &map, &camera);
        let image = disk_image(160, 120, 95.0, 60.0, 7.0);
        let mut sink = Vec::new();
        let (report, _) = run_pipeline(&image, &ctx, &mut sink).unwrap();
        assert_eq!(report.detected_blobs, 1);
        let outcome = report.outcome.expect("one colony");

        // Pixel (95, 60) back-projects to x = 0.1 + 0.4*15/400, y = 0.
        assert!((outcome.chosen_target_world.x - 0.115).abs() < 1e-9);
        assert!(outcome.chosen_target_world.y.abs() < 1e-9);

        // The emitted line is exactly the command in the report.
        assert_eq!(String::from_utf8(sink).unwrap(), outcome.command_line);

        // Error field is consistent with recomputing FK of the command.
        let replayed = replay_serial(&chain, &map, &outcome.command_line).unwrap();
        assert_eq!(replayed.len(), 1);
        assert_eq!(replayed[0], outcome.achieved_position);
        let recomputed = (outcome.achieved_position - outcome.goal_world).norm() * 1000.0;
        assert_eq!(recomputed, outcome.position_error_mm);

        // The trained model puts the tip near the target (loose desk bound
        // for this small smoke model).
        assert!(
            outcome.position_error_mm < 30.0,
            "error {} mm",
            outcome.position_error_mm
        );
    }

    #[test]
    fn reruns_are_byte_identical() {
        let (chain, model, map, camera) = setup();
        let ctx = context(&chain, &model, &map, &camera);
        let image = disk_image(160, 120, 70.0, 48.0, 6.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let (ra, _) = run_pipeline(&image, &ctx, &mut a).unwrap();
        let (rb, _) = run_pipeline(&image, &ctx, &mut b).unwrap();
        assert_eq!(a, b);
        let (oa, ob) = (ra.outcome.unwrap(), rb.outcome.unwrap());
        assert_eq!(oa.commanded_degrees, ob.commanded_degrees);
        assert_eq!(oa.position_error_mm, ob.position_error_mm);
        assert_eq!(oa.achieved_position, ob.achieved_position);
    }

    #[test]
    fn dof_mismatch_is_a_stage_tagged_error() {
        let (chain, model, _, camera) = setup();
        let short_map = parse_calibration("+1 180 0 360\n").unwrap();
        let ctx = PipelineContext {
            map: &short_map,
            ..context(&chain, &model, &short_map, &camera)
        };
        let image = disk_image(160, 120, 70.0, 48.0, 6.0);
        let err = run_pipeline(&image, &ctx, &mut Vec::new()).unwrap_err();
        assert_eq!(err.stage, "validate");
    }
}
