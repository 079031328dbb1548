//! The pipeline run configuration, a TOML file of paths and parameters.
//!
//! Relative paths are resolved against the directory containing the
//! config file, so a packaged demo runs from anywhere.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;

use mdn_ik_core::transform::RigidTransform;
use mdn_ik_core::vision::{CameraModel, Polarity, SegmentSettings, ThresholdMethod};

#[derive(Debug, thiserror::Error)]
pub enum RunConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("bad config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    chain: PathBuf,
    model: PathBuf,
    calibration: PathBuf,
    image: PathBuf,
    /// Command sink: a file path, a serial device path, or "-" for stdout.
    commands_out: String,
    #[serde(default)]
    report_csv_out: Option<PathBuf>,
    #[serde(default)]
    overlay_out: Option<PathBuf>,
    plane_z: f64,
    #[serde(default)]
    hover_m: f64,
    #[serde(default = "default_min_area")]
    min_area: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    segmentation: RawSegmentation,
    camera: RawCamera,
}

fn default_min_area() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegmentation {
    #[serde(default = "default_method")]
    method: String,
    #[serde(default)]
    threshold: Option<u8>,
    #[serde(default = "default_polarity")]
    polarity: String,
}

impl Default for RawSegmentation {
    fn default() -> Self {
        Self {
            method: default_method(),
            threshold: None,
            polarity: default_polarity(),
        }
    }
}

fn default_method() -> String {
    "otsu".to_string()
}

fn default_polarity() -> String {
    "bright".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Camera position in the world frame, meters.
    position: [f64; 3],
    /// Camera orientation as fixed-axis roll-pitch-yaw, radians.
    rpy: [f64; 3],
}

/// A fully resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub chain: PathBuf,
    pub model: PathBuf,
    pub calibration: PathBuf,
    pub image: PathBuf,
    pub commands_out: String,
    pub report_csv_out: Option<PathBuf>,
    pub overlay_out: Option<PathBuf>,
    pub plane_z: f64,
    pub hover_m: f64,
    pub min_area: usize,
    pub seed: u64,
    pub segmentation: SegmentSettings,
    pub camera: CameraModel,
}

pub fn parse_run_config(text: &str, base_dir: &Path) -> Result<RunConfig, RunConfigError> {
    let raw: RawConfig = toml::from_str(text)?;

    let method = match raw.segmentation.method.as_str() {
        "otsu" => ThresholdMethod::Otsu,
        "fixed" => ThresholdMethod::Fixed(raw.segmentation.threshold.ok_or_else(|| {
            RunConfigError::Invalid(
                "segmentation.method = \"fixed\" requires segmentation.threshold".to_string(),
            )
        })?),
        other => {
            return Err(RunConfigError::Invalid(format!(
                "segmentation.method must be \"otsu\" or \"fixed\", found \"{other}\""
            )))
        }
    };
    let polarity = match raw.segmentation.polarity.as_str() {
        "bright" => Polarity::Bright,
        "dark" => Polarity::Dark,
        other => {
            return Err(RunConfigError::Invalid(format!(
                "segmentation.polarity must be \"bright\" or \"dark\", found \"{other}\""
            )))
        }
    };

    let pose = RigidTransform::from_xyz_rpy(
        Vector3::new(raw.camera.position[0], raw.camera.position[1], raw.camera.position[2]),
        Vector3::new(raw.camera.rpy[0], raw.camera.rpy[1], raw.camera.rpy[2]),
    );
    let camera = CameraModel::new(raw.camera.fx, raw.camera.fy, raw.camera.cx, raw.camera.cy, pose)
        .map_err(|e| RunConfigError::Invalid(format!("camera: {e}")))?;

    if !raw.plane_z.is_finite() || !raw.hover_m.is_finite() {
        return Err(RunConfigError::Invalid(
            "plane_z and hover_m must be finite".to_string(),
        ));
    }

    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };
    Ok(RunConfig {
        chain: resolve(&raw.chain),
        model: resolve(&raw.model),
        calibration: resolve(&raw.calibration),
        image: resolve(&raw.image),
        commands_out: if raw.commands_out == "-" {
            raw.commands_out
        } else {
            resolve(Path::new(&raw.commands_out)).display().to_string()
        },
        report_csv_out: raw.report_csv_out.as_deref().map(resolve),
        overlay_out: raw.overlay_out.as_deref().map(resolve),
        plane_z: raw.plane_z,
        hover_m: raw.hover_m,
        min_area: raw.min_area,
        seed: raw.seed,
        segmentation: SegmentSettings { method, polarity },
        camera,
    })
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig, RunConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_run_config(&text, base)
}
