//! Joint-space calibration and the serial command wire grammar.
//!
//! Model joint angles (radians) and servo command degrees live in
//! different frames: servo horns are mounted with flipped axes and shifted
//! zero references. The per-joint affine map `deg = sign·q·180/π + offset`
//! corrects for that, followed by rounding to the integer degrees hobby
//! servo controllers consume.
//!
//! Wire grammar, one command per line: `J <d0> <d1> ... <d{dof-1}>\n`,
//! ASCII decimal integers in degrees.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::chain::{forward_kinematics, ChainError, JointConfig, KinematicChain};

const DEG_PER_RAD: f64 = 180.0 / core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibError {
    #[error("calibration has {got} joints but configuration has {expected}")]
    DofMismatch { expected: usize, got: usize },
    #[error("joint {joint}: sign must be +1 or -1")]
    BadSign { joint: usize },
    #[error("joint {joint}: command range [{min_deg}, {max_deg}] is empty")]
    BadRange {
        joint: usize,
        min_deg: i32,
        max_deg: i32,
    },
    #[error(
        "joint {joint}: command {command} deg outside range [{min_deg}, {max_deg}] \
         (unreachable or miscalibrated pose)"
    )]
    OutOfRange {
        joint: usize,
        command: i64,
        min_deg: i32,
        max_deg: i32,
    },
    #[error("command line {line_no}: {reason}")]
    BadCommand { line_no: usize, reason: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Affine correction for one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCalibration {
    /// +1.0 or -1.0; -1.0 flips the servo axis.
    pub sign: f64,
    /// Zero-reference shift, degrees.
    pub offset_deg: f64,
    /// Lowest accepted command, degrees.
    pub min_deg: i32,
    /// Highest accepted command, degrees.
    pub max_deg: i32,
}

/// Per-joint calibration between model joint space and servo command
/// space, base-to-tip order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    joints: Vec<JointCalibration>,
}

impl CalibrationMap {
    pub fn new(joints: Vec<JointCalibration>) -> Result<Self, CalibError> {
        for (i, j) in joints.iter().enumerate() {
            if j.sign != 1.0 && j.sign != -1.0 {
                return Err(CalibError::BadSign { joint: i });
            }
            if j.min_deg >= j.max_deg {
                return Err(CalibError::BadRange {
                    joint: i,
                    min_deg: j.min_deg,
                    max_deg: j.max_deg,
                });
            }
            if !j.offset_deg.is_finite() {
                return Err(CalibError::BadSign { joint: i });
            }
        }
        Ok(Self { joints })
    }

    /// Identity map (sign +1, offset 0) with the given command range.
    pub fn identity(dof: usize, min_deg: i32, max_deg: i32) -> Result<Self, CalibError> {
        Self::new(
            (0..dof)
                .map(|_| JointCalibration {
                    sign: 1.0,
                    offset_deg: 0.0,
                    min_deg,
                    max_deg,
                })
                .collect(),
        )
    }

    pub fn joints(&self) -> &[JointCalibration] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    fn check_dof(&self, got: usize) -> Result<(), CalibError> {
        if got != self.joints.len() {
            return Err(CalibError::DofMismatch {
                expected: self.joints.len(),
                got,
            });
        }
        Ok(())
    }
}

/// A rendered servo command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerialCommand {
    /// Integer command per joint, degrees.
    pub joint_degrees: Vec<i32>,
    /// The full wire record, including the trailing newline.
    pub line: String,
}

/// Map a model configuration to servo command degrees.
///
/// Per joint: `deg = sign·q·180/π + offset`, rounded to the nearest
/// integer (half away from zero), then validated against the command
/// range. An out-of-range command signals an unreachable or miscalibrated
/// pose.
pub fn apply_calibration(
    map: &CalibrationMap,
    q: &JointConfig,
) -> Result<SerialCommand, CalibError> {
    map.check_dof(q.len())?;
    let mut degrees = Vec::with_capacity(q.len());
    for (i, (cal, &value)) in map.joints.iter().zip(&q.values).enumerate() {
        let raw = cal.sign * value * DEG_PER_RAD + cal.offset_deg;
        let rounded = libm::round(raw) as i64;
        if rounded < cal.min_deg as i64 || rounded > cal.max_deg as i64 {
            return Err(CalibError::OutOfRange {
                joint: i,
                command: rounded,
                min_deg: cal.min_deg,
                max_deg: cal.max_deg,
            });
        }
        degrees.push(rounded as i32);
    }
    let line = render_command(&degrees);
    Ok(SerialCommand {
        joint_degrees: degrees,
        line,
    })
}

/// Invert the calibration map: command degrees back to model radians.
pub fn invert_calibration(
    map: &CalibrationMap,
    degrees: &[i32],
) -> Result<JointConfig, CalibError> {
    map.check_dof(degrees.len())?;
    Ok(JointConfig::new(
        map.joints
            .iter()
            .zip(degrees)
            .map(|(cal, &deg)| (deg as f64 - cal.offset_deg) / cal.sign / DEG_PER_RAD)
            .collect(),
    ))
}

/// Render one wire record: `J <d0> ... <dn>\n`.
pub fn render_command(degrees: &[i32]) -> String {
    let mut line = String::from("J");
    for d in degrees {
        line.push(' ');
        line.push_str(&d.to_string());
    }
    line.push('\n');
    line
}

/// Parse one wire record (with or without its trailing newline).
pub fn parse_command(line: &str, line_no: usize) -> Result<Vec<i32>, CalibError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let mut tokens = body.split_whitespace();
    match tokens.next() {
        Some("J") => {}
        other => {
            return Err(CalibError::BadCommand {
                line_no,
                reason: format!("expected 'J', found {:?}", other.unwrap_or("")),
            })
        }
    }
    let mut degrees = Vec::new();
    for token in tokens {
        let value = token.parse::<i32>().map_err(|_| CalibError::BadCommand {
            line_no,
            reason: format!("bad integer '{token}'"),
        })?;
        degrees.push(value);
    }
    if degrees.is_empty() {
        return Err(CalibError::BadCommand {
            line_no,
            reason: "command carries no joint values".to_string(),
        });
    }
    Ok(degrees)
}

/// Replay a command script against the chain: inverse-calibrate each line,
/// run forward kinematics, and return the tip trajectory.
pub fn replay_serial(
    chain: &KinematicChain,
    map: &CalibrationMap,
    script: &str,
) -> Result<Vec<Vector3<f64>>, CalibError> {
    let mut trace = Vec::new();
    for (idx, line) in script.lines().enumerate() {
        let degrees = parse_command(line, idx + 1)?;
        let config = invert_calibration(map, &degrees)?;
        trace.push(forward_kinematics(chain, &config)?.translation);
    }
    Ok(trace)
}
