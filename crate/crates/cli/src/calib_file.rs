//! The calibration map file: one line per joint, base-to-tip,
//! `sign offset_deg min_deg max_deg`. Blank lines and `#` comments are
//! skipped.

use std::path::Path;

use mdn_ik_core::calib::{CalibError, CalibrationMap, JointCalibration};

#[derive(Debug, thiserror::Error)]
pub enum CalibFileError {
    #[error("calibration io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error(transparent)]
    Calib(#[from] CalibError),
}

pub fn parse_calibration(text: &str) -> Result<CalibrationMap, CalibFileError> {
    let mut joints = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(CalibFileError::BadLine {
                line: line_no,
                reason: format!(
                    "expected 'sign offset_deg min_deg max_deg', found {} fields",
                    tokens.len()
                ),
            });
        }
        let bad = |what: &str, token: &str| CalibFileError::BadLine {
            line: line_no,
            reason: format!("cannot parse {what} '{token}'"),
        };
        let sign = match tokens[0] {
            "+1" | "1" => 1.0,
            "-1" => -1.0,
            other => return Err(bad("sign (+1 or -1)", other)),
        };
        let offset_deg: f64 = tokens[1].parse().map_err(|_| bad("offset", tokens[1]))?;
        let min_deg: i32 = tokens[2].parse().map_err(|_| bad("min", tokens[2]))?;
        let max_deg: i32 = tokens[3].parse().map_err(|_| bad("max", tokens[3]))?;
        joints.push(JointCalibration {
            sign,
            offset_deg,
            min_deg,
            max_deg,
        });
    }
    Ok(CalibrationMap::new(joints)?)
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationMap, CalibFileError> {
    parse_calibration(&std::fs::read_to_string(path)?)
}

pub fn calibration_to_string(map: &CalibrationMap) -> String {
    let mut out = String::from("# sign offset_deg min_deg max_deg (one line per active joint)\n");
    for j in map.joints() {
        let sign = if j.sign >= 0.0 { "+1" } else { "-1" };
        out.push_str(&format!(
            "{sign} {} {} {}\n",
            j.offset_deg, j.min_deg, j.max_deg
        ));
    }
    out
}
