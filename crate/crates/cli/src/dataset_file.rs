//! The dataset CSV format.
//!
//! One header line
//! `# mdn-ik dataset v1, chain=<hash>, n=<count>, seed=<seed>`
//! followed by `n` rows `x,y,z,q0,...,q{dof-1}` in SI units, every value
//! printed with 17 significant digits so the file round-trips `f64`s
//! exactly.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;

use mdn_ik_core::chain::JointConfig;
use mdn_ik_core::sampling::{IkDataset, IkSample};

#[derive(Debug, thiserror::Error)]
pub enum DatasetFileError {
    #[error("bad dataset header: {0}")]
    BadHeader(String),
    #[error("header declares {header} samples but the file has {actual}")]
    CountMismatch { header: usize, actual: usize },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
}

/// Full round-trip decimal precision (17 significant digits).
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset(dataset: &IkDataset, mut w: impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "# mdn-ik dataset v1, chain={}, n={}, seed={}",
        dataset.chain_fingerprint,
        dataset.len(),
        dataset.seed
    )?;
    let mut line = String::new();
    for sample in &dataset.samples {
        line.clear();
        line.push_str(&full_precision(sample.position.x));
        for v in [sample.position.y, sample.position.z] {
            line.push(',');
            line.push_str(&full_precision(v));
        }
        for &q in sample.config.as_slice() {
            line.push(',');
            line.push_str(&full_precision(q));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &IkDataset, path: impl AsRef<Path>) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_dataset(dataset, &mut buf)?;
    buf.flush()
}

pub fn read_dataset(r: impl BufRead) -> Result<IkDataset, DatasetFileError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| DatasetFileError::BadHeader("empty file".to_string()))??;
    let (fingerprint, n, seed) = parse_header(&header)?;

    let mut samples = Vec::with_capacity(n);
    let mut dof = None;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let values = line
            .split(',')
            .map(|t| {
                t.parse::<f64>().map_err(|_| DatasetFileError::BadRow {
                    line: line_no,
                    reason: format!("cannot parse '{t}' as a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() < 4 {
            return Err(DatasetFileError::BadRow {
                line: line_no,
                reason: format!("expected at least 4 columns, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DatasetFileError::BadRow {
                line: line_no,
                reason: "non-finite value".to_string(),
            });
        }
        let row_dof = values.len() - 3;
        match dof {
            None => dof = Some(row_dof),
            Some(d) if d != row_dof => {
                return Err(DatasetFileError::BadRow {
                    line: line_no,
                    reason: format!("row has dof {row_dof}, earlier rows had {d}"),
                })
            }
            _ => {}
        }
        samples.push(IkSample {
            position: Vector3::new(values[0], values[1], values[2]),
            config: JointConfig::new(values[3..].to_vec()),
        });
    }
    if samples.len() != n {
        return Err(DatasetFileError::CountMismatch {
            header: n,
            actual: samples.len(),
        });
    }
    Ok(IkDataset {
        chain_fingerprint: fingerprint,
        seed,
        dof: dof.unwrap_or(0),
        samples,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<IkDataset, DatasetFileError> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}

fn parse_header(header: &str) -> Result<(String, usize, u64), DatasetFileError> {
    let bad = |msg: &str| DatasetFileError::BadHeader(format!("{msg}: '{header}'"));
    let rest = header
        .strip_prefix("# mdn-ik dataset v1, ")
        .ok_or_else(|| bad("expected '# mdn-ik dataset v1, ...'"))?;
    let mut fingerprint = None;
    let mut n = None;
    let mut seed = None;
    for field in rest.split(", ") {
        if let Some(v) = field.strip_prefix("chain=") {
            fingerprint = Some(v.to_string());
        } else if let Some(v) = field.strip_prefix("n=") {
            n = Some(v.parse::<usize>().map_err(|_| bad("bad n"))?);
        } else if let Some(v) = field.strip_prefix("seed=") {
            seed = Some(v.parse::<u64>().map_err(|_| bad("bad seed"))?);
        } else {
            return Err(bad("unknown header field"));
        }
    }
    Ok((
        fingerprint.ok_or_else(|| bad("missing chain="))?,
        n.ok_or_else(|| bad("missing n="))?,
        seed.ok_or_else(|| bad("missing seed="))?,
    ))
}
