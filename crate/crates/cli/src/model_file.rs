//! The versioned JSON model envelope.
//!
//! Layout: format tag, version, architecture config, the fitted scalers,
//! and one entry per parameter tensor with explicit shape and a flat
//! row-major array. serde_json prints floats with shortest round-trip
//! precision, so saving and loading is lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mdn_ik_core::mdn::{MdnConfig, MdnError, MdnModel, Scaler};

pub const MODEL_FORMAT: &str = "mdn-ik model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt model file: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("not a model file (format tag '{found}')")]
    Format { found: String },
    #[error("unsupported model version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },
    #[error("model has dof {found} but the chain has dof {expected}")]
    DofMismatch { expected: usize, found: usize },
    #[error("tensor {index} is '{found}' with shape {rows}x{cols}, expected '{expected}'")]
    TensorMismatch {
        index: usize,
        found: String,
        rows: usize,
        cols: usize,
        expected: String,
    },
    #[error("tensor '{name}' has {got} values, expected {expected}")]
    TensorLength {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("tensor count {got} does not match layout ({expected})")]
    TensorCount { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] MdnError),
}

#[derive(Serialize, Deserialize)]
struct ConfigDto {
    input_dim: usize,
    hidden_layers: usize,
    hidden_width: usize,
    components: usize,
    output_dim: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScalerDto {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorDto {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: ConfigDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain_fingerprint: Option<String>,
    input_scaler: ScalerDto,
    output_scaler: ScalerDto,
    tensors: Vec<TensorDto>,
}

fn scaler_dto(s: &Scaler) -> ScalerDto {
    ScalerDto {
        mean: s.mean().to_vec(),
        std: s.std().to_vec(),
    }
}

pub fn model_to_json(model: &MdnModel, chain_fingerprint: Option<&str>) -> String {
    let config = model.config();
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: ConfigDto {
            input_dim: config.input_dim,
            hidden_layers: config.hidden_layers,
            hidden_width: config.hidden_width,
            components: config.components,
            output_dim: config.output_dim,
            seed: config.seed,
        },
        chain_fingerprint: chain_fingerprint.map(str::to_string),
        input_scaler: scaler_dto(model.input_scaler()),
        output_scaler: scaler_dto(model.output_scaler()),
        tensors: model
            .layout()
            .tensors()
            .iter()
            .map(|t| TensorDto {
                name: t.name.clone(),
                rows: t.rows,
                cols: t.cols,
                data: model.params()[t.range()].to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn save_model(
    model: &MdnModel,
    chain_fingerprint: Option<&str>,
    path: impl AsRef<Path>,
) -> Result<(), ModelFileError> {
    std::fs::write(path, model_to_json(model, chain_fingerprint))?;
    Ok(())
}

/// Parse a model file, optionally insisting on a chain dof.
///
/// Returns the model and the chain fingerprint recorded at save time, if
/// any.
pub fn model_from_json(
    text: &str,
    expected_dof: Option<usize>,
) -> Result<(MdnModel, Option<String>), ModelFileError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != MODEL_FORMAT {
        return Err(ModelFileError::Format { found: file.format });
    }
    if file.version != MODEL_VERSION {
        return Err(ModelFileError::Version {
            found: file.version,
            supported: MODEL_VERSION,
        });
    }
    let config = MdnConfig {
        input_dim: file.config.input_dim,
        hidden_layers: file.config.hidden_layers,
        hidden_width: file.config.hidden_width,
        components: file.config.components,
        output_dim: file.config.output_dim,
        seed: file.config.seed,
    };
    if let Some(expected) = expected_dof {
        if config.output_dim != expected {
            return Err(ModelFileError::DofMismatch {
                expected,
                found: config.output_dim,
            });
        }
    }
    config.validate()?;
    let layout = mdn_ik_core::mdn::MdnLayout::new(&config);
    if file.tensors.len() != layout.tensors().len() {
        return Err(ModelFileError::TensorCount {
            expected: layout.tensors().len(),
            got: file.tensors.len(),
        });
    }
    let mut params = vec![0.0; layout.total_params()];
    for (index, (dto, info)) in file.tensors.iter().zip(layout.tensors()).enumerate() {
        if dto.name != info.name || dto.rows != info.rows || dto.cols != info.cols {
            return Err(ModelFileError::TensorMismatch {
                index,
                found: dto.name.clone(),
                rows: dto.rows,
                cols: dto.cols,
                expected: format!("{} {}x{}", info.name, info.rows, info.cols),
            });
        }
        if dto.data.len() != info.len() {
            return Err(ModelFileError::TensorLength {
                name: dto.name.clone(),
                expected: info.len(),
                got: dto.data.len(),
            });
        }
        params[info.range()].copy_from_slice(&dto.data);
    }
    let input_scaler = Scaler::from_parts(file.input_scaler.mean, file.input_scaler.std)?;
    let output_scaler = Scaler::from_parts(file.output_scaler.mean, file.output_scaler.std)?;
    let model = MdnModel::from_parts(config, params, input_scaler, output_scaler)?;
    Ok((model, file.chain_fingerprint))
}

pub fn load_model(
    path: impl AsRef<Path>,
    expected_dof: Option<usize>,
) -> Result<(MdnModel, Option<String>), ModelFileError> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text, expected_dof)
}
