//! Mixture density network mapping tip translation to a Gaussian mixture
//! over joint configurations.
//!
//! The network is a SiLU MLP trunk with three heads: mixture logits
//! (SoftMax), component means, and pre-softplus standard deviations. The
//! loss is the mixture negative log-likelihood of the true configuration,
//! evaluated in standardized ("scaled") output space; the per-dimension
//! input and output scalers are part of the model. Inference picks the
//! highest-weight component and returns its mean.
//!
//! Parameters live in one flat `f64` vector described by [`MdnLayout`],
//! which makes the optimizer, the finite-difference checks and the file
//! format straightforward.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::chain::JointConfig;
use crate::sampling::SampleRng;

mod loss;
mod net;
mod train;

pub use loss::{mixture_nll, nll_loss};
pub use train::{train, EpochRecord, TrainError, TrainSettings, TrainingReport};

pub(crate) use loss::BatchWorkspace;

/// Floor added to every standard deviation after softplus, in scaled
/// output space. Keeps the likelihood finite on duplicated samples.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdnError {
    #[error("invalid model configuration: {0}")]
    BadConfig(String),
    #[error("input is not finite")]
    NonFiniteInput,
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has {got} values, layout requires {expected}")]
    BadParams { expected: usize, got: usize },
    #[error("scaler dimension {got} does not match {expected}, or a std entry is not positive")]
    BadScaler { expected: usize, got: usize },
    #[error("batch is empty or sizes disagree")]
    BadBatch,
    #[error("non-finite loss or activations")]
    NonFinite,
}

/// Architecture of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MdnConfig {
    /// Input dimension (tip translation: 3).
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Number of Gaussian components K.
    pub components: usize,
    /// Joint-space dimension (chain dof).
    pub output_dim: usize,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl MdnConfig {
    /// The reference architecture: 3 inputs, three hidden layers of 128
    /// SiLU units, K = 5 components.
    pub fn paper_default(output_dim: usize, seed: u64) -> Self {
        Self {
            input_dim: 3,
            hidden_layers: 3,
            hidden_width: 128,
            components: 5,
            output_dim,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), MdnError> {
        for (value, name) in [
            (self.input_dim, "input_dim"),
            (self.hidden_layers, "hidden_layers"),
            (self.hidden_width, "hidden_width"),
            (self.components, "components"),
            (self.output_dim, "output_dim"),
        ] {
            if value == 0 {
                return Err(MdnError::BadConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Name, shape and offset of one parameter tensor in the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter layout: trunk layers in order, then the logits, means
/// and deviations heads. Weights are `out × in` row-major; biases follow
/// their weight tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdnLayout {
    tensors: Vec<TensorInfo>,
    total: usize,
}

impl MdnLayout {
    pub fn new(config: &MdnConfig) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            tensors.push(TensorInfo {
                name,
                rows,
                cols,
                offset,
            });
            offset += rows * cols;
        };
        let w = config.hidden_width;
        let mut in_dim = config.input_dim;
        for layer in 0..config.hidden_layers {
            push(format!("trunk{layer}.weight"), w, in_dim);
            push(format!("trunk{layer}.bias"), w, 1);
            in_dim = w;
        }
        let kd = config.components * config.output_dim;
        push(String::from("logits.weight"), config.components, w);
        push(String::from("logits.bias"), config.components, 1);
        push(String::from("means.weight"), kd, w);
        push(String::from("means.bias"), kd, 1);
        push(String::from("devs.weight"), kd, w);
        push(String::from("devs.bias"), kd, 1);
        let total = offset;
        Self { tensors, total }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn total_params(&self) -> usize {
        self.total
    }

    fn tensor_at(&self, index: usize) -> &TensorInfo {
        &self.tensors[index]
    }

    fn trunk_weight(&self, layer: usize) -> &TensorInfo {
        self.tensor_at(2 * layer)
    }

    fn trunk_bias(&self, layer: usize) -> &TensorInfo {
        self.tensor_at(2 * layer + 1)
    }

    fn head_base(&self) -> usize {
        self.tensors.len() - 6
    }

    fn logits_weight(&self) -> &TensorInfo {
        self.tensor_at(self.head_base())
    }

    fn logits_bias(&self) -> &TensorInfo {
        self.tensor_at(self.head_base() + 1)
    }

    fn means_weight(&self) -> &TensorInfo {
        self.tensor_at(self.head_base() + 2)
    }

    fn means_bias(&self) -> &TensorInfo {
        self.tensor_at(self.head_base() + 3)
    }

    fn devs_weight(&self) -> &TensorInfo {
        self.tensor_at(self.head_base() + 4)
    }

    fn devs_bias(&self) -> &TensorInfo {
        self.tensor_at(self.head_base() + 5)
    }
}

/// Per-dimension affine standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit mean and (population) standard deviation per dimension.
    /// Dimensions with no variation get a std of 1.0 so they pass through
    /// unscaled; all std entries are therefore strictly positive.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for row in rows.clone() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        if count == 0 {
            return Self::identity(dim);
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&s| {
                let sd = libm::sqrt(s / count as f64);
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, MdnError> {
        if mean.len() != std.len() || std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(MdnError::BadScaler {
                expected: mean.len(),
                got: std.len(),
            });
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn scale_into(&self, src: &[f64], dst: &mut [f64]) {
        for ((d, &v), (&m, &s)) in dst.iter_mut().zip(src).zip(self.mean.iter().zip(&self.std)) {
            *d = (v - m) / s;
        }
    }

    pub fn unscale_value(&self, dim: usize, v: f64) -> f64 {
        v * self.std[dim] + self.mean[dim]
    }
}

/// The mixture parameters predicted for one input, in joint space
/// (radians / meters).
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrediction {
    pub components: usize,
    pub output_dim: usize,
    /// Mixture weights, non-negative, summing to 1.
    pub weights: Vec<f64>,
    /// `components × output_dim` row-major component means.
    pub means: Vec<f64>,
    /// `components × output_dim` row-major standard deviations, strictly
    /// positive.
    pub stds: Vec<f64>,
}

impl MixturePrediction {
    pub fn mean_of(&self, k: usize) -> &[f64] {
        &self.means[k * self.output_dim..(k + 1) * self.output_dim]
    }

    pub fn std_of(&self, k: usize) -> &[f64] {
        &self.stds[k * self.output_dim..(k + 1) * self.output_dim]
    }

    /// Index of the highest-weight component; ties resolve to the lowest
    /// index.
    pub fn top_component(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = k;
            }
        }
        best
    }
}

/// The trained (or initializable) model: architecture, flat parameters and
/// the fitted input/output scalers.
///
/// Immutable models are safe to share for concurrent inference.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnModel {
    config: MdnConfig,
    layout: MdnLayout,
    params: Vec<f64>,
    input_scaler: Scaler,
    output_scaler: Scaler,
}

impl MdnModel {
    /// Fresh model with seeded initialization and identity scalers.
    ///
    /// Trunk and mean-head parameters draw from `U(-1/√fan_in, 1/√fan_in)`
    /// in tensor order; the logits head starts at zero (uniform mixture)
    /// and the deviation head starts at `softplus⁻¹(1)` so initial sigmas
    /// are one in scaled space.
    pub fn new(config: MdnConfig) -> Result<Self, MdnError> {
        config.validate()?;
        let layout = MdnLayout::new(&config);
        let mut params = vec![0.0; layout.total_params()];
        let mut rng = SampleRng::from_seed(config.seed);

        for layer in 0..config.hidden_layers {
            let w = layout.trunk_weight(layer).clone();
            let b = layout.trunk_bias(layer).clone();
            let bound = 1.0 / libm::sqrt(w.cols as f64);
            for i in w.range().chain(b.range()) {
                params[i] = rng.uniform(-bound, bound);
            }
        }
        let mw = layout.means_weight().clone();
        let mb = layout.means_bias().clone();
        let bound = 1.0 / libm::sqrt(mw.cols as f64);
        for i in mw.range().chain(mb.range()) {
            params[i] = rng.uniform(-bound, bound);
        }
        // Logits stay zero; deviation weights stay zero with the bias set
        // so that softplus(bias) = 1.
        let dev_bias_init = libm::log(core::f64::consts::E - 1.0);
        for i in layout.devs_bias().range() {
            params[i] = dev_bias_init;
        }

        let input_scaler = Scaler::identity(config.input_dim);
        let output_scaler = Scaler::identity(config.output_dim);
        Ok(Self {
            config,
            layout,
            params,
            input_scaler,
            output_scaler,
        })
    }

    /// Rebuild a model from stored parts (used by the file format).
    pub fn from_parts(
        config: MdnConfig,
        params: Vec<f64>,
        input_scaler: Scaler,
        output_scaler: Scaler,
    ) -> Result<Self, MdnError> {
        config.validate()?;
        let layout = MdnLayout::new(&config);
        if params.len() != layout.total_params() {
            return Err(MdnError::BadParams {
                expected: layout.total_params(),
                got: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(MdnError::NonFinite);
        }
        if input_scaler.dim() != config.input_dim {
            return Err(MdnError::BadScaler {
                expected: config.input_dim,
                got: input_scaler.dim(),
            });
        }
        if output_scaler.dim() != config.output_dim {
            return Err(MdnError::BadScaler {
                expected: config.output_dim,
                got: output_scaler.dim(),
            });
        }
        Ok(Self {
            config,
            layout,
            params,
            input_scaler,
            output_scaler,
        })
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    pub fn layout(&self) -> &MdnLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access, for optimizers and gradient checks.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_scaler(&self) -> &Scaler {
        &self.input_scaler
    }

    pub fn output_scaler(&self) -> &Scaler {
        &self.output_scaler
    }

    pub fn set_scalers(&mut self, input: Scaler, output: Scaler) -> Result<(), MdnError> {
        if input.dim() != self.config.input_dim {
            return Err(MdnError::BadScaler {
                expected: self.config.input_dim,
                got: input.dim(),
            });
        }
        if output.dim() != self.config.output_dim {
            return Err(MdnError::BadScaler {
                expected: self.config.output_dim,
                got: output.dim(),
            });
        }
        self.input_scaler = input;
        self.output_scaler = output;
        Ok(())
    }

    fn tensor<'a>(&'a self, info: &TensorInfo) -> &'a [f64] {
        &self.params[info.range()]
    }

    /// Scaled-space mixture parameters for one scaled input.
    pub(crate) fn forward_scaled(
        &self,
        x_scaled: &[f64],
        weights: &mut Vec<f64>,
        means: &mut Vec<f64>,
        stds: &mut Vec<f64>,
    ) {
        let cfg = &self.config;
        let w = cfg.hidden_width;
        let mut h_in: Vec<f64> = x_scaled.to_vec();
        let mut z = vec![0.0; w];
        let mut h = vec![0.0; w];
        let mut sig = vec![0.0; w];
        for layer in 0..cfg.hidden_layers {
            let wt = self.tensor(self.layout.trunk_weight(layer));
            let bt = self.tensor(self.layout.trunk_bias(layer));
            net::linear_forward(&h_in, 1, h_in.len(), wt, bt, w, &mut z);
            net::silu_forward(&z, w, &mut h, &mut sig);
            h_in.clear();
            h_in.extend_from_slice(&h);
        }

        let k = cfg.components;
        let kd = k * cfg.output_dim;
        weights.clear();
        weights.resize(k, 0.0);
        net::linear_forward(
            &h_in,
            1,
            w,
            self.tensor(self.layout.logits_weight()),
            self.tensor(self.layout.logits_bias()),
            k,
            weights,
        );
        // SoftMax in place.
        let max = weights.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in weights.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in weights.iter_mut() {
            *v /= sum;
        }

        means.clear();
        means.resize(kd, 0.0);
        net::linear_forward(
            &h_in,
            1,
            w,
            self.tensor(self.layout.means_weight()),
            self.tensor(self.layout.means_bias()),
            kd,
            means,
        );

        stds.clear();
        stds.resize(kd, 0.0);
        net::linear_forward(
            &h_in,
            1,
            w,
            self.tensor(self.layout.devs_weight()),
            self.tensor(self.layout.devs_bias()),
            kd,
            stds,
        );
        for v in stds.iter_mut() {
            *v = net::softplus(*v) + SIGMA_FLOOR;
        }
    }

    /// Predict the mixture for a tip translation, in joint space.
    pub fn forward(&self, x: &Vector3<f64>) -> Result<MixturePrediction, MdnError> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(MdnError::NonFiniteInput);
        }
        if self.config.input_dim != 3 {
            return Err(MdnError::DimensionMismatch {
                expected: self.config.input_dim,
                got: 3,
            });
        }
        let mut xs = vec![0.0; 3];
        self.input_scaler.scale_into(&[x.x, x.y, x.z], &mut xs);
        let (mut weights, mut means, mut stds) = (Vec::new(), Vec::new(), Vec::new());
        self.forward_scaled(&xs, &mut weights, &mut means, &mut stds);
        let d = self.config.output_dim;
        for k in 0..self.config.components {
            for dim in 0..d {
                let idx = k * d + dim;
                means[idx] = self.output_scaler.unscale_value(dim, means[idx]);
                stds[idx] *= self.output_scaler.std()[dim];
            }
        }
        Ok(MixturePrediction {
            components: self.config.components,
            output_dim: d,
            weights,
            means,
            stds,
        })
    }

    /// Highest-mode inference: the mean of the component with the largest
    /// mixture weight.
    pub fn predict_config(&self, x: &Vector3<f64>) -> Result<JointConfig, MdnError> {
        let prediction = self.forward(x)?;
        let top = prediction.top_component();
        Ok(JointConfig::new(prediction.mean_of(top).to_vec()))
    }

    /// Training-space NLL of `q` under the mixture predicted for `x`
    /// (both standardized with the model scalers).
    pub fn nll(&self, x: &Vector3<f64>, q: &JointConfig) -> Result<f64, MdnError> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(MdnError::NonFiniteInput);
        }
        if q.len() != self.config.output_dim {
            return Err(MdnError::DimensionMismatch {
                expected: self.config.output_dim,
                got: q.len(),
            });
        }
        let mut xs = vec![0.0; self.config.input_dim];
        self.input_scaler.scale_into(&[x.x, x.y, x.z], &mut xs);
        let mut ts = vec![0.0; self.config.output_dim];
        self.output_scaler.scale_into(q.as_slice(), &mut ts);
        let (mut weights, mut means, mut stds) = (Vec::new(), Vec::new(), Vec::new());
        self.forward_scaled(&xs, &mut weights, &mut means, &mut stds);
        Ok(mixture_nll(&weights, &means, &stds, &ts))
    }

    /// Mean training-space NLL over a batch (forward only). This is the
    /// exact objective differentiated by [`MdnModel::gradients`].
    pub fn batch_nll(
        &self,
        inputs: &[Vector3<f64>],
        targets: &[JointConfig],
    ) -> Result<f64, MdnError> {
        let (xs, ts) = self.scale_batch(inputs, targets)?;
        let mut ws = BatchWorkspace::new(&self.config, inputs.len());
        ws.load(&xs, &ts, inputs.len());
        Ok(loss::batch_pass(self, inputs.len(), &mut ws, None))
    }

    /// Mean batch NLL and its exact gradient with respect to every
    /// parameter, aligned with [`MdnModel::params`].
    pub fn gradients(
        &self,
        inputs: &[Vector3<f64>],
        targets: &[JointConfig],
    ) -> Result<(f64, Vec<f64>), MdnError> {
        let (xs, ts) = self.scale_batch(inputs, targets)?;
        let mut ws = BatchWorkspace::new(&self.config, inputs.len());
        ws.load(&xs, &ts, inputs.len());
        let mut grads = vec![0.0; self.layout.total_params()];
        let loss = loss::batch_pass(self, inputs.len(), &mut ws, Some(&mut grads));
        if !loss.is_finite() {
            return Err(MdnError::NonFinite);
        }
        Ok((loss, grads))
    }

    fn scale_batch(
        &self,
        inputs: &[Vector3<f64>],
        targets: &[JointConfig],
    ) -> Result<(Vec<f64>, Vec<f64>), MdnError> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(MdnError::BadBatch);
        }
        let d = self.config.output_dim;
        let mut xs = vec![0.0; inputs.len() * self.config.input_dim];
        let mut ts = vec![0.0; targets.len() * d];
        for (i, (x, q)) in inputs.iter().zip(targets).enumerate() {
            if !x.iter().all(|v| v.is_finite()) {
                return Err(MdnError::NonFiniteInput);
            }
            if q.len() != d {
                return Err(MdnError::DimensionMismatch {
                    expected: d,
                    got: q.len(),
                });
            }
            self.input_scaler
                .scale_into(&[x.x, x.y, x.z], &mut xs[i * 3..(i + 1) * 3]);
            self.output_scaler
                .scale_into(q.as_slice(), &mut ts[i * d..(i + 1) * d]);
        }
        Ok((xs, ts))
    }
}
