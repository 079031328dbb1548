//! Mini-batch Adam training of the MDN on an FK dataset.
//!
//! The dataset is shuffled once with the settings seed and split into
//! train/validation parts; scalers are fitted on the training split only.
//! Each epoch reshuffles the training indices and steps Adam per batch
//! under a stepped exponential learning-rate schedule. Training is
//! single-threaded and bit-deterministic in `(dataset, config, settings)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::loss::{batch_pass, BatchWorkspace};
use super::{MdnConfig, MdnError, MdnModel, Scaler};
use crate::sampling::{IkDataset, SampleRng};

/// Optimizer and schedule settings. Defaults mirror the reference setup:
/// 1000 epochs, batch 256, initial rate 1e-2 decayed by 0.90 every 100
/// epochs, canonical Adam constants, 90/10 split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Multiplier applied after every full `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of the dataset used for training; the rest is held out
    /// for validation.
    pub train_fraction: f64,
    /// Seed for the split and the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 256,
            initial_lr: 1e-2,
            lr_decay: 0.90,
            decay_every: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl TrainSettings {
    /// Step-function schedule: the rate is multiplied by `lr_decay` after
    /// each full `decay_every` epochs.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.initial_lr * libm::pow(self.lr_decay, (epoch / self.decay_every) as f64)
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::InvalidSettings(String::from(what)));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.initial_lr <= 0.0 || !self.initial_lr.is_finite() {
            return bad("initial_lr must be positive");
        }
        if self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.decay_every == 0 {
            return bad("decay_every must be at least 1");
        }
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !beta_ok(self.beta1) || !beta_ok(self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return bad("epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.train_fraction) || self.train_fraction == 0.0 {
            return bad("train_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One row of the training report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training NLL over the epoch, scaled space.
    pub train_nll: f64,
    /// Mean NLL on the held-out split after the epoch, scaled space.
    pub val_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub records: Vec<EpochRecord>,
    pub train_count: usize,
    pub val_count: usize,
}

impl TrainingReport {
    pub fn final_val_nll(&self) -> Option<f64> {
        self.records.last().map(|r| r.val_nll)
    }

    pub fn first_train_nll(&self) -> Option<f64> {
        self.records.first().map(|r| r.train_nll)
    }

    pub fn final_train_nll(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_nll)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training settings: {0}")]
    InvalidSettings(String),
    #[error("model expects {model} outputs but dataset has dof {dataset}")]
    DofMismatch { model: usize, dataset: usize },
    #[error("{0}")]
    DatasetTooSmall(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged {
        epoch: usize,
        batch: usize,
        report: TrainingReport,
    },
    #[error(transparent)]
    Model(#[from] MdnError),
}

/// Train a fresh model on the dataset. Returns the model and the
/// per-epoch report; on divergence the error carries the report up to the
/// failing batch.
pub fn train(
    dataset: &IkDataset,
    config: MdnConfig,
    settings: &TrainSettings,
) -> Result<(MdnModel, TrainingReport), TrainError> {
    settings.validate()?;
    config.validate()?;
    if config.output_dim != dataset.dof {
        return Err(TrainError::DofMismatch {
            model: config.output_dim,
            dataset: dataset.dof,
        });
    }
    if config.input_dim != 3 {
        return Err(TrainError::InvalidSettings(String::from(
            "input_dim must be 3 (tip translation)",
        )));
    }

    let n = dataset.len();
    let n_train = ((n as f64) * settings.train_fraction) as usize;
    let n_val = n - n_train;
    if n_train < settings.batch_size {
        return Err(TrainError::DatasetTooSmall(format!(
            "training split of {n_train} samples cannot fill a batch of {}",
            settings.batch_size
        )));
    }
    if n_val == 0 {
        return Err(TrainError::DatasetTooSmall(format!(
            "no samples left for validation from {n} with train fraction {}",
            settings.train_fraction
        )));
    }

    let mut rng = SampleRng::from_seed(settings.seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut train_idx = order[..n_train].to_vec();
    let val_idx = &order[n_train..];

    let d = config.output_dim;
    let positions: Vec<[f64; 3]> = dataset
        .samples
        .iter()
        .map(|s| [s.position.x, s.position.y, s.position.z])
        .collect();
    let input_scaler = Scaler::fit(
        train_idx.iter().map(|&i| positions[i].as_slice()),
        3,
    );
    let output_scaler = Scaler::fit(
        train_idx.iter().map(|&i| dataset.samples[i].config.as_slice()),
        d,
    );

    // Pre-standardize every row once.
    let mut xs_all = vec![0.0; n * 3];
    let mut ts_all = vec![0.0; n * d];
    for i in 0..n {
        input_scaler.scale_into(&positions[i], &mut xs_all[i * 3..(i + 1) * 3]);
        output_scaler.scale_into(
            dataset.samples[i].config.as_slice(),
            &mut ts_all[i * d..(i + 1) * d],
        );
    }

    let mut model = MdnModel::new(config)?;
    model.set_scalers(input_scaler, output_scaler)?;

    let total = model.layout().total_params();
    let mut grads = vec![0.0; total];
    let mut m = vec![0.0; total];
    let mut v = vec![0.0; total];
    let mut step = 0u64;
    let mut ws = BatchWorkspace::new(&config, settings.batch_size);

    let mut report = TrainingReport {
        records: Vec::with_capacity(settings.epochs),
        train_count: n_train,
        val_count: n_val,
    };

    for epoch in 0..settings.epochs {
        let lr = settings.learning_rate_at(epoch);
        rng.shuffle(&mut train_idx);

        let mut loss_sum = 0.0;
        for (batch_no, chunk) in train_idx.chunks(settings.batch_size).enumerate() {
            let rows = chunk.len();
            gather(&xs_all, 3, chunk, &mut ws.xs);
            gather(&ts_all, d, chunk, &mut ws.ts);
            let loss = batch_pass(&model, rows, &mut ws, Some(&mut grads));
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: batch_no,
                    report,
                });
            }
            loss_sum += loss * rows as f64;

            step += 1;
            adam_step(
                model.params_mut(),
                &grads,
                &mut m,
                &mut v,
                step,
                lr,
                settings,
            );
        }

        let val_nll = mean_nll(&model, &xs_all, &ts_all, d, val_idx, &mut ws);
        report.records.push(EpochRecord {
            epoch,
            lr,
            train_nll: loss_sum / n_train as f64,
            val_nll,
        });
    }

    Ok((model, report))
}

fn gather(source: &[f64], stride: usize, indices: &[usize], dest: &mut [f64]) {
    for (row, &idx) in indices.iter().enumerate() {
        dest[row * stride..(row + 1) * stride]
            .copy_from_slice(&source[idx * stride..(idx + 1) * stride]);
    }
}

/// Forward-only mean NLL over the given rows, in batches.
fn mean_nll(
    model: &MdnModel,
    xs_all: &[f64],
    ts_all: &[f64],
    d: usize,
    indices: &[usize],
    ws: &mut BatchWorkspace,
) -> f64 {
    let cap = ws.ts.len() / d;
    let mut sum = 0.0;
    for chunk in indices.chunks(cap) {
        gather(xs_all, 3, chunk, &mut ws.xs);
        gather(ts_all, d, chunk, &mut ws.ts);
        sum += batch_pass(model, chunk.len(), ws, None) * chunk.len() as f64;
    }
    sum / indices.len() as f64
}

/// One Adam update with bias correction.
#[allow(clippy::too_many_arguments)]
fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    settings: &TrainSettings,
) {
    let b1 = settings.beta1;
    let b2 = settings.beta2;
    let bc1 = 1.0 - libm::pow(b1, step as f64);
    let bc2 = 1.0 - libm::pow(b2, step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + settings.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::generate_dataset;
    use crate::testutil::planar_two_link;

    fn fast_settings(seed: u64) -> TrainSettings {
        TrainSettings {
            epochs: 5,
            batch_size: 32,
            seed,
            ..TrainSettings::default()
        }
    }

    fn small_config(dof: usize, seed: u64) -> MdnConfig {
        MdnConfig {
            input_dim: 3,
            hidden_layers: 2,
            hidden_width: 16,
            components: 3,
            output_dim: dof,
            seed,
        }
    }

    #[test]
    fn schedule_matches_reference_values() {
        let s = TrainSettings::default();
        assert!((s.learning_rate_at(0) - 1e-2).abs() < 1e-18);
        assert!((s.learning_rate_at(99) - 1e-2).abs() < 1e-18);
        assert!((s.learning_rate_at(100) - 9e-3).abs() < 1e-15);
        assert!((s.learning_rate_at(500) - 5.9049e-3).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let chain = planar_two_link();
        let ds = generate_dataset(&chain, 128, 77).unwrap();
        let (a, ra) = train(&ds, small_config(2, 5), &fast_settings(9)).unwrap();
        let (b, rb) = train(&ds, small_config(2, 5), &fast_settings(9)).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ra, rb);
        let (c, _) = train(&ds, small_config(2, 5), &fast_settings(10)).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn loss_decreases_on_a_small_run() {
        let chain = planar_two_link();
        let ds = generate_dataset(&chain, 512, 3).unwrap();
        let settings = TrainSettings {
            epochs: 40,
            batch_size: 64,
            seed: 4,
            ..TrainSettings::default()
        };
        let (_, report) = train(&ds, small_config(2, 6), &settings).unwrap();
        assert_eq!(report.records.len(), 40);
        assert_eq!(report.train_count, 460);
        assert_eq!(report.val_count, 52);
        let first = report.first_train_nll().unwrap();
        let last = report.final_train_nll().unwrap();
        assert!(last < first, "no progress: {first} -> {last}");
        assert!(report.final_val_nll().unwrap().is_finite());
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let chain = planar_two_link();
        let ds = generate_dataset(&chain, 128, 13).unwrap();
        // A step of ~1e308 overflows the first hidden layer on the next
        // forward pass.
        let settings = TrainSettings {
            epochs: 10,
            batch_size: 32,
            initial_lr: 1e308,
            seed: 2,
            ..TrainSettings::default()
        };
        match train(&ds, small_config(2, 8), &settings) {
            Err(TrainError::Diverged { epoch, batch, report }) => {
                assert_eq!(epoch, 0);
                assert!(batch >= 1);
                // The report covers only fully completed epochs.
                assert!(report.records.is_empty());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn validates_sizes_and_dof() {
        let chain = planar_two_link();
        let ds = generate_dataset(&chain, 64, 1).unwrap();
        // Batch larger than the training split.
        let err = train(&ds, small_config(2, 0), &TrainSettings {
            epochs: 1,
            batch_size: 64,
            seed: 0,
            ..TrainSettings::default()
        })
        .unwrap_err();
        assert!(matches!(err, TrainError::DatasetTooSmall(_)));

        let err = train(&ds, small_config(3, 0), &fast_settings(0)).unwrap_err();
        assert!(matches!(err, TrainError::DofMismatch { .. }));
    }
}
