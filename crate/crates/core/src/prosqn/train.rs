use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ProSqnModel;
use crate::error::{Error, Result};
use crate::ndnn::{AdamConfig, OptimizerState, Tensor};
use crate::par::Execution;
use crate::tfa::{stft, tfa_normalize, StftConfig, TfaImage, VibrationSnapshot};

/// One labeled example: a normalized spectrogram, its time and true RUL (seconds).
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub image: TfaImage,
    pub t: f64,
    pub rul: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Divisor applied to RUL targets, seconds.
    pub rul_scale: f64,
    /// Divisor applied to the time input, seconds.
    pub time_scale: f64,
    pub shuffle: bool,
    /// Final learning rate as a fraction of the initial one (cosine schedule).
    pub final_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            rul_scale: 1.0,
            time_scale: 1.0,
            shuffle: true,
            final_lr_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.rul_scale > 0.0) || !(self.time_scale > 0.0) {
            return Err(Error::Config(
                "learning_rate must be >= 0 and rul_scale, time_scale > 0".into(),
            ));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let progress = epoch as f64 / (self.epochs - 1) as f64;
        let floor = self.final_lr_fraction;
        self.learning_rate * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProSqnModel,
    /// Mean squared error on normalized RUL over the whole dataset after each epoch.
    pub loss_history: Vec<f64>,
}

fn input_tensor(sample: &TrainingSample) -> Result<Tensor<f32>> {
    Tensor::from_vec(&[64, 64, 1], sample.image.values.clone())
}

/// Mean loss and mean parameter gradient over `batch`. Per-sample gradients
/// are reduced in batch order, so the result does not depend on threading.
pub fn batch_gradient(
    model: &ProSqnModel,
    batch: &[&TrainingSample],
    exec: Execution,
) -> Result<(f64, ProSqnModel)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let rul_scale = model.rul_scale as f64;
    let per_sample = exec.map_slice(batch, |s| -> Result<(f64, ProSqnModel)> {
        let cache = model.forward_cached(&input_tensor(s)?, model.normalize_time(s.t))?;
        let target = (s.rul / rul_scale) as f32;
        let diff = cache.output - target;
        let mut grad = model.zeros_like();
        model.backward(&cache, 2.0 * diff, &mut grad)?;
        Ok(((diff as f64).powi(2), grad))
    });
    let mut total = model.zeros_like();
    let mut loss = 0.0;
    for item in per_sample {
        let (l, g) = item?;
        loss += l;
        for (acc, part) in total.param_slices_mut().into_iter().zip(g.param_slices()) {
            for (a, &b) in acc.iter_mut().zip(part) {
                *a += b;
            }
        }
    }
    let inv = 1.0 / batch.len() as f32;
    for p in total.param_slices_mut() {
        p.iter_mut().for_each(|v| *v *= inv);
    }
    Ok((loss / batch.len() as f64, total))
}

fn dataset_loss(model: &ProSqnModel, data: &[TrainingSample], exec: Execution) -> Result<f64> {
    let rul_scale = model.rul_scale as f64;
    let losses = exec.map_slice(data, |s| -> Result<f64> {
        let out = model.forward_normalized(&input_tensor(s)?, model.normalize_time(s.t))?;
        Ok((out as f64 - s.rul / rul_scale).powi(2))
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len() as f64)
}

/// Minibatch Adam on mean squared error of normalized RUL with a cosine
/// learning-rate schedule.
pub fn train(
    mut model: ProSqnModel,
    data: &[TrainingSample],
    config: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Input("training dataset is empty".into()));
    }
    model.rul_scale = config.rul_scale as f32;
    model.time_scale = config.time_scale as f32;
    let shapes: Vec<usize> = model.param_slices().iter().map(|p| p.len()).collect();
    let mut opt = OptimizerState::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &shapes,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        opt.config.learning_rate = config.lr_at(epoch);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = batch_gradient(&model, &batch, exec)?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: "non-finite batch loss".into(),
                });
            }
            let grads = grad.param_slices();
            opt.adam_step(&mut model.param_slices_mut(), &grads)?;
        }
        let loss = dataset_loss(&model, data, exec)?;
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: "non-finite epoch loss".into(),
            });
        }
        history.push(loss);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Phase-I output: one RUL estimate per snapshot, in order.
pub fn predict_trajectory(
    model: &ProSqnModel,
    snapshots: &[VibrationSnapshot],
    stft_config: &StftConfig,
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    if snapshots.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::Input("snapshots must be strictly increasing in time".into()));
    }
    exec.map_slice(snapshots, |s| -> Result<(f64, f64)> {
        let image = tfa_normalize(&stft(s, stft_config)?);
        Ok((s.timestamp, model.forward(&image, s.timestamp)?))
    })
    .into_iter()
    .collect()
}
