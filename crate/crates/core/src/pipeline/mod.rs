//! The two-phase pipeline: Pro-SQN RUL trajectory (Phase I), then GP
//! smoothing and extrapolation with confidence intervals (Phase II).

mod config;
mod record;
pub mod suite;
pub mod svg;

pub use config::{Mode, PipelineConfig};
pub use record::PredictionRecord;
pub(crate) use record::Table;


use crate::dataio::{label_rul, BearingRun};
use crate::error::{Error, Result};
use crate::nsgpr::{fit, predict_failure_time, FailureOutcome, FitConfig, FitReport, GprDataset, GprModel, KernelKind, RulPrediction};
use crate::par::Execution;
use crate::prosqn::{train, ProSqnModel, TrainConfig, TrainOutcome, TrainingSample};
use crate::tfa::{stft_batch, tfa_normalize, StftConfig, TfaImage};

/// Normalized, labeled images for one run-to-failure bearing given its raw
/// spectrograms (one per snapshot, in time order).
pub fn label_images(images: &[TfaImage], t_f: f64) -> Vec<TrainingSample> {
    images
        .iter()
        .map(|img| TrainingSample {
            image: tfa_normalize(img),
            t: img.timestamp,
            rul: t_f - img.timestamp,
        })
        .collect()
}

pub fn training_samples(runs: &[BearingRun], stft: &StftConfig, exec: Execution) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for run in runs {
        let labels = label_rul(run)?;
        let images = stft_batch(&run.snapshots, stft, exec)?;
        out.extend(images.iter().zip(labels).map(|(img, (t, rul))| TrainingSample {
            image: tfa_normalize(img),
            t,
            rul,
        }));
    }
    Ok(out)
}

/// Trains one model on the samples of an operating condition. RUL and time
/// are both scaled by the longest failure time among the training runs.
pub fn train_condition(
    samples: &[TrainingSample],
    max_failure_time: f64,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    if !(max_failure_time > 0.0) {
        return Err(Error::Input("training runs must have a positive failure time".into()));
    }
    let model = ProSqnModel::build(config.architecture()?, config.train.seed);
    let tc = TrainConfig {
        rul_scale: max_failure_time,
        time_scale: max_failure_time,
        ..config.train.clone()
    };
    train(model, samples, &tc, exec)
}

/// Phase-I RUL estimates for raw spectrograms in time order.
pub fn trajectory_from_images(model: &ProSqnModel, images: &[TfaImage], exec: Execution) -> Result<Vec<(f64, f64)>> {
    if images.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::Input("images must be strictly increasing in time".into()));
    }
    exec.map_slice(images, |img| Ok((img.timestamp, model.forward(&tfa_normalize(img), img.timestamp)?)))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct Phase2Output {
    pub model: GprModel,
    pub report: FitReport,
    pub at_truncation: RulPrediction,
    pub failure: FailureOutcome,
    /// Posterior over `[t_0, t_c + horizon]` on an even grid.
    pub posterior: Vec<RulPrediction>,
}

/// Fits the GP to a Phase-I trajectory ending at the truncation time.
pub fn phase2(trajectory: &[(f64, f64)], kind: KernelKind, config: &PipelineConfig) -> Result<Phase2Output> {
    let data = GprDataset::from_trajectory(trajectory)?;
    let fc = FitConfig {
        kind,
        ..config.fit.clone()
    };
    let (model, report) = fit(&data, &fc)?;
    let t0 = trajectory[0].0;
    let t_c = trajectory[trajectory.len() - 1].0;
    let horizon = config.horizon_for(t_c);
    let at_truncation = model.predict(t_c, &config.levels)?;
    let failure = predict_failure_time(&model, t_c, horizon, config.failure_step)?;
    let n = config.posterior_points;
    let end = t_c + horizon;
    let posterior = (0..n)
        .map(|i| model.predict(t0 + (end - t0) * i as f64 / (n - 1) as f64, &config.levels))
        .collect::<Result<Vec<_>>>()?;
    Ok(Phase2Output {
        model,
        report,
        at_truncation,
        failure,
        posterior,
    })
}

#[derive(Debug, Clone)]
pub struct BearingPrediction {
    pub trajectory: Vec<(f64, f64)>,
    pub phase2: Option<Phase2Output>,
    pub record: PredictionRecord,
}

pub fn predict_from_trajectory(
    bearing: &str,
    trajectory: Vec<(f64, f64)>,
    truth: Option<f64>,
    mode: Mode,
    config: &PipelineConfig,
) -> Result<BearingPrediction> {
    let &(t_c, last) = trajectory
        .last()
        .ok_or_else(|| Error::Input(format!("bearing {bearing} has an empty trajectory")))?;
    let mut record = PredictionRecord {
        bearing: bearing.to_string(),
        mode,
        t_c,
        y_hat: last,
        y: truth,
        failure_time: None,
        horizon_exceeded: false,
        bounds: Vec::new(),
    };
    let phase2 = match mode.kernel() {
        None => None,
        Some(kind) => {
            let out = phase2(&trajectory, kind, config)?;
            record.y_hat = out.at_truncation.mean;
            record.bounds = out.at_truncation.bounds.clone();
            match out.failure {
                FailureOutcome::Failure { time, .. } => record.failure_time = Some(time),
                FailureOutcome::HorizonExceeded { .. } => record.horizon_exceeded = true,
            }
            Some(out)
        }
    };
    Ok(BearingPrediction {
        trajectory,
        phase2,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_trajectory() -> Vec<(f64, f64)> {
        (0..40)
            .map(|i| {
                let t = i as f64 * 10.0;
                (t, 600.0 - t + 8.0 * ((i * 7 % 5) as f64 - 2.0))
            })
            .collect()
    }

    fn quick() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.fit.restarts = 2;
        c.fit.max_iters = 300;
        c.fit.exec = Execution::Sequential;
        c
    }

    #[test]
    fn phase1_only_reports_last_estimate() {
        let p = predict_from_trajectory("b", linear_trajectory(), Some(210.0), Mode::Phase1Only, &quick()).unwrap();
        assert!(p.phase2.is_none());
        assert_eq!(p.record.y_hat, linear_trajectory()[39].1);
        assert!(p.record.bounds.is_empty());
    }

    #[test]
    fn full_mode_tracks_linear_decay() {
        let p = predict_from_trajectory("b", linear_trajectory(), Some(210.0), Mode::Full, &quick()).unwrap();
        // default horizon 0.5·t_c ends at 585 s, before the true failure at 600 s
        assert!(p.record.horizon_exceeded && p.record.failure_time.is_none());
        let cfg = PipelineConfig {
            horizon: Some(400.0),
            ..quick()
        };
        let p = predict_from_trajectory("b", linear_trajectory(), Some(210.0), Mode::Full, &cfg).unwrap();
        let out = p.phase2.unwrap();
        assert!((p.record.y_hat - 210.0).abs() < 25.0, "{}", p.record.y_hat);
        assert_eq!(out.posterior.len(), 201);
        assert_eq!(out.posterior[200].t, 390.0 + 400.0);
        let ft = p.record.failure_time.expect("crosses zero within the horizon");
        assert!((ft - 600.0).abs() < 60.0, "{ft}");
    }
}
