//! Seeded synthetic end-to-end study: one reduced-width model trained on
//! synthetic run-to-failure bearings, then evaluated on truncated
//! synthetic test bearings in every pipeline mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{predict_from_trajectory, BearingPrediction, train_condition, training_samples, Mode, PipelineConfig, PredictionRecord};
use crate::dataio::{generate_synthetic, BearingRun, SyntheticSpec};
use crate::error::Result;
use crate::nsgpr::ConfidenceLevel;
use crate::par::Execution;
use crate::prosqn::{predict_trajectory, ProSqnModel};
use crate::scoring::accuracy_score;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub test_seeds: Vec<u64>,
    pub test_lifetime: f64,
    pub train_lifetimes: Vec<f64>,
    /// Seeds for the training bearings start here.
    pub train_seed_base: u64,
    /// Truncation is drawn uniformly from this fraction range of the lifetime.
    pub truncation: (f64, f64),
    pub pipeline: PipelineConfig,
    pub exec: Execution,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig {
            width_divisor: 8,
            ..PipelineConfig::default()
        };
        pipeline.train.epochs = 30;
        pipeline.train.batch_size = 8;
        pipeline.train.learning_rate = 1e-3;
        SuiteConfig {
            test_seeds: (0..10).collect(),
            test_lifetime: 2000.0,
            train_lifetimes: vec![1600.0, 2400.0],
            train_seed_base: 1000,
            truncation: (0.75, 0.9),
            pipeline,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub t_c: f64,
    pub y: f64,
    pub full: PredictionRecord,
    pub phase1: PredictionRecord,
    pub se: PredictionRecord,
    /// Mean |successive posterior-mean difference| beyond `t_c`, seconds.
    pub full_oscillation: f64,
    pub se_oscillation: f64,
}

/// Mean absolute step between successive posterior means after `t_c`.
pub fn oscillation(prediction: &BearingPrediction, t_c: f64) -> f64 {
    let Some(out) = &prediction.phase2 else {
        return f64::NAN;
    };
    let means: Vec<f64> = out.posterior.iter().filter(|q| q.t > t_c).map(|q| q.mean).collect();
    if means.len() < 2 {
        return 0.0;
    }
    means.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (means.len() - 1) as f64
}

fn percent_error(r: &PredictionRecord) -> f64 {
    let y = r.y.unwrap_or(f64::NAN);
    (y - r.y_hat) / y * 100.0
}

impl SeedOutcome {
    pub fn score(r: &PredictionRecord) -> f64 {
        accuracy_score(percent_error(r))
    }

    pub fn abs_error(r: &PredictionRecord) -> f64 {
        percent_error(r).abs()
    }

    pub fn full_covers(&self, level: ConfidenceLevel) -> bool {
        self.full
            .bounds
            .iter()
            .find(|b| b.level == level)
            .is_some_and(|b| b.lower <= self.y && self.y <= b.upper)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub loss_history: Vec<f64>,
    pub outcomes: Vec<SeedOutcome>,
}

impl SuiteReport {
    pub fn full_at_least_phase1(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| SeedOutcome::score(&o.full) >= SeedOutcome::score(&o.phase1))
            .count()
    }

    pub fn local_beats_se(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| SeedOutcome::abs_error(&o.full) < SeedOutcome::abs_error(&o.se))
            .count()
    }

    pub fn local_smoother(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.full_oscillation <= o.se_oscillation)
            .count()
    }

    pub fn covered(&self, level: ConfidenceLevel) -> usize {
        self.outcomes.iter().filter(|o| o.full_covers(level)).count()
    }
}

pub fn train_spec(config: &SuiteConfig, k: usize) -> SyntheticSpec {
    SyntheticSpec {
        id: format!("T_{}", k + 1),
        seed: config.train_seed_base + k as u64,
        lifetime: config.train_lifetimes[k],
        ..SyntheticSpec::default()
    }
}

pub fn test_spec(config: &SuiteConfig, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        id: format!("S_{seed}"),
        seed,
        lifetime: config.test_lifetime,
        ..SyntheticSpec::default()
    }
}

pub fn train_suite_model(config: &SuiteConfig) -> Result<(ProSqnModel, Vec<f64>)> {
    let runs = (0..config.train_lifetimes.len())
        .map(|k| generate_synthetic(&train_spec(config, k), config.exec))
        .collect::<Result<Vec<BearingRun>>>()?;
    let samples = training_samples(&runs, &config.pipeline.stft, config.exec)?;
    let t_max = config.train_lifetimes.iter().copied().fold(0.0, f64::max);
    let out = train_condition(&samples, t_max, &config.pipeline, config.exec)?;
    Ok((out.model, out.loss_history))
}

/// Seed-derived truncation of a synthetic run: returns the censored run and
/// the true RUL at truncation.
pub fn truncate_seeded(run: &BearingRun, seed: u64, range: (f64, f64)) -> Result<(BearingRun, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frac = rng.random_range(range.0..range.1);
    run.truncate(frac * run.end_time())
}

pub fn evaluate_seed(model: &ProSqnModel, config: &SuiteConfig, seed: u64) -> Result<SeedOutcome> {
    let spec = test_spec(config, seed);
    let run = generate_synthetic(&spec, config.exec)?;
    let (truncated, y) = truncate_seeded(&run, seed, config.truncation)?;
    let t_c = truncated.end_time();
    let trajectory = predict_trajectory(model, &truncated.snapshots, &config.pipeline.stft, config.exec)?;
    let mut pc = config.pipeline.clone();
    pc.fit.seed = seed;
    let predict = |mode| predict_from_trajectory(&spec.id, trajectory.clone(), Some(y), mode, &pc);
    let full = predict(Mode::Full)?;
    let se = predict(Mode::SeBaseline)?;
    Ok(SeedOutcome {
        seed,
        t_c,
        y,
        full_oscillation: oscillation(&full, t_c),
        se_oscillation: oscillation(&se, t_c),
        full: full.record,
        phase1: predict(Mode::Phase1Only)?.record,
        se: se.record,
    })
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let (model, loss_history) = train_suite_model(config)?;
    let outcomes = config
        .test_seeds
        .iter()
        .map(|&s| evaluate_seed(&model, config, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { loss_history, outcomes })
}
