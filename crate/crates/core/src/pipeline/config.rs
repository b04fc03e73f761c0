use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv;
use crate::nsgpr::{ConfidenceLevel, FitConfig, KernelKind};
use crate::prosqn::{Architecture, TrainConfig};
use crate::tfa::{StftConfig, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    /// Pro-SQN trajectory smoothed and extrapolated by the local-length GP.
    Full,
    /// Pro-SQN output at truncation, no Phase II.
    Phase1Only,
    /// Phase II with a single universal squared-exponential length.
    SeBaseline,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Full, Mode::Phase1Only, Mode::SeBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Phase1Only => "phase1-only",
            Mode::SeBaseline => "se-baseline",
        }
    }

    pub fn kernel(self) -> Option<KernelKind> {
        match self {
            Mode::Full => Some(KernelKind::Local),
            Mode::SeBaseline => Some(KernelKind::SquaredExponential),
            Mode::Phase1Only => None,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (full, phase1-only, se-baseline)")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: Mode,
    pub levels: Vec<ConfidenceLevel>,
    /// Extrapolation beyond truncation, seconds. `None` means half of t_c.
    pub horizon: Option<f64>,
    pub stft: StftConfig,
    pub train: TrainConfig,
    pub width_divisor: usize,
    pub fit: FitConfig,
    /// Grid spacing of the failure-time scan, seconds.
    pub failure_step: f64,
    /// Points in the emitted posterior trajectory.
    pub posterior_points: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            out: PathBuf::from("out"),
            mode: Mode::Full,
            levels: ConfidenceLevel::ALL.to_vec(),
            horizon: None,
            stft: StftConfig::default(),
            train: TrainConfig::default(),
            width_divisor: 1,
            fit: FitConfig::default(),
            failure_step: 10.0,
            posterior_points: 201,
        }
    }
}

impl PipelineConfig {
    /// Applies `key=value` settings. Relative paths resolve against `base`.
    pub fn apply_text(&mut self, text: &str, origin: &Path, base: &Path) -> Result<()> {
        for e in kv::parse(text, origin)? {
            match e.key.as_str() {
                "manifest" => self.manifest = Some(base.join(&e.value)),
                "out" => self.out = base.join(&e.value),
                "mode" => self.mode = e.value.parse()?,
                "levels" => self.levels = ConfidenceLevel::parse_list(&e.value)?,
                "horizon" => self.horizon = Some(kv::parse_value(&e, origin)?),
                "seed" => self.set_seed(kv::parse_value(&e, origin)?),
                "width_divisor" => self.width_divisor = kv::parse_value(&e, origin)?,
                "epochs" => self.train.epochs = kv::parse_value(&e, origin)?,
                "batch_size" => self.train.batch_size = kv::parse_value(&e, origin)?,
                "learning_rate" => self.train.learning_rate = kv::parse_value(&e, origin)?,
                "final_lr_fraction" => self.train.final_lr_fraction = kv::parse_value(&e, origin)?,
                "shuffle" => self.train.shuffle = kv::parse_value(&e, origin)?,
                "window" => self.stft.window = e.value.parse::<WindowKind>()?,
                "frame_length" => self.stft.frame_length = kv::parse_value(&e, origin)?,
                "hop" => self.stft.hop = kv::parse_value(&e, origin)?,
                "fft_size" => self.stft.fft_size = kv::parse_value(&e, origin)?,
                "restarts" => self.fit.restarts = kv::parse_value(&e, origin)?,
                "max_iters" => self.fit.max_iters = kv::parse_value(&e, origin)?,
                "support_points" => self.fit.support_points = kv::parse_value(&e, origin)?,
                "support_extent" => self.fit.support_extent = kv::parse_value(&e, origin)?,
                "initial_length" => self.fit.initial_length = kv::parse_value(&e, origin)?,
                "failure_step" => self.failure_step = kv::parse_value(&e, origin)?,
                "posterior_points" => self.posterior_points = kv::parse_value(&e, origin)?,
                key => {
                    return Err(Error::Config(format!(
                        "{}:{}: unknown key {key:?}",
                        origin.display(),
                        e.line
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config not found: {}", path.display())),
            _ => Error::io(path, e),
        })?;
        let mut c = PipelineConfig::default();
        c.apply_text(&text, path, path.parent().unwrap_or(Path::new(".")))?;
        Ok(c)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.fit.seed = seed;
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.width_divisor).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate()?;
        self.architecture()?;
        if self.levels.is_empty() {
            return Err(Error::Config("at least one confidence level is required".into()));
        }
        if let Some(h) = self.horizon {
            if !(h >= 0.0) {
                return Err(Error::Config(format!("horizon must be nonnegative, got {h}")));
            }
        }
        if !(self.failure_step > 0.0) || self.posterior_points < 2 || self.fit.restarts == 0 {
            return Err(Error::Config(
                "failure_step must be positive, posterior_points >= 2 and restarts >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn horizon_for(&self, t_c: f64) -> f64 {
        self.horizon.unwrap_or(0.5 * t_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applies_keys() {
        let mut c = PipelineConfig::default();
        c.apply_text(
            "mode = se-baseline\nlevels = 90\nseed = 7\nepochs = 3 # short\nmanifest = data/m.txt\n",
            Path::new("c"),
            Path::new("/w"),
        )
        .unwrap();
        assert_eq!(c.mode, Mode::SeBaseline);
        assert_eq!(c.levels, vec![ConfidenceLevel::P90]);
        assert_eq!((c.train.seed, c.fit.seed, c.train.epochs), (7, 7, 3));
        assert_eq!(c.manifest, Some(PathBuf::from("/w/data/m.txt")));
        c.validate().unwrap();
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = PipelineConfig::default();
        assert!(matches!(
            c.apply_text("epochs = many\n", Path::new("c"), Path::new(".")),
            Err(Error::Config(_))
        ));
        assert!(c.apply_text("colour = red\n", Path::new("c"), Path::new(".")).is_err());
        assert!("fast".parse::<Mode>().is_err());
    }

    #[test]
    fn default_horizon_is_half_truncation() {
        assert_eq!(PipelineConfig::default().horizon_for(23010.0), 11505.0);
    }
}
