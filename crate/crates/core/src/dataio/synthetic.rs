use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::run::{BearingRun, RunEnd};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::tfa::{snapshot_len, VibrationSnapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude: f64,
}

impl Tone {
    pub const fn new(freq_hz: f64, amplitude: f64) -> Self {
        Tone { freq_hz, amplitude }
    }
}

/// A synthetic run-to-failure bearing. Before onset the signal is the base
/// tones over a white noise floor. After onset, with degradation
/// `d = (t − t_onset)/(t_f − t_onset)` rising from 0 to 1, the onset tones
/// fade in linearly, the noise standard deviation grows as
/// `noise_floor·(1 + noise_growth·d²)` and decaying 3 kHz impulses arrive
/// at a Poisson rate of `impulse_rate·d²` per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub id: String,
    pub condition: u8,
    pub seed: u64,
    /// Failure time t_f, seconds.
    pub lifetime: f64,
    pub cadence: f64,
    pub sample_rate: f64,
    pub base_tones: Vec<Tone>,
    /// Onset tones with their amplitude at failure.
    pub onset_tones: Vec<Tone>,
    pub onset_fraction: f64,
    pub impulse_rate: f64,
    pub noise_floor: f64,
    pub noise_growth: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            id: "S_1".into(),
            condition: 1,
            seed: 0,
            lifetime: 2000.0,
            cadence: 10.0,
            sample_rate: 25_600.0,
            base_tones: vec![Tone::new(4000.0, 1.0)],
            onset_tones: vec![Tone::new(1800.0, 0.6), Tone::new(3800.0, 0.4), Tone::new(6000.0, 0.5)],
            onset_fraction: 0.6,
            impulse_rate: 6.0,
            noise_floor: 0.05,
            noise_growth: 20.0,
        }
    }
}

const IMPULSE_FREQ: f64 = 3000.0;
const IMPULSE_DECAY: f64 = 0.002;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, msg: &str| if c { Ok(()) } else { Err(Error::Parameter(msg.to_string())) };
        ok(self.onset_fraction > 0.0 && self.onset_fraction < 1.0, "onset fraction must lie in (0, 1)")?;
        ok(self.cadence > 0.0 && self.lifetime > 0.0, "lifetime and cadence must be positive")?;
        let steps = self.lifetime / self.cadence;
        ok((steps - steps.round()).abs() < 1e-9, "lifetime must be a multiple of the cadence")?;
        ok(self.sample_rate > 0.0, "sample rate must be positive")?;
        ok(
            self.noise_floor >= 0.0 && self.noise_growth >= 0.0 && self.impulse_rate >= 0.0,
            "noise and impulse parameters must be nonnegative",
        )?;
        let nyquist = self.sample_rate / 2.0;
        ok(
            self.base_tones
                .iter()
                .chain(&self.onset_tones)
                .all(|t| t.freq_hz > 0.0 && t.freq_hz < nyquist),
            "tone frequencies must lie below the Nyquist frequency",
        )
    }

    pub fn n_snapshots(&self) -> usize {
        (self.lifetime / self.cadence).round() as usize + 1
    }

    pub fn onset_time(&self) -> f64 {
        self.onset_fraction * self.lifetime
    }

    /// Degradation level in [0, 1] at time `t`.
    pub fn degradation(&self, t: f64) -> f64 {
        let onset = self.onset_time();
        ((t - onset) / (self.lifetime - onset)).clamp(0.0, 1.0)
    }

    fn snapshot(&self, index: usize) -> Result<VibrationSnapshot> {
        let t = index as f64 * self.cadence;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let n = snapshot_len(self.sample_rate);
        let fs = self.sample_rate;
        let d = self.degradation(t);
        let sd = self.noise_floor * (1.0 + self.noise_growth * d * d);
        let noise = Normal::new(0.0, sd).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut x: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
        let add_tone = |x: &mut [f64], tone: &Tone, amp: f64, phase: f64| {
            for (j, v) in x.iter_mut().enumerate() {
                *v += amp * (2.0 * PI * tone.freq_hz * j as f64 / fs + phase).sin();
            }
        };
        for tone in &self.base_tones {
            let phase = rng.random::<f64>() * 2.0 * PI;
            add_tone(&mut x, tone, tone.amplitude, phase);
        }
        if d > 0.0 {
            for tone in &self.onset_tones {
                let phase = rng.random::<f64>() * 2.0 * PI;
                add_tone(&mut x, tone, tone.amplitude * d, phase);
            }
            let rate = self.impulse_rate * d * d;
            let count = if rate > 0.0 {
                Poisson::new(rate).map_err(|e| Error::Parameter(e.to_string()))?.sample(&mut rng) as usize
            } else {
                0
            };
            for _ in 0..count {
                let start = rng.random_range(0..n);
                let amp = 2.0 * (1.0 + d);
                for (j, v) in x[start..].iter_mut().enumerate() {
                    let tau = j as f64 / fs;
                    *v += amp * (-tau / IMPULSE_DECAY).exp() * (2.0 * PI * IMPULSE_FREQ * tau).sin();
                }
            }
        }
        VibrationSnapshot::new(t, x, fs)
    }
}

/// Generates the full run-to-failure recording. Each snapshot draws from its
/// own random stream, so output is identical under either execution policy.
pub fn generate_synthetic(spec: &SyntheticSpec, exec: Execution) -> Result<BearingRun> {
    spec.validate()?;
    let snapshots = exec
        .map_range(spec.n_snapshots(), |i| spec.snapshot(i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BearingRun {
        id: spec.id.clone(),
        condition: spec.condition,
        snapshots,
        end: RunEnd::Failure(spec.lifetime),
    })
}
