//! The prognostic SqueezeNet: a SqueezeNet-style feature extractor over a
//! 64×64 spectrogram, a four-unit latent layer, and a small dense head that
//! also receives the normalized snapshot time.

mod audit;
mod network;
mod train;

pub use audit::{audit_architecture, AuditReport, AuditRow, EXPECTED_TOTAL_BYTES, EXPECTED_TOTAL_WEIGHTS};
pub use network::{fire_backward, fire_forward, FireCache, FireModule, ForwardCache, ProSqnModel};
pub use train::{
    batch_gradient, predict_trajectory, train, TrainConfig, TrainOutcome, TrainingSample,
};

use crate::error::{Error, Result};

/// Channel counts of one fire module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FireSpec {
    pub squeeze: usize,
    pub expand1: usize,
    pub expand3: usize,
}

impl FireSpec {
    pub const fn new(squeeze: usize, expand1: usize, expand3: usize) -> Self {
        FireSpec {
            squeeze,
            expand1,
            expand3,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.expand1 + self.expand3
    }

    /// Weight count (no biases) for an input with `c_in` channels.
    pub fn weight_count(&self, c_in: usize) -> usize {
        c_in * self.squeeze + self.squeeze * self.expand1 + 9 * self.squeeze * self.expand3
    }

    fn scaled(&self, div: usize) -> Self {
        FireSpec::new(self.squeeze / div, self.expand1 / div, self.expand3 / div)
    }
}

pub const CONV1_FILTERS: usize = 32;
pub const CONV1_KERNEL: usize = 6;
pub const CONV1_STRIDE: usize = 2;
pub const CONV10_FILTERS: usize = 1024;
pub const POOL_KERNEL: usize = 3;
pub const POOL_STRIDE: usize = 2;
pub const LATENT: usize = 4;
pub const DEN2_UNITS: usize = 100;
pub const DEN3_UNITS: usize = 30;

/// Fire2 … Fire9 at full width.
pub const FIRE_SPECS: [FireSpec; 8] = [
    FireSpec::new(16, 32, 32),
    FireSpec::new(16, 64, 64),
    FireSpec::new(32, 128, 128),
    FireSpec::new(32, 128, 128),
    FireSpec::new(48, 192, 192),
    FireSpec::new(48, 192, 192),
    FireSpec::new(64, 256, 256),
    FireSpec::new(64, 256, 256),
];

/// Max-pooling follows Conv1, Fire3 and Fire5.
pub(crate) const POOL_AFTER_FIRE: [usize; 2] = [1, 3];

/// Network widths. `width_divisor` scales every convolutional channel count
/// (1 = the full model, 8 = the desk-scale variant); the dense head is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub width_divisor: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::FULL
    }
}

impl Architecture {
    pub const FULL: Architecture = Architecture { width_divisor: 1 };
    pub const REDUCED: Architecture = Architecture { width_divisor: 8 };

    pub fn new(width_divisor: usize) -> Result<Self> {
        if width_divisor == 0 || !CONV1_FILTERS.is_multiple_of(width_divisor) {
            return Err(Error::Config(format!(
                "width divisor {width_divisor} must divide every channel count (1, 2, 4, 8, 16)"
            )));
        }
        Ok(Architecture { width_divisor })
    }

    pub fn conv1_filters(&self) -> usize {
        CONV1_FILTERS / self.width_divisor
    }

    pub fn fire_specs(&self) -> [FireSpec; 8] {
        FIRE_SPECS.map(|f| f.scaled(self.width_divisor))
    }

    pub fn conv10_filters(&self) -> usize {
        CONV10_FILTERS / self.width_divisor
    }
}
