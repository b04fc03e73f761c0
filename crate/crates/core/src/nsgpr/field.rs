//! Input-dependent length scale: log-lengths at support points,
//! interpolated by a noise-free squared-exponential GP whose prior mean is
//! the average log-length.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernels::se_unchecked;
use crate::error::{Error, Result};

/// Relative diagonal jitter keeping the support covariance factorizable.
const SUPPORT_JITTER: f64 = 1e-12;

/// Range of the log-length, both at the support points and anywhere the
/// field is evaluated.
pub const LOG_LENGTH_BOUNDS: (f64, f64) = (-4.6, 1.6);

#[derive(Debug, Clone)]
pub struct LengthScaleField {
    support: Vec<f64>,
    log_lengths: Vec<f64>,
    length2: f64,
    scale2: f64,
    prior_mean: f64,
    weights: DVector<f64>,
}

impl LengthScaleField {
    pub fn new(support: Vec<f64>, log_lengths: Vec<f64>, length2: f64, scale2: f64) -> Result<Self> {
        if support.is_empty() || support.len() != log_lengths.len() {
            return Err(Error::Parameter(format!(
                "{} support points but {} log-lengths",
                support.len(),
                log_lengths.len()
            )));
        }
        if support.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("support points must be strictly increasing".into()));
        }
        if !(length2 > 0.0 && scale2 > 0.0) || log_lengths.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("second-level GP parameters must be positive and finite".into()));
        }
        let k = support.len();
        let s2 = scale2 * scale2;
        let cov = DMatrix::from_fn(k, k, |i, j| {
            se_unchecked(support[i], support[j], length2, scale2) + if i == j { SUPPORT_JITTER * s2 } else { 0.0 }
        });
        let chol: Cholesky<f64, Dyn> = Cholesky::new(cov)
            .ok_or_else(|| Error::Parameter("second-level covariance is singular".into()))?;
        let prior_mean = log_lengths.iter().sum::<f64>() / k as f64;
        let resid = DVector::from_iterator(k, log_lengths.iter().map(|v| v - prior_mean));
        let weights = chol.solve(&resid);
        Ok(LengthScaleField {
            support,
            log_lengths,
            length2,
            scale2,
            prior_mean,
            weights,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn log_lengths(&self) -> &[f64] {
        &self.log_lengths
    }

    pub fn length2(&self) -> f64 {
        self.length2
    }

    pub fn scale2(&self) -> f64 {
        self.scale2
    }

    /// Latent log-length at `x`. Outside the support hull the field is held
    /// at its boundary value; the result is clamped to [`LOG_LENGTH_BOUNDS`].
    pub fn log_length_at(&self, x: f64) -> f64 {
        let x = x.clamp(self.support[0], self.support[self.support.len() - 1]);
        let v = self.prior_mean
            + self
                .support
                .iter()
                .zip(self.weights.iter())
                .map(|(&s, &w)| w * se_unchecked(x, s, self.length2, self.scale2))
                .sum::<f64>();
        v.clamp(LOG_LENGTH_BOUNDS.0, LOG_LENGTH_BOUNDS.1)
    }

    /// Length scale `l(x) > 0`.
    pub fn length_at(&self, x: f64) -> f64 {
        self.log_length_at(x).exp()
    }
}
