//! Hyperparameter search: multi-restart Nelder–Mead on the log marginal
//! likelihood over log-transformed parameters.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::field::{LengthScaleField, LOG_LENGTH_BOUNDS};
use super::gp::{
    combined_kernel_matrix, log_marginal_likelihood, trend_basis, GprDataset, GprModel, KernelParams,
    LengthModel,
};
use super::simplex::{nelder_mead, SimplexOptions};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Dot product + local length-scale kernel.
    Local,
    /// Dot product + squared exponential with one universal length.
    SquaredExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub kind: KernelKind,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub support_points: usize,
    /// Support points span [0, support_extent] in normalized time.
    pub support_extent: f64,
    pub initial_length: f64,
    pub exec: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kind: KernelKind::Local,
            seed: 0,
            restarts: 5,
            max_iters: 2000,
            support_points: 8,
            support_extent: 1.25,
            initial_length: 0.2,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
    /// Final log likelihood of each restart, in restart order.
    pub restart_log_likelihoods: Vec<f64>,
    pub best_restart: usize,
}

// Box on the unconstrained coordinates; outside it the objective is +inf.
const LOG_SIGMA_RANGE: (f64, f64) = (-10.0, 4.0);
const LOG_LENGTH_RANGE: (f64, f64) = LOG_LENGTH_BOUNDS;
const LOG_L2_RANGE: (f64, f64) = (-3.0, 1.6);
const LOG_S2_RANGE: (f64, f64) = (-4.0, 4.0);

/// Maps between `KernelParams` and the optimizer's coordinate vector.
#[derive(Debug, Clone)]
pub struct ParamCodec {
    kind: KernelKind,
    support: Vec<f64>,
}

impl ParamCodec {
    pub fn new(config: &FitConfig) -> Result<Self> {
        let k = config.support_points;
        if config.kind == KernelKind::Local && k < 2 {
            return Err(Error::Config("need at least 2 length-scale support points".into()));
        }
        let support = (0..k)
            .map(|j| config.support_extent * j as f64 / (k.max(2) - 1) as f64)
            .collect();
        Ok(ParamCodec {
            kind: config.kind,
            support,
        })
    }

    fn ranges(&self) -> Vec<(f64, f64)> {
        let mut r = vec![LOG_SIGMA_RANGE; 3];
        match self.kind {
            KernelKind::Local => {
                r.extend(std::iter::repeat_n(LOG_LENGTH_RANGE, self.support.len()));
                r.push(LOG_L2_RANGE);
                r.push(LOG_S2_RANGE);
            }
            KernelKind::SquaredExponential => r.push(LOG_LENGTH_RANGE),
        }
        r
    }

    pub fn decode(&self, v: &[f64]) -> Result<KernelParams> {
        let lengths = match self.kind {
            KernelKind::Local => {
                let k = self.support.len();
                LengthModel::Local(LengthScaleField::new(
                    self.support.clone(),
                    v[3..3 + k].to_vec(),
                    v[3 + k].exp(),
                    v[4 + k].exp(),
                )?)
            }
            KernelKind::SquaredExponential => LengthModel::Universal { length: v[3].exp() },
        };
        Ok(KernelParams {
            sigma0: v[0].exp(),
            sigmaf: v[1].exp(),
            sigmae: v[2].exp(),
            lengths,
        })
    }

    pub fn encode(&self, p: &KernelParams) -> Vec<f64> {
        let mut v = vec![p.sigma0.ln(), p.sigmaf.ln(), p.sigmae.ln()];
        match &p.lengths {
            LengthModel::Local(f) => {
                v.extend_from_slice(f.log_lengths());
                v.push(f.length2().ln());
                v.push(f.scale2().ln());
            }
            LengthModel::Universal { length } => v.push(length.ln()),
        }
        v
    }

    fn feasible(&self, v: &[f64]) -> bool {
        v.iter().zip(self.ranges()).all(|(x, (lo, hi))| (lo..=hi).contains(x))
    }

    fn clamp(&self, v: &mut [f64]) {
        for (x, (lo, hi)) in v.iter_mut().zip(self.ranges()) {
            *x = x.clamp(lo, hi);
        }
    }

    /// Starting point from the residual spread of an ordinary least-squares
    /// quadratic fit.
    pub fn heuristic_start(&self, data: &GprDataset, initial_length: f64) -> Vec<f64> {
        let h = trend_basis(&data.x);
        let y = DVector::from_column_slice(&data.y);
        let resid_sd = (h.transpose() * &h)
            .cholesky()
            .map(|c| {
                let beta = c.solve(&(h.transpose() * &y));
                let r = &y - &h * beta;
                (r.norm_squared() / r.len() as f64).sqrt()
            })
            .unwrap_or(0.1);
        let sd = resid_sd.max(1e-3);
        let mut v = vec![0.1f64.ln(), sd.ln(), (0.5 * sd).ln()];
        match self.kind {
            KernelKind::Local => {
                v.extend(std::iter::repeat_n(initial_length.ln(), self.support.len()));
                v.push(0.3f64.ln());
                v.push(0.0);
            }
            KernelKind::SquaredExponential => v.push(initial_length.ln()),
        }
        self.clamp(&mut v);
        v
    }

    fn objective(&self, data: &GprDataset, v: &[f64]) -> f64 {
        if !self.feasible(v) {
            return f64::INFINITY;
        }
        match self.decode(v) {
            Ok(p) => -log_marginal_likelihood(data, &p),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Fits hyperparameters by maximizing the log marginal likelihood.
/// Restart 0 starts at the heuristic point; the others start at seeded
/// Gaussian perturbations of it. Ties are broken by restart index.
pub fn fit(data: &GprDataset, config: &FitConfig) -> Result<(GprModel, FitReport)> {
    if config.restarts == 0 {
        return Err(Error::Config("restart count must be positive".into()));
    }
    let codec = ParamCodec::new(config)?;
    let start = codec.heuristic_start(data, config.initial_length);
    let initial = -codec.objective(data, &start);
    let opts = SimplexOptions {
        max_iters: config.max_iters,
        ..SimplexOptions::default()
    };
    let results = config.exec.map_range(config.restarts, |r| {
        let mut x0 = start.clone();
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(1_000_003).wrapping_add(r as u64));
            let normal = Normal::new(0.0, 0.5).unwrap();
            for v in &mut x0 {
                *v += normal.sample(&mut rng);
            }
            codec.clamp(&mut x0);
        }
        nelder_mead(|v| codec.objective(data, v), &x0, opts)
    });
    let lls: Vec<f64> = results.iter().map(|r| -r.f).collect();
    let best = (0..results.len())
        .filter(|&i| lls[i].is_finite())
        .max_by(|&a, &b| lls[a].total_cmp(&lls[b]).then(b.cmp(&a)))
        .ok_or_else(|| Error::Fit("every restart failed to factorize the covariance".into()))?;
    let params = codec.decode(&results[best].x)?;
    let model = GprModel::condition(data.clone(), params)?;
    Ok((
        model,
        FitReport {
            initial_log_likelihood: initial,
            log_likelihood: lls[best],
            restart_log_likelihoods: lls,
            best_restart: best,
        },
    ))
}

/// Symmetric kernel matrix plus noise, exposed for diagnostics.
pub fn noisy_kernel_matrix(x: &[f64], params: &KernelParams) -> nalgebra::DMatrix<f64> {
    let mut k = combined_kernel_matrix(x, x, params);
    for i in 0..x.len() {
        k[(i, i)] += params.sigmae * params.sigmae;
    }
    k
}
