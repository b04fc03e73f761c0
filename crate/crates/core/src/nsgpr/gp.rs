use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};

use super::field::LengthScaleField;
use super::kernels::{dot_product_kernel, local_kernel_unchecked, se_unchecked};
use crate::error::{Error, Result};

/// How the stationary-looking part of the covariance gets its length scale.
#[derive(Debug, Clone)]
pub enum LengthModel {
    /// Input-dependent length from a second-level GP.
    Local(LengthScaleField),
    /// One length for the whole input range (squared-exponential baseline).
    Universal { length: f64 },
}

/// Covariance hyperparameters: dot-product offset `sigma0`, signal scale
/// `sigmaf`, observation noise `sigmae`, and the length model.
#[derive(Debug, Clone)]
pub struct KernelParams {
    pub sigma0: f64,
    pub sigmaf: f64,
    pub sigmae: f64,
    pub lengths: LengthModel,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.sigma0) && ok(self.sigmaf) && ok(self.sigmae)) {
            return Err(Error::Parameter(format!(
                "sigma0, sigmaf, sigmae must be positive (got {}, {}, {})",
                self.sigma0, self.sigmaf, self.sigmae
            )));
        }
        if let LengthModel::Universal { length } = self.lengths {
            if !ok(length) {
                return Err(Error::Parameter(format!("length must be positive, got {length}")));
            }
        }
        Ok(())
    }

    fn length_at(&self, x: f64) -> f64 {
        match &self.lengths {
            LengthModel::Local(field) => field.length_at(x),
            LengthModel::Universal { length } => *length,
        }
    }

    /// Covariance between two inputs whose lengths are already known.
    #[inline]
    fn cov(&self, xi: f64, xj: f64, li: f64, lj: f64) -> f64 {
        let stationary = match self.lengths {
            LengthModel::Universal { length } => se_unchecked(xi, xj, length, self.sigmaf),
            LengthModel::Local(_) => local_kernel_unchecked(xi, xj, li, lj, self.sigmaf),
        };
        dot_product_kernel(xi, xj, self.sigma0) + stationary
    }

    /// Prior variance at one input.
    pub fn prior_variance(&self, x: f64) -> f64 {
        let l = self.length_at(x);
        self.cov(x, x, l, l)
    }
}

/// Dot-product plus length-scale covariance between two input sets.
pub fn combined_kernel_matrix(xa: &[f64], xb: &[f64], params: &KernelParams) -> DMatrix<f64> {
    let la: Vec<f64> = xa.iter().map(|&x| params.length_at(x)).collect();
    if std::ptr::eq(xa, xb) || xa == xb {
        let n = xa.len();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = params.cov(xa[i], xa[j], la[i], la[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        return k;
    }
    let lb: Vec<f64> = xb.iter().map(|&x| params.length_at(x)).collect();
    DMatrix::from_fn(xa.len(), xb.len(), |i, j| params.cov(xa[i], xb[j], la[i], lb[j]))
}

/// Quadratic trend basis `[1, x, x²]`, one row per input.
pub fn trend_basis(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 3, |i, j| x[i].powi(j as i32))
}

/// Normalized regression data: inputs on [0, 1] over the observed span,
/// outputs divided by their largest magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GprDataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Time at x = 0, seconds.
    pub t_offset: f64,
    /// Seconds per unit of x.
    pub t_scale: f64,
    /// Seconds per unit of y.
    pub y_scale: f64,
}

/// Largest trajectory fitted directly; longer ones are subsampled.
pub const MAX_FIT_POINTS: usize = 500;
pub const MIN_FIT_POINTS: usize = 4;

impl GprDataset {
    /// Already-normalized data with unit scales.
    pub fn from_normalized(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Input(format!("{} inputs vs {} outputs", x.len(), y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("GP inputs must be strictly increasing".into()));
        }
        Ok(GprDataset {
            x,
            y,
            t_offset: 0.0,
            t_scale: 1.0,
            y_scale: 1.0,
        })
    }

    /// Normalizes a `(t, rul)` trajectory. Trajectories longer than
    /// [`MAX_FIT_POINTS`] are evenly subsampled, always keeping the last point.
    pub fn from_trajectory(trajectory: &[(f64, f64)]) -> Result<Self> {
        if trajectory.len() < MIN_FIT_POINTS {
            return Err(Error::Input(format!(
                "need at least {MIN_FIT_POINTS} trajectory points, got {}",
                trajectory.len()
            )));
        }
        let points = subsample(trajectory, MAX_FIT_POINTS);
        let t0 = points[0].0;
        let tc = points[points.len() - 1].0;
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Input("trajectory times must be strictly increasing".into()));
        }
        let y_scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
        Ok(GprDataset {
            x: points.iter().map(|p| (p.0 - t0) / (tc - t0)).collect(),
            y: points.iter().map(|p| p.1 / y_scale).collect(),
            t_offset: t0,
            t_scale: tc - t0,
            y_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn to_x(&self, t: f64) -> f64 {
        (t - self.t_offset) / self.t_scale
    }

    pub fn to_t(&self, x: f64) -> f64 {
        self.t_offset + x * self.t_scale
    }
}

fn subsample(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let n = points.len();
    (0..max)
        .map(|i| points[(i * (n - 1)) / (max - 1)])
        .collect()
}

/// Generalized least squares for the trend coefficients:
/// `β = (Hᵀ K̃⁻¹ H)⁻¹ Hᵀ K̃⁻¹ y`.
pub fn fit_mean_beta(x: &[f64], y: &[f64], noisy: &Cholesky<f64, Dyn>) -> Result<Vector3<f64>> {
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "quadratic trend needs 3 distinct inputs, got {}",
            distinct.len()
        )));
    }
    let h = trend_basis(x);
    let kinv_h = noisy.solve(&h);
    let a: Matrix3<f64> = (h.transpose() * &kinv_h).fixed_view::<3, 3>(0, 0).into_owned();
    let b: Vector3<f64> = (kinv_h.transpose() * DVector::from_column_slice(y))
        .fixed_view::<3, 1>(0, 0)
        .into_owned();
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Fit("trend normal equations are rank deficient".into()))?;
    Ok(chol.solve(&b))
}

/// Gaussian log density of residual `r` under covariance with factor `chol`.
pub fn gaussian_log_density(chol: &Cholesky<f64, Dyn>, r: &DVector<f64>) -> f64 {
    let m = r.len() as f64;
    let alpha = chol.solve(r);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * r.dot(&alpha) - 0.5 * log_det - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
}

fn noisy_factor(x: &[f64], params: &KernelParams) -> Result<Cholesky<f64, Dyn>> {
    let mut k = combined_kernel_matrix(x, x, params);
    let noise = params.sigmae * params.sigmae;
    for i in 0..x.len() {
        k[(i, i)] += noise;
    }
    Cholesky::new(k).ok_or_else(|| Error::Numerical("K + sigma_e^2 I is not positive definite".into()))
}

/// Log marginal likelihood with the trend profiled out by GLS. Returns
/// `-inf` when the covariance cannot be factorized.
pub fn log_marginal_likelihood(data: &GprDataset, params: &KernelParams) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let Ok(chol) = noisy_factor(&data.x, params) else {
        return f64::NEG_INFINITY;
    };
    let Ok(beta) = fit_mean_beta(&data.x, &data.y, &chol) else {
        return f64::NEG_INFINITY;
    };
    let r = residual(data, &beta);
    let v = gaussian_log_density(&chol, &r);
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn residual(data: &GprDataset, beta: &Vector3<f64>) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        data.x.iter().zip(&data.y).map(|(&x, &y)| y - trend(beta, x)),
    )
}

#[inline]
fn trend(beta: &Vector3<f64>, x: f64) -> f64 {
    beta[0] + beta[1] * x + beta[2] * x * x
}

/// A conditioned GP: data, hyperparameters, GLS trend and the cached
/// factorization of `K + σ_e² I`.
#[derive(Debug, Clone)]
pub struct GprModel {
    pub data: GprDataset,
    pub params: KernelParams,
    pub beta: Vector3<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GprModel {
    pub fn condition(data: GprDataset, params: KernelParams) -> Result<Self> {
        params.validate()?;
        let chol = noisy_factor(&data.x, &params)?;
        let beta = fit_mean_beta(&data.x, &data.y, &chol)?;
        Self::with_beta(data, params, beta, chol)
    }

    /// Conditions with a fixed trend instead of the GLS estimate.
    pub fn condition_with_beta(data: GprDataset, params: KernelParams, beta: Vector3<f64>) -> Result<Self> {
        params.validate()?;
        let chol = noisy_factor(&data.x, &params)?;
        Self::with_beta(data, params, beta, chol)
    }

    fn with_beta(
        data: GprDataset,
        params: KernelParams,
        beta: Vector3<f64>,
        chol: Cholesky<f64, Dyn>,
    ) -> Result<Self> {
        let alpha = chol.solve(&residual(&data, &beta));
        Ok(GprModel {
            data,
            params,
            beta,
            chol,
            alpha,
        })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        gaussian_log_density(&self.chol, &residual(&self.data, &self.beta))
    }

    /// Posterior mean and standard deviation of the latent function at a
    /// normalized input.
    pub fn posterior(&self, x_new: f64) -> Result<(f64, f64)> {
        let kstar = combined_kernel_matrix(&self.data.x, &[x_new], &self.params);
        let kstar = kstar.column(0);
        let mu = kstar.dot(&self.alpha) + trend(&self.beta, x_new);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar.into_owned())
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let var = self.params.prior_variance(x_new) - v.norm_squared();
        if !(mu.is_finite() && var.is_finite()) {
            return Err(Error::Numerical(format!("non-finite posterior at x={x_new}")));
        }
        if var < -1e-10 {
            return Err(Error::Numerical(format!("negative posterior variance {var:e} at x={x_new}")));
        }
        Ok((mu, var.max(0.0).sqrt()))
    }

    /// Posterior in seconds at time `t`.
    pub fn posterior_seconds(&self, t: f64) -> Result<(f64, f64)> {
        let (mu, sd) = self.posterior(self.data.to_x(t))?;
        Ok((mu * self.data.y_scale, sd * self.data.y_scale))
    }
}
