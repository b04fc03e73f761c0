//! Scalar covariance functions on normalized time.

use crate::error::{Error, Result};

/// Dot-product kernel `σ₀² + xᵢxⱼ`.
#[inline]
pub fn dot_product_kernel(xi: f64, xj: f64, sigma0: f64) -> f64 {
    sigma0 * sigma0 + xi * xj
}

/// Local length-scale kernel with input-dependent lengths `lᵢ`, `lⱼ`:
///
/// `σ_f² (lᵢ²)^¼ (lⱼ²)^¼ (½lᵢ² + ½lⱼ²)^-½ exp(-(xᵢ-xⱼ)² / (½lᵢ² + ½lⱼ²))`
pub fn local_length_scale_kernel(xi: f64, xj: f64, li: f64, lj: f64, sigmaf: f64) -> Result<f64> {
    if !(li > 0.0 && lj > 0.0) {
        return Err(Error::Parameter(format!("length scales must be positive, got {li}, {lj}")));
    }
    if !(sigmaf > 0.0) {
        return Err(Error::Parameter(format!("sigma_f must be positive, got {sigmaf}")));
    }
    Ok(local_kernel_unchecked(xi, xj, li, lj, sigmaf))
}

#[inline]
pub(crate) fn local_kernel_unchecked(xi: f64, xj: f64, li: f64, lj: f64, sigmaf: f64) -> f64 {
    let (li2, lj2) = (li * li, lj * lj);
    let avg = 0.5 * li2 + 0.5 * lj2;
    let d = xi - xj;
    sigmaf * sigmaf * li2.powf(0.25) * lj2.powf(0.25) / avg.sqrt() * (-d * d / avg).exp()
}

/// Squared-exponential kernel `scale² exp(-(xᵢ-xⱼ)² / length²)`; the
/// equal-length case of the local kernel.
pub fn se_kernel(xi: f64, xj: f64, length: f64, scale: f64) -> Result<f64> {
    if !(length > 0.0 && scale > 0.0) {
        return Err(Error::Parameter(format!(
            "SE length and scale must be positive, got {length}, {scale}"
        )));
    }
    Ok(se_unchecked(xi, xj, length, scale))
}

#[inline]
pub(crate) fn se_unchecked(xi: f64, xj: f64, length: f64, scale: f64) -> f64 {
    let d = xi - xj;
    scale * scale * (-d * d / (length * length)).exp()
}
