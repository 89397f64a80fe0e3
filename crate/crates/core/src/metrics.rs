//! Error metrics: weighted residual norm, NRMSE and PSNR.

use crate::error::{Error, Result};
use crate::grid::Volume;
use crate::stack::DiagonalWeights;

/// `sum_i w_i * r_i^2`. The data-fidelity term is half of this.
pub fn weighted_residual_norm_sq(residual: &[f64], weights: &DiagonalWeights) -> Result<f64> {
    if residual.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "residual has {} entries, weights have {}",
            residual.len(),
            weights.len()
        )));
    }
    Ok(residual
        .iter()
        .zip(weights.data())
        .map(|(r, w)| w * r * r)
        .sum())
}

/// Root-mean-square error as a percentage of the reference maximum.
pub fn nrmse_percent(estimate: &Volume, reference: &Volume) -> Result<f64> {
    estimate.check_same_grid(reference)?;
    let peak = reference.max();
    if !(peak > 0.0) {
        return Err(Error::DegenerateReference(peak));
    }
    let n = reference.data().len() as f64;
    let sse: f64 = estimate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(100.0 * (sse / n).sqrt() / peak)
}

/// Peak signal-to-noise ratio `20 log10(peak / sigma)` in dB.
pub fn psnr_db(peak: f64, sigma: f64) -> Result<f64> {
    if !(peak > 0.0 && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "psnr needs positive peak and sigma, got peak={peak}, sigma={sigma}"
        )));
    }
    Ok(20.0 * (peak / sigma).log10())
}
