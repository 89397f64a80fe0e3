//! Pre-process-and-reconstruct comparator: Gaussian low-pass, phase-flip CTF
//! correction, then conjugate-gradient least squares on `A f = g`.

use crate::ctf::{apply_filters, phase_flip_filter, CtfFilter};
use crate::error::{Error, Result};
use crate::fourier::{filter_stack, radial_frequencies};
use crate::grid::{axpy, dot, GridSpec, Volume};
use crate::projector::{back_project, forward_project, ProjectorConfig};
use crate::stack::ProjectionStack;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    /// Low-pass width in cycles/pixel.
    pub gaussian_sigma: f64,
    pub cgls_iters: usize,
    /// Stop when `||A^T r|| / ||A^T g||` drops below this.
    pub cgls_tol: f64,
    pub projector: ProjectorConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { gaussian_sigma: 0.15, cgls_iters: 20, cgls_tol: 1e-6, projector: ProjectorConfig::default() }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma > 0.0) {
            return Err(Error::Domain(format!("gaussian_sigma must be positive, got {}", self.gaussian_sigma)));
        }
        if self.cgls_iters == 0 {
            return Err(Error::Domain("cgls_iters must be at least 1".into()));
        }
        if !(self.cgls_tol >= 0.0) {
            return Err(Error::Domain(format!("cgls_tol must be >= 0, got {}", self.cgls_tol)));
        }
        self.projector.validate()
    }
}

/// Multiplies each image spectrum by `exp(-k^2 / (2 sigma^2))`.
pub fn gaussian_lowpass(stack: &ProjectionStack, sigma: f64) -> Result<ProjectionStack> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("low-pass sigma must be positive, got {sigma}")));
    }
    let response: Vec<f64> = radial_frequencies(stack.width(), stack.height())
        .into_iter()
        .map(|k| (-k * k / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut out = stack.clone();
    filter_stack(out.data_mut(), stack.width(), stack.height(), |_| &response);
    Ok(out)
}

/// Multiplies each image spectrum by the sign of its CTF.
pub fn phase_flip_correct(stack: &ProjectionStack, filters: &[CtfFilter]) -> Result<ProjectionStack> {
    let flipped: Vec<CtfFilter> = filters.iter().map(phase_flip_filter).collect();
    apply_filters(stack, &flipped)
}

/// Result of [`cgls_reconstruct`].
#[derive(Clone, Debug)]
pub struct CglsOutcome {
    pub volume: Volume,
    pub iterations: usize,
    /// `||A f_k - g||` for k = 0, 1, ...
    pub residual_norms: Vec<f64>,
    /// Iterates captured at the requested iteration counts, in request order.
    pub snapshots: Vec<(usize, Volume)>,
}

/// CGLS from `f = 0` on `min ||A f - g||`, equivalent to CG on `A^T A f = A^T g`.
pub fn cgls_reconstruct(stack: &ProjectionStack, grid: &GridSpec, cfg: &BaselineConfig) -> Result<Volume> {
    Ok(cgls_with_snapshots(stack, grid, cfg, &[])?.volume)
}

/// Like [`cgls_reconstruct`], also keeping copies of the iterate after each of
/// `snapshot_at` iterations. Requests past an early stop receive the final iterate.
pub fn cgls_with_snapshots(stack: &ProjectionStack, grid: &GridSpec, cfg: &BaselineConfig, snapshot_at: &[usize]) -> Result<CglsOutcome> {
    cfg.validate()?;
    let views = stack.views();
    let proj = &cfg.projector;
    let mut x = Volume::zeros(*grid);
    let mut r = stack.clone();
    let mut s = back_project(stack, grid, proj)?;
    let mut p = s.clone();
    let s0_norm = s.norm();
    let mut gamma = s.dot(&s);
    let mut residual_norms = vec![dot(r.data(), r.data()).sqrt()];
    let mut captured: Vec<Option<Volume>> = vec![None; snapshot_at.len()];
    let mut at_config = None;
    let limit = cfg.cgls_iters.max(snapshot_at.iter().copied().max().unwrap_or(0));

    let mut k = 0;
    loop {
        for (slot, &want) in captured.iter_mut().zip(snapshot_at) {
            if want == k {
                *slot = Some(x.clone());
            }
        }
        if k == cfg.cgls_iters {
            at_config = Some(x.clone());
        }
        if k == limit || s0_norm == 0.0 || s.norm() <= cfg.cgls_tol * s0_norm {
            break;
        }
        let q = forward_project(&p, views, proj)?;
        let qq = dot(q.data(), q.data());
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        axpy(alpha, p.data(), x.data_mut());
        axpy(-alpha, q.data(), r.data_mut());
        k += 1;
        if !alpha.is_finite() || !x.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
        s = back_project(&r, grid, proj)?;
        let gamma_next = s.dot(&s);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.data_mut().iter_mut().zip(s.data()) {
            *pi = si + beta * *pi;
        }
        residual_norms.push(dot(r.data(), r.data()).sqrt());
    }

    let snapshots = captured
        .into_iter()
        .zip(snapshot_at)
        .map(|(v, &want)| (want, v.unwrap_or_else(|| x.clone())))
        .collect();
    let volume = at_config.unwrap_or(x);
    Ok(CglsOutcome { volume, iterations: k, residual_norms, snapshots })
}

/// Low-pass filtering and phase flipping, the pre-processing half of P+R.
pub fn preprocess(stack: &ProjectionStack, filters: &[CtfFilter], gaussian_sigma: f64) -> Result<ProjectionStack> {
    let smoothed = gaussian_lowpass(stack, gaussian_sigma)?;
    phase_flip_correct(&smoothed, filters)
}

/// Full P+R pipeline: low-pass, phase flip, CGLS.
pub fn pr_reconstruct(stack: &ProjectionStack, filters: &[CtfFilter], grid: &GridSpec, cfg: &BaselineConfig) -> Result<Volume> {
    cfg.validate()?;
    let corrected = preprocess(stack, filters, cfg.gaussian_sigma)?;
    cgls_reconstruct(&corrected, grid, cfg)
}
