//! Radially symmetric contrast transfer function and phase flipping.
//!
//! The transfer function at radial frequency `k` (cycles/pixel, Nyquist 0.5) is
//!
//! ```text
//! h(k) = exp(-alpha k) * sin(-pi dz_lambda k^2 + (pi/2) cs_lambda3 k^4)
//! ```
//!
//! where `dz_lambda` is defocus times wavelength and `cs_lambda3` is spherical
//! aberration times wavelength cubed. Only the products enter the model.

use crate::error::{Error, Result};
use crate::fourier::{filter_stack, radial_frequencies};
use crate::stack::ProjectionStack;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtfParams {
    pub alpha: f64,
    pub dz_lambda: f64,
    pub cs_lambda3: f64,
}

impl CtfParams {
    pub fn new(alpha: f64, dz_lambda: f64, cs_lambda3: f64) -> Result<Self> {
        let p = Self { alpha, dz_lambda, cs_lambda3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.dz_lambda.is_finite() && self.cs_lambda3.is_finite()) {
            return Err(Error::Domain(format!("CTF parameters must be finite: {self:?}")));
        }
        if self.alpha < 0.0 {
            return Err(Error::Domain(format!("CTF attenuation must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Phase of the sine term, `-pi dz_lambda k^2 + (pi/2) cs_lambda3 k^4`.
    pub fn phase(&self, k: f64) -> f64 {
        let k2 = k * k;
        -PI * self.dz_lambda * k2 + 0.5 * PI * self.cs_lambda3 * k2 * k2
    }
}

impl Default for CtfParams {
    /// alpha = 1, dz_lambda = 100, cs_lambda3 = 10.
    fn default() -> Self {
        Self { alpha: 1.0, dz_lambda: 100.0, cs_lambda3: 10.0 }
    }
}

/// One entry of a CTF table: the radial model, or no CTF at all (`H = I`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CtfModel {
    Identity,
    Radial(CtfParams),
}

pub fn ctf_transfer(k: f64, params: &CtfParams) -> f64 {
    (-params.alpha * k).exp() * params.phase(k).sin()
}

/// Zeros of the transfer function in `(0, k_max]`, in increasing order.
///
/// The sine vanishes where the phase is a multiple of pi, which is a quadratic
/// in `k^2` for each multiple; roots are solved in closed form.
pub fn ctf_zeros(params: &CtfParams, k_max: f64) -> Vec<f64> {
    let (a, b) = (params.dz_lambda, params.cs_lambda3);
    let x_max = k_max * k_max;
    // phase / pi as a function of x = k^2
    let q = |x: f64| -a * x + 0.5 * b * x * x;
    let mut candidates = vec![0.0, x_max];
    if b != 0.0 && a / b > 0.0 && a / b < x_max {
        candidates.push(a / b);
    }
    let lo = candidates.iter().map(|&x| q(x)).fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().map(|&x| q(x)).fold(f64::NEG_INFINITY, f64::max);
    let mut roots = Vec::new();
    for m in (lo.ceil() as i64)..=(hi.floor() as i64) {
        let m = m as f64;
        let xs: Vec<f64> = if b == 0.0 {
            if a == 0.0 {
                vec![]
            } else {
                vec![-m / a]
            }
        } else {
            // (b/2) x^2 - a x - m = 0
            let disc = a * a + 2.0 * b * m;
            if disc < 0.0 {
                vec![]
            } else {
                let s = disc.sqrt();
                // stable form of (a -/+ s) / b
                let r1 = if a >= 0.0 { (a + s) / b } else { (a - s) / b };
                let r2 = if r1 != 0.0 { -2.0 * m / (b * r1) } else { (a - s.copysign(a)) / b };
                vec![r1, r2]
            }
        };
        for x in xs {
            if x > 0.0 && x <= x_max {
                roots.push(x.sqrt());
            }
        }
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs().max(1.0));
    roots
}

/// A real Fourier-domain response over a `width x height` DFT grid.
///
/// `response[v * width + u]` multiplies the DFT bin `(u, v)`; bin `(0, 0)` is DC.
#[derive(Clone, Debug, PartialEq)]
pub struct CtfFilter {
    width: usize,
    height: usize,
    response: Vec<f64>,
}

impl CtfFilter {
    pub fn from_response(width: usize, height: usize, response: Vec<f64>) -> Result<Self> {
        if response.len() != width * height {
            return Err(Error::Dimension(format!(
                "filter response has {} entries, expected {width}x{height}",
                response.len()
            )));
        }
        Ok(Self { width, height, response })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self { width, height, response: vec![1.0; width * height] }
    }

    pub fn from_model(width: usize, height: usize, model: &CtfModel) -> Self {
        match model {
            CtfModel::Identity => Self::identity(width, height),
            CtfModel::Radial(p) => build_filter(width, height, p),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn max_abs(&self) -> f64 {
        self.response.iter().fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    fn check_stack(&self, stack: &ProjectionStack) -> Result<()> {
        if stack.width() != self.width || stack.height() != self.height {
            return Err(Error::Dimension(format!(
                "filter is {}x{} but images are {}x{}",
                self.width,
                self.height,
                stack.width(),
                stack.height()
            )));
        }
        Ok(())
    }
}

pub fn build_filter(width: usize, height: usize, params: &CtfParams) -> CtfFilter {
    let response = radial_frequencies(width, height)
        .into_iter()
        .map(|k| ctf_transfer(k, params))
        .collect();
    CtfFilter { width, height, response }
}

/// Filters every image of the stack with `filter` (circular convolution).
pub fn apply_filter(stack: &ProjectionStack, filter: &CtfFilter) -> Result<ProjectionStack> {
    apply_filters(stack, std::slice::from_ref(filter))
}

/// Filters each image with the table entry named by its view's `ctf_index`.
pub fn apply_filters(stack: &ProjectionStack, filters: &[CtfFilter]) -> Result<ProjectionStack> {
    for f in filters {
        f.check_stack(stack)?;
    }
    if let Some((i, v)) = stack.views().iter().enumerate().find(|(_, v)| v.ctf_index >= filters.len()) {
        return Err(Error::Validation(format!(
            "view {i} uses CTF index {} but only {} filters are available",
            v.ctf_index,
            filters.len()
        )));
    }
    let mut out = stack.clone();
    let views = stack.views();
    filter_stack(out.data_mut(), stack.width(), stack.height(), |i| {
        filters[views[i].ctf_index].response()
    });
    Ok(out)
}

/// Sign of the response, with `sign(0) = 0`.
pub fn phase_flip_filter(filter: &CtfFilter) -> CtfFilter {
    let response = filter
        .response
        .iter()
        .map(|&r| {
            if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    CtfFilter { width: filter.width, height: filter.height, response }
}
