//! qGGMRF regularizer over a voxel neighborhood.
//!
//! `s(f) = sum over unordered neighbor pairs {j, k} of w_jk * rho(f_j - f_k)` with
//! `rho(d) = u^2 / (c + u^(2 - p))`, `u = |d| / sigma_f`. Weights fall off as the
//! inverse distance between voxels and sum to one over a full neighborhood.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Neighborhood {
    Six,
    #[default]
    TwentySix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QggmrfParams {
    /// Shape exponent in [1, 2]: 1 is edge preserving, 2 is quadratic.
    pub p: f64,
    /// Transition constant between the quadratic and the `u^p` regimes.
    pub c: f64,
    /// Scale of voxel differences.
    pub sigma_f: f64,
    pub neighborhood: Neighborhood,
}

impl QggmrfParams {
    pub fn new(p: f64, c: f64, sigma_f: f64) -> Result<Self> {
        let params = Self { p, c, sigma_f, neighborhood: Neighborhood::TwentySix };
        params.validate()?;
        Ok(params)
    }

    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::Domain(format!("qGGMRF p must lie in [1, 2], got {}", self.p)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Domain(format!("qGGMRF c must be positive, got {}", self.c)));
        }
        if !(self.sigma_f.is_finite() && self.sigma_f > 0.0) {
            return Err(Error::Domain(format!("qGGMRF sigma_f must be positive, got {}", self.sigma_f)));
        }
        Ok(())
    }

    /// Upper bound on `rho''`. The curvature peaks at zero difference.
    pub fn max_curvature(&self) -> f64 {
        let tail = if self.p == 2.0 { 1.0 } else { 0.0 };
        2.0 / (self.sigma_f * self.sigma_f * (self.c + tail))
    }

    /// Bound on the largest Hessian eigenvalue of the prior: twice the
    /// per-voxel weight sum (one) times the maximum curvature.
    pub fn lipschitz_bound(&self) -> f64 {
        2.0 * self.max_curvature()
    }

    /// [`lipschitz_bound`](Self::lipschitz_bound) with the weight sum taken over
    /// neighbors that exist in `grid`. Equal to it once every side is at least 3.
    pub fn lipschitz_bound_for(&self, grid: &GridSpec) -> f64 {
        let stencil = NeighborStencil::new(self.neighborhood);
        // A voxel one step in from the low corner sees the most neighbors.
        let (x, y, z) = (grid.nx.min(2) - 1, grid.ny.min(2) - 1, grid.nz.min(2) - 1);
        let dims = [grid.nx, grid.ny, grid.nz];
        let present: Vec<f64> = stencil
            .offsets()
            .iter()
            .zip(stencil.weights())
            .filter(|(o, _)| neighbor(x, y, z, **o, dims).is_some())
            .map(|(_, w)| *w)
            .collect();
        if present.len() == stencil.offsets().len() {
            return self.lipschitz_bound();
        }
        2.0 * self.max_curvature() * present.iter().sum::<f64>()
    }
}

impl Default for QggmrfParams {
    fn default() -> Self {
        Self { p: 1.2, c: 0.1, sigma_f: 0.2, neighborhood: Neighborhood::TwentySix }
    }
}

pub fn rho(delta: f64, params: &QggmrfParams) -> f64 {
    let u = delta.abs() / params.sigma_f;
    u * u / (params.c + u.powf(2.0 - params.p))
}

/// Analytic derivative of [`rho`] with respect to `delta`.
pub fn rho_prime(delta: f64, params: &QggmrfParams) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let u = delta.abs() / params.sigma_f;
    let uq = u.powf(2.0 - params.p);
    let denom = params.c + uq;
    (u / params.sigma_f) * (2.0 * params.c + params.p * uq) / (denom * denom) * delta.signum()
}

/// Neighbor offsets `(dx, dy, dz)` and their normalized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborStencil {
    offsets: Vec<[i64; 3]>,
    weights: Vec<f64>,
}

impl NeighborStencil {
    pub fn new(neighborhood: Neighborhood) -> Self {
        let mut offsets = Vec::new();
        let mut raw = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match neighborhood {
                        Neighborhood::Six => manhattan == 1,
                        Neighborhood::TwentySix => manhattan > 0,
                    };
                    if keep {
                        offsets.push([dx, dy, dz]);
                        raw.push(1.0 / (manhattan as f64).sqrt());
                    }
                }
            }
        }
        let total: f64 = raw.iter().sum();
        let weights = raw.into_iter().map(|w| w / total).collect();
        Self { offsets, weights }
    }

    pub fn offsets(&self) -> &[[i64; 3]] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Offsets that are lexicographically positive in (z, y, x); each unordered
    /// pair of voxels is reached exactly once through these.
    fn forward_half(&self) -> impl Iterator<Item = ([i64; 3], f64)> + '_ {
        self.offsets
            .iter()
            .zip(&self.weights)
            .filter(|(o, _)| (o[2], o[1], o[0]) > (0, 0, 0))
            .map(|(o, w)| (*o, *w))
    }
}

#[inline]
fn neighbor(x: usize, y: usize, z: usize, o: [i64; 3], dims: [usize; 3]) -> Option<usize> {
    let nx = x as i64 + o[0];
    let ny = y as i64 + o[1];
    let nz = z as i64 + o[2];
    if nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] as i64 || ny >= dims[1] as i64 || nz >= dims[2] as i64 {
        return None;
    }
    Some((nz as usize * dims[1] + ny as usize) * dims[0] + nx as usize)
}

pub fn prior_cost(f: &Volume, params: &QggmrfParams) -> f64 {
    let stencil = NeighborStencil::new(params.neighborhood);
    let half: Vec<_> = stencil.forward_half().collect();
    let g = f.grid();
    let dims = [g.nx, g.ny, g.nz];
    let data = f.data();
    (0..g.nz)
        .into_par_iter()
        .map(|z| {
            let mut acc = 0.0;
            for y in 0..g.ny {
                for x in 0..g.nx {
                    let fj = data[g.index(x, y, z)];
                    for &(o, w) in &half {
                        if let Some(k) = neighbor(x, y, z, o, dims) {
                            acc += w * rho(fj - data[k], params);
                        }
                    }
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Gradient of [`prior_cost`]: `sum_k w_jk rho'(f_j - f_k)` at each voxel `j`.
pub fn prior_gradient(f: &Volume, params: &QggmrfParams) -> Volume {
    prior_cost_and_gradient(f, params).1
}

/// `rho` and `rho'` sharing one power evaluation.
#[inline]
fn rho_and_prime(delta: f64, params: &QggmrfParams) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let u = delta.abs() / params.sigma_f;
    let uq = u.powf(2.0 - params.p);
    let denom = params.c + uq;
    let value = u * u / denom;
    let slope = (u / params.sigma_f) * (2.0 * params.c + params.p * uq) / (denom * denom);
    (value, slope.copysign(delta))
}

/// [`prior_cost`] and [`prior_gradient`] in one pass.
///
/// Each unordered pair's derivative is evaluated once and stored per stencil
/// offset; the gradient then gathers `+d` from forward pairs and `-d` from
/// backward pairs, so no two tasks write the same voxel.
pub fn prior_cost_and_gradient(f: &Volume, params: &QggmrfParams) -> (f64, Volume) {
    let stencil = NeighborStencil::new(params.neighborhood);
    let half: Vec<_> = stencil.forward_half().collect();
    let g = *f.grid();
    let dims = [g.nx, g.ny, g.nz];
    let plane = g.nx * g.ny;
    let data = f.data();

    let mut deriv = vec![0.0; half.len() * g.len()];
    let partial_costs: Vec<f64> = deriv
        .par_chunks_mut(plane)
        .enumerate()
        .map(|(chunk, slice)| {
            let (h, z) = (chunk / g.nz, chunk % g.nz);
            let (o, w) = half[h];
            let mut acc = 0.0;
            for y in 0..g.ny {
                for x in 0..g.nx {
                    if let Some(k) = neighbor(x, y, z, o, dims) {
                        let (r, rp) = rho_and_prime(data[g.index(x, y, z)] - data[k], params);
                        acc += w * r;
                        slice[y * g.nx + x] = w * rp;
                    }
                }
            }
            acc
        })
        .collect();
    let cost = partial_costs.iter().sum();

    let mut out = Volume::zeros(g);
    let n = g.len();
    out.data_mut().par_chunks_mut(plane).enumerate().for_each(|(z, slice)| {
        for y in 0..g.ny {
            for x in 0..g.nx {
                let j = g.index(x, y, z);
                let mut acc = 0.0;
                for (h, &(o, _)) in half.iter().enumerate() {
                    let d = &deriv[h * n..(h + 1) * n];
                    acc += d[j];
                    if let Some(k) = neighbor(x, y, z, [-o[0], -o[1], -o[2]], dims) {
                        acc -= d[k];
                    }
                }
                slice[y * g.nx + x] = acc;
            }
        }
    });
    (cost, out)
}
