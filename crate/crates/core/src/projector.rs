//! Parallel-beam projection of a voxel volume and its exact transpose.
//!
//! Each detector pixel integrates the volume along the rotated projection axis.
//! The integral is a Riemann sum of trilinearly interpolated samples spaced
//! `step_size` voxels apart; samples that fall outside the grid read zero.
//! [`back_project`] walks the same samples with the same weights and scatters
//! instead of gathering, so the pair satisfies `<Af, g> = <f, A^T g>` up to
//! rounding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Volume};
use crate::stack::{ProjectionStack, ViewGeometry};

/// 3x3 rotation, row-major.
pub type Rotation = [[f64; 3]; 3];

/// How back-projection partial sums are combined across threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Fixed partition of views and a fixed summation order, independent of the
    /// thread count. Results are bitwise reproducible.
    #[default]
    Deterministic,
    /// Work-stealing reduction; summation order may vary between runs.
    Unordered,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectorConfig {
    /// Ray sampling interval in voxels.
    pub step_size: f64,
    pub reduction: Reduction,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self { step_size: 1.0, reduction: Reduction::Deterministic }
    }
}

impl ProjectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Domain(format!(
                "projector step size must be positive, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

// Number of view groups used by the deterministic back-projection.
const DETERMINISTIC_GROUPS: usize = 8;

fn rot_z(a: f64) -> Rotation {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> Rotation {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn matmul(a: &Rotation, b: &Rotation) -> Rotation {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Intrinsic ZYZ rotation `Rz(phi) * Ry(theta) * Rz(psi)`.
pub fn rotation_matrix(euler: [f64; 3]) -> Rotation {
    let [phi, theta, psi] = euler;
    matmul(&matmul(&rot_z(phi), &rot_y(theta)), &rot_z(psi))
}

// Floor for |x| < 2^31 without libm or saturating casts. Adding 1.5 * 2^52
// rounds to an integer held in the low mantissa bits. Exact integers may map
// to x - 1, which only moves the interpolation weight to the upper corner.
const ROUND_MAGIC: f64 = 6755399441055744.0;

#[inline(always)]
fn split_floor(x: f64) -> (i64, f64) {
    let y = (x - 0.5) + ROUND_MAGIC;
    let i = y.to_bits() as u32 as i32 as i64;
    (i, x - (y - ROUND_MAGIC))
}

/// Receives the interpolation weights of one ray.
trait RayVisitor {
    /// Interior sample: four x-rows starting at `rows`, each weighted by
    /// `row_w` and interpolated linearly between `row` and `row + 1` by `fx`.
    fn cell(&mut self, rows: [usize; 4], row_w: [f64; 4], fx: f64);
    /// Single voxel near the boundary.
    fn voxel(&mut self, idx: usize, w: f64);
}

struct Gather<'a> {
    f: &'a [f64],
    acc: f64,
}

impl RayVisitor for Gather<'_> {
    #[inline(always)]
    fn cell(&mut self, rows: [usize; 4], row_w: [f64; 4], fx: f64) {
        let f = self.f;
        let lerp = |r: usize| f[r] + fx * (f[r + 1] - f[r]);
        self.acc += (row_w[0] * lerp(rows[0]) + row_w[1] * lerp(rows[1])) + (row_w[2] * lerp(rows[2]) + row_w[3] * lerp(rows[3]));
    }
    #[inline(always)]
    fn voxel(&mut self, idx: usize, w: f64) {
        self.acc += w * self.f[idx];
    }
}

struct Scatter<'a> {
    acc: &'a mut [f64],
    g: f64,
}

impl RayVisitor for Scatter<'_> {
    #[inline(always)]
    fn cell(&mut self, rows: [usize; 4], row_w: [f64; 4], fx: f64) {
        for (r, w) in rows.into_iter().zip(row_w) {
            let wg = w * self.g;
            self.acc[r] += wg * (1.0 - fx);
            self.acc[r + 1] += wg * fx;
        }
    }
    #[inline(always)]
    fn voxel(&mut self, idx: usize, w: f64) {
        self.acc[idx] += w * self.g;
    }
}

/// Per-view ray parameters in volume index coordinates.
struct ViewRays {
    /// Volume position of the detector origin pixel at s = 0.
    origin: [f64; 3],
    /// Volume displacement per detector pixel along x and y.
    du: [f64; 3],
    dv: [f64; 3],
    /// Volume displacement per ray sample.
    dir: [f64; 3],
    half: i64,
    weight: f64,
}

impl ViewRays {
    fn new(grid: &GridSpec, width: usize, height: usize, view: &ViewGeometry, cfg: &ProjectorConfig) -> Self {
        // The object is rotated by R and then integrated along z, so a detector
        // point (u, v, s) reads the volume at R^T (u, v, s).
        let r = rotation_matrix(view.euler);
        let c = grid.center();
        let u0 = -(width as f64 - 1.0) * 0.5 - view.offset[0];
        let v0 = -(height as f64 - 1.0) * 0.5 - view.offset[1];
        let mut origin = [0.0; 3];
        let mut dir = [0.0; 3];
        for a in 0..3 {
            origin[a] = c[a] + u0 * r[0][a] + v0 * r[1][a];
            dir[a] = r[2][a] * cfg.step_size;
        }
        let diag = ((grid.nx * grid.nx + grid.ny * grid.ny + grid.nz * grid.nz) as f64).sqrt();
        let half = ((0.5 * diag + 1.0) / cfg.step_size).ceil() as i64;
        Self {
            origin,
            du: r[0],
            dv: r[1],
            dir,
            half,
            weight: cfg.step_size * grid.voxel_size,
        }
    }

    /// Visits every voxel contributing to pixel (i, j) with its weight.
    #[inline]
    fn trace<V: RayVisitor>(&self, grid: &GridSpec, i: usize, j: usize, visit: &mut V) {
        let (fi, fj) = (i as f64, j as f64);
        let o = [
            self.origin[0] + fi * self.du[0] + fj * self.dv[0],
            self.origin[1] + fi * self.du[1] + fj * self.dv[1],
            self.origin[2] + fi * self.du[2] + fj * self.dv[2],
        ];
        let dims = [grid.nx, grid.ny, grid.nz];

        // Clip the sample index range to the slab where trilinear support can
        // touch the grid: coordinate in (-1, n).
        let mut k_lo = 0i64;
        let mut k_hi = 2 * self.half;
        for a in 0..3 {
            let n = dims[a] as f64;
            let d = self.dir[a];
            // sample k sits at o + (k - half) * dir
            if d.abs() < 1e-12 {
                let p = o[a] + (-self.half as f64) * d;
                if p <= -1.0 || p >= n {
                    return;
                }
                continue;
            }
            let t0 = (-1.0 - o[a]) / d + self.half as f64;
            let t1 = (n - o[a]) / d + self.half as f64;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            k_lo = k_lo.max(lo.floor() as i64);
            k_hi = k_hi.min(hi.ceil() as i64);
        }
        if k_lo > k_hi {
            return;
        }

        let (nx, ny, nz) = (grid.nx as i64, grid.ny as i64, grid.nz as i64);
        let plane = grid.nx * grid.ny;
        for k in k_lo..=k_hi {
            let t = (k - self.half) as f64;
            let px = o[0] + t * self.dir[0];
            let py = o[1] + t * self.dir[1];
            let pz = o[2] + t * self.dir[2];
            let ((x0, fx), (y0, fy), (z0, fz)) = (split_floor(px), split_floor(py), split_floor(pz));
            let wx = [1.0 - fx, fx];
            let wy = [1.0 - fy, fy];
            let wz = [1.0 - fz, fz];
            let inside = x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + 1 < nx && y0 + 1 < ny && z0 + 1 < nz;
            if inside {
                let base = (z0 as usize * grid.ny + y0 as usize) * grid.nx + x0 as usize;
                let (a0, a1) = (self.weight * wz[0], self.weight * wz[1]);
                let rows = [base, base + grid.nx, base + plane, base + plane + grid.nx];
                let row_w = [a0 * wy[0], a0 * wy[1], a1 * wy[0], a1 * wy[1]];
                visit.cell(rows, row_w, fx);
            } else {
                for (c, wzc) in wz.iter().enumerate() {
                    let z = z0 + c as i64;
                    if z < 0 || z >= nz {
                        continue;
                    }
                    for (b, wyb) in wy.iter().enumerate() {
                        let y = y0 + b as i64;
                        if y < 0 || y >= ny {
                            continue;
                        }
                        for (a, wxa) in wx.iter().enumerate() {
                            let x = x0 + a as i64;
                            if x < 0 || x >= nx {
                                continue;
                            }
                            let idx = (z as usize * grid.ny + y as usize) * grid.nx + x as usize;
                            visit.voxel(idx, self.weight * wzc * wyb * wxa);
                        }
                    }
                }
            }
        }
    }
}

/// Projects `volume` once per view onto an `nx x ny` detector.
pub fn forward_project(volume: &Volume, views: &[ViewGeometry], cfg: &ProjectorConfig) -> Result<ProjectionStack> {
    cfg.validate()?;
    let grid = *volume.grid();
    let (width, height) = (grid.nx, grid.ny);
    let mut out = ProjectionStack::zeros(width, height, views.to_vec());
    let f = volume.data();
    out.data_mut()
        .par_chunks_mut(width * height)
        .zip(views.par_iter())
        .for_each(|(image, view)| {
            let rays = ViewRays::new(&grid, width, height, view, cfg);
            for j in 0..height {
                for i in 0..width {
                    let mut gather = Gather { f, acc: 0.0 };
                    rays.trace(&grid, i, j, &mut gather);
                    image[j * width + i] = gather.acc;
                }
            }
        });
    Ok(out)
}

fn back_project_views(grid: &GridSpec, stack: &ProjectionStack, range: std::ops::Range<usize>, cfg: &ProjectorConfig, acc: &mut [f64]) {
    let (width, height) = (stack.width(), stack.height());
    for v in range {
        let rays = ViewRays::new(grid, width, height, &stack.views()[v], cfg);
        let image = stack.image(v);
        for j in 0..height {
            for i in 0..width {
                let g = image[j * width + i];
                if g == 0.0 {
                    continue;
                }
                rays.trace(grid, i, j, &mut Scatter { acc: &mut *acc, g });
            }
        }
    }
}

/// Applies the transpose of [`forward_project`] to a stack.
pub fn back_project(stack: &ProjectionStack, grid: &GridSpec, cfg: &ProjectorConfig) -> Result<Volume> {
    cfg.validate()?;
    if stack.width() != grid.nx || stack.height() != grid.ny {
        return Err(Error::Dimension(format!(
            "stack images are {}x{} but the grid face is {}x{}",
            stack.width(),
            stack.height(),
            grid.nx,
            grid.ny
        )));
    }
    let n = stack.n_views();
    let data = match cfg.reduction {
        Reduction::Deterministic => {
            let groups = DETERMINISTIC_GROUPS.min(n.max(1));
            let per = n.div_ceil(groups);
            let partials: Vec<Vec<f64>> = (0..groups)
                .into_par_iter()
                .map(|g| {
                    let mut acc = vec![0.0; grid.len()];
                    let range = (g * per).min(n)..((g + 1) * per).min(n);
                    back_project_views(grid, stack, range, cfg, &mut acc);
                    acc
                })
                .collect();
            let mut iter = partials.into_iter();
            let mut total = iter.next().unwrap_or_else(|| vec![0.0; grid.len()]);
            for p in iter {
                for (t, v) in total.iter_mut().zip(&p) {
                    *t += v;
                }
            }
            total
        }
        Reduction::Unordered => (0..n)
            .into_par_iter()
            .fold(
                || vec![0.0; grid.len()],
                |mut acc, v| {
                    back_project_views(grid, stack, v..v + 1, cfg, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0.0; grid.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            ),
    };
    Volume::new(*grid, data)
}
