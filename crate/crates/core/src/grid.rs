//! Voxel grids and volumes.

use crate::error::{Error, Result};

/// Shape of a voxel grid. Coordinates are in voxel units scaled by `voxel_size`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, voxel_size: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Domain(format!(
                "grid dimensions must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::Domain(format!("voxel size must be positive, got {voxel_size}")));
        }
        Ok(Self { nx, ny, nz, voxel_size })
    }

    /// Cubic grid of side `n` with unit voxels.
    pub fn cubic(n: usize) -> Result<Self> {
        Self::new(n, n, n, 1.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Projected width in detector pixels.
    pub fn projected_width(&self) -> usize {
        self.nx
    }

    /// Linear index with x varying fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    /// Position of the rotation center in index coordinates.
    pub fn center(&self) -> [f64; 3] {
        [
            (self.nx as f64 - 1.0) * 0.5,
            (self.ny as f64 - 1.0) * 0.5,
            (self.nz as f64 - 1.0) * 0.5,
        ]
    }
}

/// Scalar density sampled on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "volume data has {} values, grid {}x{}x{} needs {}",
                data.len(),
                grid.nx,
                grid.ny,
                grid.nz,
                grid.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("volume value at index {i} is not finite")));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn filled(grid: GridSpec, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.nz {
            for y in 0..grid.ny {
                for x in 0..grid.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) {
        let i = self.grid.index(x, y, z);
        self.data[i] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Volume) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &Volume) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension(format!(
                "grids differ: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
