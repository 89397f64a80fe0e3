//! Projection images, per-view geometry and measurement weights.

use crate::error::{Error, Result};

/// Orientation and detector offset of one particle image.
///
/// Euler angles are intrinsic ZYZ `(phi, theta, psi)` in radians. Offsets are
/// in detector pixels; a positive offset moves the particle image toward +x/+y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewGeometry {
    pub euler: [f64; 3],
    pub offset: [f64; 2],
    pub ctf_index: usize,
}

impl ViewGeometry {
    pub fn new(euler: [f64; 3], offset: [f64; 2], ctf_index: usize) -> Self {
        Self { euler, offset, ctf_index }
    }

    /// Identity orientation, zero offset, first CTF.
    pub fn identity() -> Self {
        Self::new([0.0; 3], [0.0; 2], 0)
    }

    pub fn is_finite(&self) -> bool {
        self.euler.iter().chain(self.offset.iter()).all(|v| v.is_finite())
    }
}

/// A stack of `n_views` images of `width x height` pixels.
///
/// Pixels are stored image by image, row-major with x varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionStack {
    width: usize,
    height: usize,
    data: Vec<f64>,
    views: Vec<ViewGeometry>,
}

impl ProjectionStack {
    pub fn new(width: usize, height: usize, data: Vec<f64>, views: Vec<ViewGeometry>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain(format!("image size must be positive, got {width}x{height}")));
        }
        if data.len() != width * height * views.len() {
            return Err(Error::Dimension(format!(
                "stack has {} values, expected {} views of {}x{}",
                data.len(),
                views.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("stack value at index {i} is not finite")));
        }
        if let Some(i) = views.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("geometry of view {i} is not finite")));
        }
        Ok(Self { width, height, data, views })
    }

    pub fn zeros(width: usize, height: usize, views: Vec<ViewGeometry>) -> Self {
        let data = vec![0.0; width * height * views.len()];
        Self { width, height, data, views }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn image_len(&self) -> usize {
        self.width * self.height
    }

    pub fn views(&self) -> &[ViewGeometry] {
        &self.views
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

    pub fn image(&self, view: usize) -> &[f64] {
        let n = self.image_len();
        &self.data[view * n..(view + 1) * n]
    }

    pub fn image_mut(&mut self, view: usize) -> &mut [f64] {
        let n = self.image_len();
        &mut self.data[view * n..(view + 1) * n]
    }

    /// Same geometry, new pixel values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, data, self.views.clone())
    }

    /// Keeps the listed views, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        let mut views = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_views() {
                return Err(Error::Dimension(format!(
                    "view index {i} out of range for {} views",
                    self.n_views()
                )));
            }
            data.extend_from_slice(self.image(i));
            views.push(self.views[i]);
        }
        Ok(Self { width: self.width, height: self.height, data, views })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// Diagonal of the measurement weighting matrix (inverse noise variance).
/// Zero entries mask pixels out of the fit.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalWeights {
    data: Vec<f64>,
}

impl DiagonalWeights {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!(
                "weight at index {i} is {}, weights must be finite and nonnegative",
                data[i]
            )));
        }
        Ok(Self { data })
    }

    pub fn uniform(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// Uniform weights matching the shape of `stack`.
    pub fn uniform_for(stack: &ProjectionStack, value: f64) -> Result<Self> {
        Self::uniform(stack.data().len(), value)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.data.iter().map(|w| w * factor).collect())
    }

    /// Restricts the weights to the listed views of a stack with `image_len` pixels per view.
    pub fn select(&self, image_len: usize, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * image_len);
        for &i in indices {
            let range = i * image_len..(i + 1) * image_len;
            let chunk = self.data.get(range).ok_or_else(|| {
                Error::Dimension(format!("weight view index {i} out of range"))
            })?;
            data.extend_from_slice(chunk);
        }
        Ok(Self { data })
    }

    pub(crate) fn check_matches(&self, stack: &ProjectionStack) -> Result<()> {
        if self.data.len() != stack.data().len() {
            return Err(Error::Dimension(format!(
                "weights have {} entries, stack has {} pixels",
                self.data.len(),
                stack.data().len()
            )));
        }
        Ok(())
    }
}
