//! Real-response filtering of image stacks via 2D FFTs with periodic boundaries.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed DFT frequency of bin `i` out of `n`, in cycles per sample, in [-0.5, 0.5).
pub(crate) fn signed_frequency(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64 / n as f64
    } else {
        (i as f64 - n as f64) / n as f64
    }
}

/// Radial frequency magnitude for every bin of a `width x height` grid, x fastest.
pub(crate) fn radial_frequencies(width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        let kv = signed_frequency(v, height);
        for u in 0..width {
            let ku = signed_frequency(u, width);
            out.push((ku * ku + kv * kv).sqrt());
        }
    }
    out
}

pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, buf: &mut [Complex64], col: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        let (row, column) = if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row_fwd, &self.col_fwd) };
        row.process(buf);
        for u in 0..w {
            for v in 0..h {
                col[v] = buf[v * w + u];
            }
            column.process(col);
            for v in 0..h {
                buf[v * w + u] = col[v];
            }
        }
    }

    /// `image <- real(IFFT(response * FFT(image)))`.
    pub(crate) fn filter_image(&self, image: &mut [f64], response: &[f64]) {
        let n = self.width * self.height;
        let mut buf: Vec<Complex64> = image.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut col = vec![Complex64::default(); self.height];
        self.transform(&mut buf, &mut col, false);
        for (b, r) in buf.iter_mut().zip(response) {
            *b *= *r;
        }
        self.transform(&mut buf, &mut col, true);
        let scale = 1.0 / n as f64;
        for (x, b) in image.iter_mut().zip(&buf) {
            *x = b.re * scale;
        }
    }

    /// Forward 2D DFT of a real image.
    #[cfg(test)]
    pub(crate) fn spectrum(&self, image: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = image.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut col = vec![Complex64::default(); self.height];
        self.transform(&mut buf, &mut col, false);
        buf
    }
}

/// Filters each image of a flat stack with the response selected for it.
pub(crate) fn filter_stack<'a, F>(data: &mut [f64], width: usize, height: usize, response_for: F)
where
    F: Fn(usize) -> &'a [f64] + Sync,
{
    let fft = Fft2::new(width, height);
    data.par_chunks_mut(width * height)
        .enumerate()
        .for_each(|(i, image)| fft.filter_image(image, response_for(i)));
}
