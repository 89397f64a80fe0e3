//! Measurement simulation: random geometry, CTF filtering and additive noise.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ctf::{apply_filters, CtfFilter, CtfModel, CtfParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::harness::phantom::GroundTruth;
use crate::projector::{forward_project, ProjectorConfig};
use crate::stack::{DiagonalWeights, ProjectionStack, ViewGeometry};

// Independent random streams derived from one seed.
const GEOMETRY_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const SUBSET_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSpec {
    pub grid: GridSpec,
    /// Number of particle images before sub-sampling.
    pub n_views: usize,
    /// Target peak signal-to-noise ratio; `f64::INFINITY` disables noise.
    pub psnr_db: f64,
    /// Offsets are drawn from `[0, offset_fraction * p_w]` pixels.
    pub offset_fraction: f64,
    pub seed: u64,
    pub ctf: CtfModel,
    /// Fraction of the views kept, chosen uniformly at random.
    pub subsample_fraction: f64,
    pub projector: ProjectorConfig,
}

impl SimulationSpec {
    /// Defaults: two views per detector column, 6.02 dB, offsets up to 5% of the
    /// width, the reference CTF and all views kept.
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            n_views: 2 * grid.projected_width(),
            psnr_db: 6.02,
            offset_fraction: 0.05,
            seed: 0,
            ctf: CtfModel::Radial(CtfParams::default()),
            subsample_fraction: 1.0,
            projector: ProjectorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_views == 0 {
            return Err(Error::Domain("n_views must be at least 1".into()));
        }
        if !(self.offset_fraction.is_finite() && self.offset_fraction >= 0.0) {
            return Err(Error::Domain(format!("offset_fraction must be >= 0, got {}", self.offset_fraction)));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Domain(format!(
                "subsample_fraction must lie in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        if self.psnr_db.is_nan() || self.psnr_db == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("psnr_db must be finite or +inf, got {}", self.psnr_db)));
        }
        if let CtfModel::Radial(p) = &self.ctf {
            p.validate()?;
        }
        self.projector.validate()
    }
}

/// Euler angles uniform on `[0, 2 pi)`, offsets uniform on `[0, offset_fraction * p_w]`.
pub fn sample_geometry(spec: &SimulationSpec) -> Vec<ViewGeometry> {
    let mut rng = stream(spec.seed, GEOMETRY_STREAM);
    let max_offset = spec.offset_fraction * spec.grid.projected_width() as f64;
    (0..spec.n_views)
        .map(|_| {
            let euler = [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
            let offset = if max_offset > 0.0 {
                [rng.random_range(0.0..=max_offset), rng.random_range(0.0..=max_offset)]
            } else {
                [0.0, 0.0]
            };
            ViewGeometry::new(euler, offset, 0)
        })
        .collect()
}

/// Noise standard deviation giving `psnr_db` for a clean signal with this peak.
pub fn sigma_from_psnr(peak: f64, psnr_db: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Domain(format!("peak must be positive, got {peak}")));
    }
    Ok(peak / 10f64.powf(psnr_db / 20.0))
}

/// Sorted indices of the views kept for `fraction` of `n_views`. Smaller
/// fractions with the same seed select subsets of larger ones.
pub fn subsample_indices(n_views: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let keep = ((fraction * n_views as f64).round() as usize).clamp(1, n_views);
    let mut order: Vec<usize> = (0..n_views).collect();
    order.shuffle(&mut stream(seed, SUBSET_STREAM));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    kept
}

#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub stack: ProjectionStack,
    pub weights: DiagonalWeights,
    pub ctf_table: Vec<CtfModel>,
    pub filters: Vec<CtfFilter>,
    /// Noiseless `H A f` for the kept views.
    pub clean: ProjectionStack,
    /// Largest `|H A f|` over the full (unsampled) stack.
    pub peak: f64,
    /// Noise standard deviation; zero when noise is disabled.
    pub sigma: f64,
    /// Indices of the kept views in the full stack.
    pub kept_views: Vec<usize>,
}

pub fn synthesize(spec: &SimulationSpec, truth: &GroundTruth) -> Result<SimulatedData> {
    spec.validate()?;
    if truth.volume.grid() != &spec.grid {
        return Err(Error::Dimension("ground truth grid differs from the simulation grid".into()));
    }
    let views = sample_geometry(spec);
    let (w, h) = (spec.grid.nx, spec.grid.ny);
    let ctf_table = vec![spec.ctf];
    let filters: Vec<CtfFilter> = ctf_table.iter().map(|m| CtfFilter::from_model(w, h, m)).collect();
    let projected = forward_project(&truth.volume, &views, &spec.projector)?;
    let clean = apply_filters(&projected, &filters)?;
    let peak = clean.max_abs();

    let (noisy, sigma, weight) = if spec.psnr_db == f64::INFINITY {
        (clean.clone(), 0.0, 1.0)
    } else {
        let sigma = sigma_from_psnr(peak, spec.psnr_db)?;
        let mut rng = stream(spec.seed, NOISE_STREAM);
        let data = clean
            .data()
            .iter()
            .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (clean.with_data(data)?, sigma, 1.0 / (sigma * sigma))
    };
    let full_weights = DiagonalWeights::uniform_for(&noisy, weight)?;

    let kept_views = subsample_indices(spec.n_views, spec.subsample_fraction, spec.seed);
    Ok(SimulatedData {
        stack: noisy.select(&kept_views)?,
        weights: full_weights.select(noisy.image_len(), &kept_views)?,
        clean: clean.select(&kept_views)?,
        ctf_table,
        filters,
        peak,
        sigma,
        kept_views,
    })
}
