//! Synthetic ground-truth densities.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    /// Overlapping solid balls of varying density.
    Spheres,
    /// Nested hollow shells with a dense core.
    Shells,
    /// Sum of Gaussian blobs.
    Blobs,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spheres" => Ok(Self::Spheres),
            "shells" => Ok(Self::Shells),
            "blobs" => Ok(Self::Blobs),
            other => Err(Error::Validation(format!(
                "unknown phantom kind '{other}' (expected spheres, shells or blobs)"
            ))),
        }
    }
}

impl std::fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Spheres => "spheres",
            Self::Shells => "shells",
            Self::Blobs => "blobs",
        })
    }
}

/// Reference density used to score reconstructions.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub volume: Volume,
    pub max_density: f64,
}

impl GroundTruth {
    pub fn new(volume: Volume) -> Result<Self> {
        let max_density = volume.max();
        if !(max_density > 0.0) {
            return Err(Error::DegenerateReference(max_density));
        }
        Ok(Self { volume, max_density })
    }
}

/// Fraction of the grid width that bounds the phantom support radius. Leaves a
/// margin of 15% of the width on every face, so rotated and offset particles
/// stay inside the detector.
pub const SUPPORT_RADIUS_FRACTION: f64 = 0.35;

struct Ball {
    center: [f64; 3],
    radius: f64,
    value: f64,
}

fn random_point_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    loop {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r2: f64 = p.iter().map(|v| v * v).sum();
        if r2 <= 1.0 {
            return [p[0] * radius, p[1] * radius, p[2] * radius];
        }
    }
}

/// Builds a nonnegative phantom normalized to a maximum of 1, identically zero
/// outside a ball of radius `0.35 * nx` around the grid center.
pub fn make_phantom(grid: &GridSpec, kind: PhantomKind, seed: u64) -> Result<GroundTruth> {
    let n = grid.nx.min(grid.ny).min(grid.nz) as f64;
    let support = SUPPORT_RADIUS_FRACTION * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = grid.center();
    let at = |x: usize, y: usize, z: usize| [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
    let dist = |p: [f64; 3], q: [f64; 3]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    let origin = [0.0; 3];

    let volume = match kind {
        PhantomKind::Spheres => {
            let count = rng.random_range(6..=10);
            let balls: Vec<Ball> = (0..count)
                .map(|_| {
                    let radius = rng.random_range(0.06..0.16) * n;
                    let radius = radius.max(1.5).min(support);
                    Ball {
                        center: random_point_in_ball(&mut rng, support - radius),
                        radius,
                        value: rng.random_range(0.3..1.0),
                    }
                })
                .collect();
            Volume::from_fn(*grid, |x, y, z| {
                let p = at(x, y, z);
                balls.iter().filter(|b| dist(p, b.center) <= b.radius).map(|b| b.value).sum()
            })
        }
        PhantomKind::Shells => {
            let count = rng.random_range(3..=5);
            let core = Ball { center: random_point_in_ball(&mut rng, 0.1 * n), radius: 0.08 * n + 1.0, value: 1.0 };
            let shells: Vec<(Ball, f64)> = (0..count)
                .map(|_| {
                    let radius = rng.random_range(0.12..0.3) * n;
                    let thickness = rng.random_range(0.04..0.08) * n + 1.0;
                    let ball = Ball {
                        center: random_point_in_ball(&mut rng, (support - radius).max(0.0)),
                        radius,
                        value: rng.random_range(0.2..0.7),
                    };
                    (ball, thickness)
                })
                .collect();
            Volume::from_fn(*grid, |x, y, z| {
                let p = at(x, y, z);
                let mut v = if dist(p, core.center) <= core.radius { core.value } else { 0.0 };
                for (b, t) in &shells {
                    let d = dist(p, b.center);
                    if d <= b.radius && d >= b.radius - t {
                        v += b.value;
                    }
                }
                v
            })
        }
        PhantomKind::Blobs => {
            let count = rng.random_range(8..=14);
            let blobs: Vec<Ball> = (0..count)
                .map(|_| {
                    let width = rng.random_range(0.03..0.08) * n;
                    let width = width.max(0.8);
                    Ball {
                        center: random_point_in_ball(&mut rng, (support - 2.5 * width).max(0.0)),
                        radius: width,
                        value: rng.random_range(0.3..1.0),
                    }
                })
                .collect();
            Volume::from_fn(*grid, |x, y, z| {
                let p = at(x, y, z);
                blobs
                    .iter()
                    .map(|b| {
                        let d = dist(p, b.center) / b.radius;
                        b.value * (-0.5 * d * d).exp()
                    })
                    .sum()
            })
        }
    };

    let mut data = volume.into_data();
    for (i, v) in data.iter_mut().enumerate() {
        let x = i % grid.nx;
        let y = (i / grid.nx) % grid.ny;
        let z = i / (grid.nx * grid.ny);
        if dist(at(x, y, z), origin) > support {
            *v = 0.0;
        }
    }
    let peak = data.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Validation(format!("{kind} phantom on {}x{}x{} is empty", grid.nx, grid.ny, grid.nz)));
    }
    data.iter_mut().for_each(|v| *v /= peak);
    // The maximum is exactly 1 after division by itself.
    GroundTruth::new(Volume::new(*grid, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantoms_are_normalized_and_interior() {
        let grid = GridSpec::cubic(24).unwrap();
        for kind in [PhantomKind::Spheres, PhantomKind::Shells, PhantomKind::Blobs] {
            for seed in 0..4 {
                let t = make_phantom(&grid, kind, seed).unwrap();
                assert_eq!(t.max_density, 1.0);
                assert_eq!(t.volume.max(), 1.0);
                assert!(t.volume.sum() > 0.0);
                assert!(t.volume.data().iter().all(|v| *v >= 0.0));
                let margin = (0.1 * 24.0f64).ceil() as usize;
                for z in 0..24 {
                    for y in 0..24 {
                        for x in 0..24 {
                            let near_face = [x, y, z].iter().any(|&i| i < margin || i >= 24 - margin);
                            if near_face {
                                assert_eq!(t.volume.get(x, y, z), 0.0, "{kind} seed {seed}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_phantom() {
        let grid = GridSpec::cubic(20).unwrap();
        let a = make_phantom(&grid, PhantomKind::Spheres, 9).unwrap();
        let b = make_phantom(&grid, PhantomKind::Spheres, 9).unwrap();
        assert_eq!(a, b);
        let c = make_phantom(&grid, PhantomKind::Spheres, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("shells".parse::<PhantomKind>().unwrap(), PhantomKind::Shells);
        assert!("cubes".parse::<PhantomKind>().is_err());
        assert_eq!(PhantomKind::Blobs.to_string(), "blobs");
    }
}
