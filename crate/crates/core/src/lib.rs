//! Model-based iterative reconstruction for single particle cryo-EM.
//!
//! A density volume is recovered from noisy particle images with known
//! orientations and offsets by minimizing
//!
//! ```text
//! c(f) = 0.5 ||g - H A f||_W^2 + s(f)
//! ```
//!
//! where `A` is a parallel-beam projector ([`projector`]), `H` the contrast
//! transfer function ([`ctf`]), `W` diagonal inverse-variance weights and `s`
//! a qGGMRF prior ([`prior`]). [`solver`] minimizes the cost with the optimized
//! gradient method. [`baseline`] holds the pre-process-and-reconstruct
//! comparator and [`harness`] simulates data, reads and writes files and runs
//! the comparison experiments.

pub mod baseline;
pub mod ctf;
pub mod error;
mod fourier;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod prior;
pub mod projector;
pub mod solver;
pub mod stack;

pub use error::{Error, Result};
pub use grid::{GridSpec, Volume};
pub use stack::{DiagonalWeights, ProjectionStack, ViewGeometry};
