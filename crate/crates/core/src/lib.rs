//! Comb-sign detection for contrast CT enterography volumes.
//!
//! The pipeline fuses a vessel probability map with a proximity map of the
//! enhanced intestinal wall:
//!
//! 1. intestine mask preparation ([`mask`]),
//! 2. wall threshold from a Gaussian mixture on the bowel histogram ([`wall`]),
//! 3. organ removal, HU clipping and multiscale Jerman vesselness ([`vessel`]),
//! 4. iterative neighbourhood-maximum enhancement ([`enhance`]),
//! 5. Gaussian wall proximity, fusion and region scoring ([`fusion`]).
//!
//! All numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar used by the pipeline and the CLI.

pub mod distance;
pub mod enhance;
pub mod error;
pub mod fusion;
pub mod mask;
pub mod pipeline;
pub mod scalar;
pub mod vessel;
pub mod volume;
pub mod wall;

pub use error::{Error, Result};
pub use mask::LabelMask;
pub use scalar::Real;
pub use volume::{Geometry, Histogram, ProbabilityMap, Volume3D};

/// Scalar used by the pipeline and CLI.
pub type Scalar = f64;

pub type Volume = Volume3D<f64>;
pub type VolumeF32 = Volume3D<f32>;
pub type ProbMap = ProbabilityMap<f64>;
pub type ProbMapF32 = ProbabilityMap<f32>;
pub type Gmm = wall::GmmModel<f64>;
pub type HuHistogram = Histogram<f64>;
