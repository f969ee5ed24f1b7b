//! Spectral disentanglement and enhancement for contrastive representation
//! learning.
//!
//! A batch of features `F` is decomposed by SVD, its singular values are
//! split into strong, weak and noise blocks using Marchenko–Pastur bounds and
//! an interquartile fence, and each block is perturbed on a curriculum
//! schedule before the dual-domain loss (InfoNCE plus spectral alignment) is
//! evaluated. The numeric core is generic over [`Scalar`]; the aliases below
//! fix it at `f64`, which is what the file formats and the harness use.

pub mod enhance;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod io;
pub mod losses;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Result, SdeError};
pub use matrix::Matrix;
pub use rng::{RngState, RNG_ALGORITHM};
pub use scalar::Scalar;

/// Dense `m × n` feature matrix at double precision.
pub type FeatureMatrix = Matrix<f64>;
pub type Decomposition = spectral::SpectralDecomposition<f64>;
pub type Partition = spectral::SubspacePartition<f64>;
pub type Delta = enhance::DeltaSpec<f64>;
pub type Bounds = spectral::MpBounds<f64>;

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
