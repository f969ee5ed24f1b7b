//! Spectral disentanglement: SVD, Marchenko–Pastur bounds and the
//! strong / weak / noise partition.

mod mp;
mod partition;
mod report;
mod svd;

pub use mp::{
    estimate_vartheta, estimate_vartheta_with, median, mp_bounds, mp_eigenvalue_median, mp_median_singular_value,
    quantile, MpBounds, NoiseEstimator,
};
pub use partition::{partition, partition_spectrum, partition_with, Subspace, SubspacePartition, IQR_FENCE};
pub use report::{spectral_report, SpectralReport};
pub use svd::{svd, svd_with_tolerance, SpectralDecomposition, DEFAULT_RANK_TOLERANCE, MAX_SWEEPS};
