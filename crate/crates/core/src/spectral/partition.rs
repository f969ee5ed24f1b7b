//! Strong / weak / noise split of a sorted spectrum.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Result, SdeError};
use crate::scalar::Scalar;
use crate::spectral::mp::{estimate_vartheta_with, mp_bounds, quantile, NoiseEstimator};
use crate::spectral::svd::SpectralDecomposition;

/// Tukey fence multiplier applied to the interquartile range.
pub const IQR_FENCE: f64 = 1.5;

/// Contiguous split of singular-value indices `0..r` into strong, weak and
/// noise blocks, in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspacePartition<T> {
    strong: usize,
    weak: usize,
    noise: usize,
    /// Marchenko–Pastur upper edge; noise values lie at or below it.
    pub noise_edge: T,
    /// `Q3 + 1.5·IQR` of the full spectrum.
    pub strong_threshold: T,
    pub vartheta: T,
    /// The strong block was forced to `{σ₁}` because no value cleared the
    /// fence while some value cleared the noise edge.
    pub forced_strong: bool,
}

impl<T: Scalar> SubspacePartition<T> {
    /// Partition from explicit block sizes.
    pub fn from_counts(strong: usize, weak: usize, noise: usize, noise_edge: T, strong_threshold: T) -> Self {
        Self {
            strong,
            weak,
            noise,
            noise_edge,
            strong_threshold,
            vartheta: T::zero(),
            forced_strong: false,
        }
    }

    /// Thresholds a nonincreasing spectrum against fixed edges.
    pub fn from_thresholds(sigma: &[T], noise_edge: T, strong_threshold: T) -> Self {
        let signal = sigma.iter().take_while(|&&s| s > noise_edge).count();
        let fenced = sigma[..signal].iter().take_while(|&&s| s > strong_threshold).count();
        let forced_strong = fenced == 0 && signal > 0;
        let strong = if forced_strong { 1 } else { fenced };
        Self {
            strong,
            weak: signal - strong,
            noise: sigma.len() - signal,
            noise_edge,
            strong_threshold,
            vartheta: T::zero(),
            forced_strong,
        }
    }

    pub fn rank(&self) -> usize {
        self.strong + self.weak + self.noise
    }

    pub fn strong(&self) -> Range<usize> {
        0..self.strong
    }

    pub fn weak(&self) -> Range<usize> {
        self.strong..self.strong + self.weak
    }

    pub fn noise(&self) -> Range<usize> {
        self.strong + self.weak..self.rank()
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.strong, self.weak, self.noise]
    }

    /// Which block index `i` falls in.
    pub fn subspace_of(&self, i: usize) -> Option<Subspace> {
        if i < self.strong {
            Some(Subspace::Strong)
        } else if i < self.strong + self.weak {
            Some(Subspace::Weak)
        } else if i < self.rank() {
            Some(Subspace::Noise)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    Strong,
    Weak,
    Noise,
}

pub fn partition<T: Scalar>(dec: &SpectralDecomposition<T>, m: usize, n: usize) -> Result<SubspacePartition<T>> {
    partition_spectrum(dec.sigma(), m, n, NoiseEstimator::default())
}

pub fn partition_with<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    m: usize,
    n: usize,
    estimator: NoiseEstimator,
) -> Result<SubspacePartition<T>> {
    partition_spectrum(dec.sigma(), m, n, estimator)
}

/// Partitions a nonincreasing spectrum taken from an `m × n` matrix.
///
/// Noise is everything at or below the Marchenko–Pastur upper edge for the
/// estimated `ϑ`. Of the rest, values above `Q3 + 1.5·IQR` are strong and the
/// remainder weak; when nothing clears the fence the top value is strong.
pub fn partition_spectrum<T: Scalar>(
    sigma: &[T],
    m: usize,
    n: usize,
    estimator: NoiseEstimator,
) -> Result<SubspacePartition<T>> {
    if sigma.is_empty() {
        return Err(SdeError::degenerate("cannot partition a rank-0 spectrum"));
    }
    if sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(SdeError::Contract("spectrum must be nonincreasing".into()));
    }
    let vartheta = estimate_vartheta_with(sigma, m, n, estimator)?;
    let noise_edge = mp_bounds(m, n, vartheta)?.upper;
    let (q1, q3) = (quantile(sigma, T::of(0.25)), quantile(sigma, T::of(0.75)));
    let strong_threshold = q3 + T::of(IQR_FENCE) * (q3 - q1);

    let mut part = SubspacePartition::from_thresholds(sigma, noise_edge, strong_threshold);
    part.vartheta = vartheta;
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ranges_are_contiguous() {
        let p = SubspacePartition::from_counts(2, 3, 4, 1.0, 2.0);
        assert_eq!(p.strong(), 0..2);
        assert_eq!(p.weak(), 2..5);
        assert_eq!(p.noise(), 5..9);
        assert_eq!(p.subspace_of(4), Some(Subspace::Weak));
        assert_eq!(p.subspace_of(9), None);
    }

    #[test]
    fn straddling_thresholds() {
        let p = SubspacePartition::from_thresholds(&[10.0, 0.1], 1.0, 5.0);
        assert_eq!(p.counts(), [1, 0, 1]);
        assert!(!p.forced_strong);
    }

    #[test]
    fn empty_spectrum_is_degenerate() {
        assert!(matches!(
            partition_spectrum::<f64>(&[], 3, 3, NoiseEstimator::MpMedian),
            Err(SdeError::Degenerate(_))
        ));
    }

    #[test]
    fn forced_strong_block() {
        let p = SubspacePartition::from_thresholds(&[5.0, 4.0, 3.0, 0.1], 1.0, 10.0);
        assert_eq!(p.counts(), [1, 2, 1]);
        assert!(p.forced_strong);
        let none = SubspacePartition::from_thresholds(&[0.5, 0.1], 1.0, 10.0);
        assert_eq!(none.counts(), [0, 0, 2]);
        assert!(!none.forced_strong);
    }

    #[test]
    fn unsorted_spectrum_rejected() {
        assert!(matches!(
            partition_spectrum(&[1.0, 2.0], 2, 2, NoiseEstimator::MpMedian),
            Err(SdeError::Contract(_))
        ));
    }
}
