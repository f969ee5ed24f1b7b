//! Subspace-specific singular-value perturbations and the enhanced
//! reconstruction `F′ = U(Σ + Δ)Vᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdeError};
use crate::matrix::Matrix;
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::spectral::{SpectralDecomposition, SubspacePartition};

/// Which subspaces receive a perturbation; the rest keep `δᵢ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceMask {
    pub strong: bool,
    pub weak: bool,
    pub noise: bool,
}

impl SubspaceMask {
    pub const ALL: Self = Self { strong: true, weak: true, noise: true };
    pub const STRONG_ONLY: Self = Self { strong: true, weak: false, noise: false };
    pub const WEAK_ONLY: Self = Self { strong: false, weak: true, noise: false };
    pub const NOISE_ONLY: Self = Self { strong: false, weak: false, noise: true };
}

impl Default for SubspaceMask {
    fn default() -> Self {
        Self::ALL
    }
}

/// Diagonal perturbation `Δ = diag(δ₁ … δᵣ)` together with everything
/// needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpec<T> {
    pub deltas: Vec<T>,
    pub alpha: T,
    /// `Σ_{S∪W} σᵢ² / Σ_N σₖ²`, zero when the noise block is empty.
    pub gamma_noise: T,
    /// Standard-normal draws for the strong indices, in index order.
    pub epsilon_draws: Vec<T>,
    /// `[strong, weak, noise]` block sizes of the partition used.
    pub counts: [usize; 3],
    pub mask: SubspaceMask,
    /// Seed of the stream the draws came from, when known.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl<T: Scalar> DeltaSpec<T> {
    /// `‖Δ‖²_F`.
    pub fn squared_norm(&self) -> T {
        self.deltas.iter().fold(T::zero(), |acc, &d| acc + d * d)
    }

    /// Enhanced spectrum `σᵢ + δᵢ`.
    pub fn apply(&self, sigma: &[T]) -> Vec<T> {
        sigma.iter().zip(&self.deltas).map(|(&s, &d)| s + d).collect()
    }
}

/// Draws fresh `εᵢ ~ N(0, 1)` for the strong block and builds `Δ`.
pub fn build_delta<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    part: &SubspacePartition<T>,
    alpha: T,
    rng: &mut RngState,
) -> Result<DeltaSpec<T>> {
    build_delta_masked(dec, part, alpha, SubspaceMask::ALL, rng)
}

pub fn build_delta_masked<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    part: &SubspacePartition<T>,
    alpha: T,
    mask: SubspaceMask,
    rng: &mut RngState,
) -> Result<DeltaSpec<T>> {
    let draws: Vec<T> = if mask.strong {
        part.strong().map(|_| T::of(rng.standard_normal())).collect()
    } else {
        Vec::new()
    };
    let mut spec = build_delta_with_draws(dec.sigma(), part, alpha, mask, &draws)?;
    spec.seed = Some(rng.seed());
    Ok(spec)
}

/// Deterministic core of [`build_delta`]:
///
/// * strong: `δᵢ = α·(σᵢ/σ₁)·εᵢ`
/// * weak: `δᵢ = −α·(σᵢ/σ₁)²·σᵢ`
/// * noise: `δᵢ = −min(α·γ_noise, 1)·σᵢ`
///
/// Every `δᵢ` is clipped at `−σᵢ` so enhanced singular values stay
/// nonnegative; for weak and noise this is the `min(·, 1)` on the factor.
pub fn build_delta_with_draws<T: Scalar>(
    sigma: &[T],
    part: &SubspacePartition<T>,
    alpha: T,
    mask: SubspaceMask,
    draws: &[T],
) -> Result<DeltaSpec<T>> {
    if part.rank() != sigma.len() {
        return Err(SdeError::dim(format!(
            "partition covers {} indices, spectrum has {}",
            part.rank(),
            sigma.len()
        )));
    }
    let sigma1 = sigma.first().copied().unwrap_or_else(T::zero);
    if !(sigma1 > T::zero()) {
        return Err(SdeError::degenerate("largest singular value is zero"));
    }
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(SdeError::range(format!("alpha must be >= 0, got {alpha}")));
    }
    let expected_draws = if mask.strong { part.strong().len() } else { 0 };
    if draws.len() != expected_draws {
        return Err(SdeError::dim(format!("{} strong draws supplied, {expected_draws} needed", draws.len())));
    }

    let gamma_noise = gamma_noise(sigma, part);
    let noise_factor = (alpha * gamma_noise).min(T::one());
    let mut deltas = vec![T::zero(); sigma.len()];
    if mask.strong {
        for (i, &eps) in part.strong().zip(draws) {
            deltas[i] = (alpha * (sigma[i] / sigma1) * eps).max(-sigma[i]);
        }
    }
    if mask.weak {
        for i in part.weak() {
            let ratio = sigma[i] / sigma1;
            deltas[i] = -((alpha * ratio * ratio).min(T::one()) * sigma[i]);
        }
    }
    if mask.noise {
        for i in part.noise() {
            deltas[i] = -(noise_factor * sigma[i]);
        }
    }
    Ok(DeltaSpec {
        deltas,
        alpha,
        gamma_noise,
        epsilon_draws: draws.to_vec(),
        counts: part.counts(),
        mask,
        seed: None,
    })
}

fn gamma_noise<T: Scalar>(sigma: &[T], part: &SubspacePartition<T>) -> T {
    let energy = |r: std::ops::Range<usize>| sigma[r].iter().fold(T::zero(), |acc, &s| acc + s * s);
    let noise = energy(part.noise());
    if part.noise().is_empty() || noise == T::zero() {
        return T::zero();
    }
    energy(0..part.noise().start) / noise
}

/// Enhanced features `U · diag(σ + δ) · Vᵀ`.
pub fn enhance<T: Scalar>(f: &Matrix<T>, delta: &DeltaSpec<T>, dec: &SpectralDecomposition<T>) -> Result<Matrix<T>> {
    if f.shape() != dec.shape() {
        return Err(SdeError::dim(format!(
            "features are {:?} but the decomposition is of a {:?} matrix",
            f.shape(),
            dec.shape()
        )));
    }
    if delta.deltas.len() != dec.rank() {
        return Err(SdeError::dim(format!("{} deltas for rank {}", delta.deltas.len(), dec.rank())));
    }
    let out = dec.reconstruct_with(&delta.apply(dec.sigma()))?;
    if !out.is_finite() {
        return Err(SdeError::NonFinite("enhanced features are not finite".into()));
    }
    Ok(out)
}

/// `α²[|S| + Σ_W (σⱼ/σ₁)⁴σⱼ² + γ²_noise Σ_N σₖ²]` with the unclipped `γ_noise`.
pub fn perturbation_bound<T: Scalar>(sigma: &[T], part: &SubspacePartition<T>, alpha: T) -> T {
    let sigma1 = sigma[0];
    let weak: T = part.weak().map(|j| (sigma[j] / sigma1).powi(4) * sigma[j] * sigma[j]).sum();
    let g = gamma_noise(sigma, part);
    let noise: T = part.noise().map(|k| sigma[k] * sigma[k]).sum();
    alpha * alpha * (T::of_usize(part.strong().len()) + weak + g * g * noise)
}

/// Outcome of comparing sampled `‖Δ‖²_F` against the analytic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub empirical_mean: f64,
    pub bound: f64,
    pub samples: usize,
    /// Allowed ratio `1 + 3/√samples`.
    pub tolerance_factor: f64,
    pub pass: bool,
}

pub fn frobenius_bound<T: Scalar>(
    samples: &[DeltaSpec<T>],
    sigma: &[T],
    part: &SubspacePartition<T>,
    alpha: T,
) -> Result<BoundCheck> {
    if samples.is_empty() {
        return Err(SdeError::range("bound check needs at least one sample"));
    }
    if samples.iter().any(|s| s.deltas.len() != sigma.len()) {
        return Err(SdeError::dim("sample length differs from the spectrum"));
    }
    let empirical_mean =
        samples.iter().map(|s| s.squared_norm().as_f64()).sum::<f64>() / samples.len() as f64;
    let bound = perturbation_bound(sigma, part, alpha).as_f64();
    let tolerance_factor = 1.0 + 3.0 / (samples.len() as f64).sqrt();
    Ok(BoundCheck {
        empirical_mean,
        bound,
        samples: samples.len(),
        tolerance_factor,
        pass: empirical_mean <= bound * tolerance_factor,
    })
}
