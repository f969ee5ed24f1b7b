//! Dual-domain contrastive objective: instance-level InfoNCE plus spectral
//! distribution (Hellinger) and principal-subspace (Gram) alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdeError};
use crate::matrix::{dot, norm2, Matrix};
use crate::scalar::Scalar;
use crate::spectral::{svd, SpectralDecomposition, SubspacePartition};

/// Temperature used throughout training unless overridden.
pub const DEFAULT_TEMPERATURE: f64 = 0.02;

/// Upper cap on the automatically chosen subspace dimension.
pub const MAX_AUTO_K: usize = 8;

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(SdeError::dim(format!("cosine of lengths {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (norm2(a), norm2(b));
    if !(na > T::zero() && nb > T::zero()) {
        return Err(SdeError::degenerate("cosine of a zero-norm vector"));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Rows scaled to unit length; returns the normalized rows and the norms.
pub(crate) fn normalize_rows<T: Scalar>(x: &Matrix<T>, name: &str) -> Result<(Matrix<T>, Vec<T>)> {
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let n = norm2(x.row(i));
        if !(n > T::zero()) {
            return Err(SdeError::degenerate(format!("row {i} of {name} has zero norm")));
        }
        out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

/// Normalized rows, the loss, and the row-wise softmax residual `P − I`.
pub(crate) struct InfoNceParts<T> {
    pub loss: T,
    pub x_hat: Matrix<T>,
    pub y_hat: Matrix<T>,
    pub x_norms: Vec<T>,
    pub y_norms: Vec<T>,
    pub residual: Matrix<T>,
}

pub(crate) fn infonce_parts<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, tau: T) -> Result<InfoNceParts<T>> {
    if x.shape() != y.shape() {
        return Err(SdeError::dim(format!("query batch {:?} vs target batch {:?}", x.shape(), y.shape())));
    }
    if x.rows() == 0 {
        return Err(SdeError::dim("empty batch"));
    }
    if !(tau > T::zero()) {
        return Err(SdeError::range(format!("temperature must be > 0, got {tau}")));
    }
    let (x_hat, x_norms) = normalize_rows(x, "X")?;
    let (y_hat, y_norms) = normalize_rows(y, "Y")?;
    let similarity = x_hat.matmul_t(&y_hat)?;
    let m = x.rows();
    let mut residual = Matrix::zeros(m, m);
    let mut loss = T::zero();
    for i in 0..m {
        let logits: Vec<T> = similarity.row(i).iter().map(|&s| s / tau).collect();
        let top = (0..m).fold(0, |b, j| if logits[j] > logits[b] { j } else { b });
        let exps: Vec<T> = logits.iter().map(|&l| (l - logits[top]).exp()).collect();
        // at low temperature the softmax saturates; keep the off-maximum mass
        // separate so that log(1 + rest) and 1 − P_ii stay accurate
        let rest = (0..m).filter(|&j| j != top).fold(T::zero(), |a, j| a + exps[j]);
        let z = T::one() + rest;
        loss += (logits[top] - logits[i]) + rest.ln_1p();
        let off_diag = (0..m).filter(|&j| j != i).fold(T::zero(), |a, j| a + exps[j]);
        for j in 0..m {
            residual[(i, j)] = if j == i { -off_diag / z } else { exps[j] / z };
        }
    }
    Ok(InfoNceParts { loss, x_hat, y_hat, x_norms, y_norms, residual })
}

/// Batch-summed InfoNCE `−Σᵢ log softmax_j(s(xᵢ, yⱼ)/τ)ᵢ` over cosine similarities.
pub fn infonce<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, tau: T) -> Result<T> {
    Ok(infonce_parts(x, y, tau)?.loss)
}

/// `wᵢ = 1 − (i−1)/r` for `i = 1..r`.
pub fn linear_weights<T: Scalar>(r: usize) -> Vec<T> {
    let rr = T::of_usize(r);
    (0..r).map(|i| T::one() - T::of_usize(i) / rr).collect()
}

/// L2-normalized weighted spectrum `p = w⊙σ / ‖w⊙σ‖₂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDistribution<T> {
    pub p: Vec<T>,
    pub weights: Vec<T>,
    /// `‖w⊙σ‖₂` before normalization.
    pub scale: T,
}

/// Pads or truncates `sigma` to `len` entries.
pub fn fit_spectrum<T: Scalar>(sigma: &[T], len: usize) -> Vec<T> {
    (0..len).map(|i| sigma.get(i).copied().unwrap_or_else(T::zero)).collect()
}

pub fn spectral_distribution<T: Scalar>(sigma: &[T], weights: &[T]) -> Result<SpectralDistribution<T>> {
    check_weights(weights)?;
    let weighted: Vec<T> = fit_spectrum(sigma, weights.len()).iter().zip(weights).map(|(&s, &w)| w * s).collect();
    if weighted.iter().any(|&v| v < T::zero()) {
        return Err(SdeError::Contract("singular values must be nonnegative".into()));
    }
    let scale = norm2(&weighted);
    if !(scale > T::zero()) {
        return Err(SdeError::degenerate("all-zero spectrum"));
    }
    Ok(SpectralDistribution { p: weighted.iter().map(|&v| v / scale).collect(), weights: weights.to_vec(), scale })
}

fn check_weights<T: Scalar>(w: &[T]) -> Result<()> {
    if w.is_empty() {
        return Err(SdeError::dim("empty weight vector"));
    }
    if w.iter().any(|&x| !(x > T::zero())) || w.windows(2).any(|p| p[0] < p[1]) {
        return Err(SdeError::Contract("weights must be positive and nonincreasing".into()));
    }
    Ok(())
}

/// `(1/√2)·‖√p_X − √p_Y‖₂` over the weighted, L2-normalized spectra.
///
/// Both spectra are fitted to `weights.len()` entries (zero padded).
pub fn hellinger_loss<T: Scalar>(sigma_x: &[T], sigma_y: &[T], weights: &[T]) -> Result<T> {
    let px = spectral_distribution(sigma_x, weights)?;
    let py = spectral_distribution(sigma_y, weights)?;
    Ok(hellinger_between(&px.p, &py.p))
}

pub(crate) fn hellinger_between<T: Scalar>(px: &[T], py: &[T]) -> T {
    let sq: T = px.iter().zip(py).map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    sq.sqrt() / T::of(2.0).sqrt()
}

pub(crate) fn orthonormality_tolerance<T: Scalar>() -> T {
    T::of(1e-8).max(T::epsilon() * T::of(1e3))
}

/// `(1/√(2k))·‖V_Xᵀ V_Y − I_k‖_F` for `n × k` orthonormal column blocks.
pub fn subspace_loss<T: Scalar>(vx: &Matrix<T>, vy: &Matrix<T>) -> Result<T> {
    if vx.shape() != vy.shape() {
        return Err(SdeError::dim(format!("subspace bases {:?} vs {:?}", vx.shape(), vy.shape())));
    }
    let k = vx.cols();
    if k == 0 {
        return Err(SdeError::dim("subspace dimension must be >= 1"));
    }
    let tol = orthonormality_tolerance::<T>();
    for (name, v) in [("V_X", vx), ("V_Y", vy)] {
        let defect = v.orthonormality_defect();
        if !(defect <= tol) {
            return Err(SdeError::Contract(format!("{name} columns are not orthonormal (defect {defect})")));
        }
    }
    let gram = vx.t_matmul(vy)?;
    let dev = gram.sub(&Matrix::identity(k))?.frobenius_norm();
    Ok(dev / T::of_usize(2 * k).sqrt())
}

/// Flips columns of `vy` so that every diagonal entry of `V_Xᵀ V_Y` is
/// nonnegative. Returns the aligned basis and the applied signs.
///
/// Singular vectors are defined up to sign per triplet; aligning the target
/// basis to the query basis makes the Gram loss independent of that choice.
pub fn align_signs<T: Scalar>(vx: &Matrix<T>, vy: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let signs: Vec<T> = (0..vy.cols())
        .map(|j| {
            let d = (0..vy.rows()).fold(T::zero(), |acc, i| acc + vx[(i, j)] * vy[(i, j)]);
            if d < T::zero() {
                -T::one()
            } else {
                T::one()
            }
        })
        .collect();
    (vy.scale_columns(&signs).expect("one sign per column"), signs)
}

/// `min(|S_X|, |S_Y|, 8)`, at least 1.
pub fn default_k<T: Scalar>(px: &SubspacePartition<T>, py: &SubspacePartition<T>) -> usize {
    px.strong().len().min(py.strong().len()).min(MAX_AUTO_K).max(1)
}

/// Scalar values of every loss term for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub feat: f64,
    pub hellinger: f64,
    pub subspace: f64,
    /// `(hellinger + subspace) / 2`
    pub spec: f64,
    pub lambda: f64,
    /// `feat + lambda · spec`
    pub total: f64,
    pub temperature: f64,
    pub k: usize,
}

/// The spectral half of the objective with the factors it was computed from.
#[derive(Debug, Clone)]
pub struct SpectralTerms<T> {
    pub dec_x: SpectralDecomposition<T>,
    pub dec_y: SpectralDecomposition<T>,
    pub weights: Vec<T>,
    pub k: usize,
    pub hellinger: T,
    pub subspace: T,
    /// Column signs applied to the target basis before the Gram loss.
    pub target_signs: Vec<T>,
}

impl<T: Scalar> SpectralTerms<T> {
    pub fn spec(&self) -> T {
        (self.hellinger + self.subspace) / T::of(2.0)
    }
}

/// Hellinger and subspace terms of `(X, Y)`; `weights` defaults to
/// [`linear_weights`] over the longer spectrum.
pub fn spectral_terms<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    k: usize,
    weights: Option<&[T]>,
) -> Result<SpectralTerms<T>> {
    let dec_x = svd(x)?;
    let dec_y = svd(y)?;
    spectral_terms_from(dec_x, dec_y, k, weights)
}

pub fn spectral_terms_from<T: Scalar>(
    dec_x: SpectralDecomposition<T>,
    dec_y: SpectralDecomposition<T>,
    k: usize,
    weights: Option<&[T]>,
) -> Result<SpectralTerms<T>> {
    if dec_x.rank() == 0 || dec_y.rank() == 0 {
        return Err(SdeError::degenerate("rank-0 batch has no spectrum"));
    }
    if k == 0 || k > dec_x.rank().min(dec_y.rank()) {
        return Err(SdeError::range(format!(
            "subspace dimension {k} must be in 1..={}",
            dec_x.rank().min(dec_y.rank())
        )));
    }
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => linear_weights(dec_x.rank().max(dec_y.rank())),
    };
    let hellinger = hellinger_loss(dec_x.sigma(), dec_y.sigma(), &weights)?;
    let vx = dec_x.top_right_vectors(k);
    let (vy, target_signs) = align_signs(&vx, &dec_y.top_right_vectors(k));
    let subspace = subspace_loss(&vx, &vy)?;
    Ok(SpectralTerms { dec_x, dec_y, weights, k, hellinger, subspace, target_signs })
}

/// `L_spec = ½(L_hellinger + L_subspace)`.
pub fn spec_loss<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, k: usize) -> Result<T> {
    Ok(spectral_terms(x, y, k, None)?.spec())
}

/// Assembles the report from already computed terms.
pub fn loss_report<T: Scalar>(feat: T, terms: &SpectralTerms<T>, lambda: f64, tau: f64) -> LossReport {
    let hellinger = terms.hellinger.as_f64();
    let subspace = terms.subspace.as_f64();
    let spec = (hellinger + subspace) / 2.0;
    let feat = feat.as_f64();
    LossReport { feat, hellinger, subspace, spec, lambda, total: feat + lambda * spec, temperature: tau, k: terms.k }
}

/// Full dual-domain loss of enhanced batches: `L_feat + λ·L_spec`.
pub fn total_loss<T: Scalar>(xe: &Matrix<T>, ye: &Matrix<T>, lambda: f64, k: usize, tau: T) -> Result<LossReport> {
    let feat = infonce(xe, ye, tau)?;
    let terms = spectral_terms(xe, ye, k, None)?;
    Ok(loss_report(feat, &terms, lambda, tau.as_f64()))
}
