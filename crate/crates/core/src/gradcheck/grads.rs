//! Closed-form gradients of the loss terms.

use crate::error::{Result, SdeError};
use crate::losses::{infonce_parts, spectral_distribution, spectral_terms, SpectralTerms};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::SpectralDecomposition;

/// Minimum relative singular-value gap for differentiating singular vectors.
pub const GAP_TOLERANCE: f64 = 1e-6;

/// `(∂L/∂X, ∂L/∂Y)` of the batch-summed InfoNCE.
pub fn grad_infonce<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, tau: T) -> Result<(Matrix<T>, Matrix<T>)> {
    let parts = infonce_parts(x, y, tau)?;
    // ∂L/∂s_ij = (P_ij − δ_ij)/τ
    let g = parts.residual.map(|v| v / tau);
    let dx_hat = g.matmul(&parts.y_hat)?;
    let dy_hat = g.t_matmul(&parts.x_hat)?;
    Ok((
        through_normalization(&dx_hat, &parts.x_hat, &parts.x_norms),
        through_normalization(&dy_hat, &parts.y_hat, &parts.y_norms),
    ))
}

/// Pulls a gradient w.r.t. unit rows back to the raw rows:
/// `∂x = (I − x̂x̂ᵀ) ∂x̂ / ‖x‖`.
fn through_normalization<T: Scalar>(d_hat: &Matrix<T>, hat: &Matrix<T>, norms: &[T]) -> Matrix<T> {
    let mut out = d_hat.clone();
    for (i, &n) in norms.iter().enumerate() {
        let proj = crate::matrix::dot(d_hat.row(i), hat.row(i));
        for (o, &h) in out.row_mut(i).iter_mut().zip(hat.row(i)) {
            *o = (*o - proj * h) / n;
        }
    }
    out
}

/// `(∂H/∂σ_X, ∂H/∂σ_Y)` of the weighted Hellinger loss; each output has the
/// length of its input spectrum. Zero at the minimum `H = 0`.
pub fn grad_hellinger_sigma<T: Scalar>(sigma_x: &[T], sigma_y: &[T], weights: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let px = spectral_distribution(sigma_x, weights)?;
    let py = spectral_distribution(sigma_y, weights)?;
    let (ax, ay): (Vec<T>, Vec<T>) = (px.p.iter().map(|v| v.sqrt()).collect(), py.p.iter().map(|v| v.sqrt()).collect());
    let diff: Vec<T> = ax.iter().zip(&ay).map(|(&a, &b)| a - b).collect();
    let dist = crate::matrix::norm2(&diff);
    if dist == T::zero() {
        return Ok((vec![T::zero(); sigma_x.len()], vec![T::zero(); sigma_y.len()]));
    }
    // H = ‖√p_X − √p_Y‖/√2, so ∂H/∂√p_X = diff / (√2·dist)
    let c = T::one() / (T::of(2.0).sqrt() * dist);
    let gx: Vec<T> = diff.iter().map(|&d| d * c).collect();
    let gy: Vec<T> = diff.iter().map(|&d| -d * c).collect();
    Ok((
        sigma_gradient(&gx, &ax, &px.p, px.scale, weights, sigma_x.len()),
        sigma_gradient(&gy, &ay, &py.p, py.scale, weights, sigma_y.len()),
    ))
}

/// Chain rule `√p → p → q = w⊙σ → σ`, with `∂p/∂q = (I − ppᵀ)/‖q‖`.
fn sigma_gradient<T: Scalar>(g_sqrt: &[T], sqrt_p: &[T], p: &[T], scale: T, w: &[T], len: usize) -> Vec<T> {
    // entries with p = 0 are padding (or exact zeros) and carry no gradient
    let gp: Vec<T> = g_sqrt
        .iter()
        .zip(sqrt_p)
        .map(|(&g, &s)| if s > T::zero() { g / (T::of(2.0) * s) } else { T::zero() })
        .collect();
    let proj = crate::matrix::dot(&gp, p);
    (0..len).map(|i| if i < w.len() { w[i] * (gp[i] - proj * p[i]) / scale } else { T::zero() }).collect()
}

/// `U diag(g) Vᵀ`, the feature-space gradient of a function of σ.
pub fn sigma_to_features<T: Scalar>(dec: &SpectralDecomposition<T>, g: &[T]) -> Matrix<T> {
    let r = dec.rank().min(g.len());
    let (m, n) = dec.shape();
    let mut out = Matrix::zeros(m, n);
    let (u, v) = (dec.u(), dec.v());
    for l in 0..r {
        if g[l] == T::zero() {
            continue;
        }
        for i in 0..m {
            let a = g[l] * u[(i, l)];
            for (o, j) in out.row_mut(i).iter_mut().zip(0..n) {
                *o += a * v[(j, l)];
            }
        }
    }
    out
}

/// Verifies that the top `k` singular values are simple and that every
/// singular value is resolved, so the singular vectors are differentiable.
pub fn check_spectral_gap<T: Scalar>(dec: &SpectralDecomposition<T>, k: usize) -> Result<()> {
    let s = dec.sigma();
    let (m, n) = dec.shape();
    let threshold = T::of(GAP_TOLERANCE) * s.first().copied().unwrap_or_else(T::zero);
    if dec.rank() < m.min(n) {
        return Err(SdeError::SpectralGap { index: dec.rank(), gap: 0.0, threshold: threshold.as_f64() });
    }
    for i in 0..k.min(s.len()) {
        let next = s.get(i + 1).copied().unwrap_or_else(T::zero);
        let gap = s[i] - next;
        if !(gap >= threshold) {
            return Err(SdeError::SpectralGap { index: i, gap: gap.as_f64(), threshold: threshold.as_f64() });
        }
    }
    Ok(())
}

/// Feature gradient of a loss that depends on `F` only through `V`:
/// `Ā = U[S(K∘(VᵀV̄ − V̄ᵀV))]Vᵀ + U S⁻¹ V̄ᵀ(I − VVᵀ)`, `K_ij = 1/(s_j² − s_i²)`.
///
/// `v_bar` may have fewer columns than the rank; missing columns are zero.
pub fn right_vectors_to_features<T: Scalar>(dec: &SpectralDecomposition<T>, v_bar: &Matrix<T>) -> Result<Matrix<T>> {
    let (u, v, s) = (dec.u(), dec.v(), dec.sigma());
    let r = dec.rank();
    let n = v.rows();
    if v_bar.rows() != n || v_bar.cols() > r {
        return Err(SdeError::dim(format!("V gradient {:?} for a rank-{r} basis with {n} rows", v_bar.shape())));
    }
    let mut vb = Matrix::zeros(n, r);
    for i in 0..n {
        vb.row_mut(i)[..v_bar.cols()].copy_from_slice(v_bar.row(i));
    }
    let j = v.t_matmul(&vb)?; // r × r
    let inner = Matrix::from_fn(r, r, |a, b| {
        if a == b {
            T::zero()
        } else {
            s[a] * (j[(a, b)] - j[(b, a)]) / (s[b] * s[b] - s[a] * s[a])
        }
    });
    let mut out = u.matmul(&inner)?.matmul_t(v)?;
    // V̄ᵀ(I − VVᵀ) = V̄ᵀ − JᵀVᵀ, rows scaled by 1/s
    let mut residual = vb.transpose().sub(&j.t_matmul(&v.transpose())?)?;
    for a in 0..r {
        let inv = T::one() / s[a];
        residual.row_mut(a).iter_mut().for_each(|x| *x *= inv);
    }
    out.axpy(T::one(), &u.matmul(&residual)?)?;
    Ok(out)
}

/// Gradients of each spectral term w.r.t. both feature batches.
#[derive(Debug, Clone)]
pub struct SpectralGradients<T> {
    pub hellinger_x: Matrix<T>,
    pub hellinger_y: Matrix<T>,
    pub subspace_x: Matrix<T>,
    pub subspace_y: Matrix<T>,
}

/// Hellinger gradients only; valid wherever the singular values are simple.
pub fn hellinger_gradients<T: Scalar>(terms: &SpectralTerms<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (gx, gy) = grad_hellinger_sigma(terms.dec_x.sigma(), terms.dec_y.sigma(), &terms.weights)?;
    Ok((sigma_to_features(&terms.dec_x, &gx), sigma_to_features(&terms.dec_y, &gy)))
}

/// Subspace-loss gradients through both SVDs. Fails with
/// [`SdeError::SpectralGap`] when a top-`k` singular value is not simple.
pub fn subspace_gradients<T: Scalar>(terms: &SpectralTerms<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let k = terms.k;
    check_spectral_gap(&terms.dec_x, k)?;
    check_spectral_gap(&terms.dec_y, k)?;
    let (mx, nx) = terms.dec_x.shape();
    let (my, ny) = terms.dec_y.shape();
    if terms.subspace == T::zero() {
        return Ok((Matrix::zeros(mx, nx), Matrix::zeros(my, ny)));
    }
    let vx = terms.dec_x.top_right_vectors(k);
    let vy = terms.dec_y.top_right_vectors(k).scale_columns(&terms.target_signs)?;
    // L = ‖G − I‖/√(2k), G = V_Xᵀ V_Y, so ∂L/∂G = (G − I)/(2k·L)
    let gram = vx.t_matmul(&vy)?;
    let e = gram.sub(&Matrix::identity(k))?.scale(T::one() / (T::of_usize(2 * k) * terms.subspace));
    let d_vx = vy.matmul_t(&e)?;
    let d_vy = vx.matmul(&e)?.scale_columns(&terms.target_signs)?;
    Ok((right_vectors_to_features(&terms.dec_x, &d_vx)?, right_vectors_to_features(&terms.dec_y, &d_vy)?))
}

pub fn spectral_gradients<T: Scalar>(terms: &SpectralTerms<T>) -> Result<SpectralGradients<T>> {
    let (hellinger_x, hellinger_y) = hellinger_gradients(terms)?;
    let (subspace_x, subspace_y) = subspace_gradients(terms)?;
    Ok(SpectralGradients { hellinger_x, hellinger_y, subspace_x, subspace_y })
}

/// `(∂L_spec/∂X, ∂L_spec/∂Y)` with `L_spec = ½(L_hellinger + L_subspace)`.
pub fn grad_spectral<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    k: usize,
    weights: Option<&[T]>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let terms = spectral_terms(x, y, k, weights)?;
    let g = spectral_gradients(&terms)?;
    let half = T::of(0.5);
    let dx = g.hellinger_x.add(&g.subspace_x)?.scale(half);
    let dy = g.hellinger_y.add(&g.subspace_y)?.scale(half);
    Ok((dx, dy))
}
