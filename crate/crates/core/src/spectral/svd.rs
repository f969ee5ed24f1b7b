//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use serde::Serialize;

use crate::error::{Result, SdeError};
use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Relative cutoff below which singular values are dropped from the rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Sweep cap before the decomposition reports non-convergence.
pub const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `F = U · diag(σ) · Vᵀ`.
///
/// `u` is `m × r`, `v` is `n × r`, `sigma` is nonincreasing and strictly
/// above `rank_tolerance · σ₁`. For every triplet the entry of largest
/// magnitude in the `v` column is positive (lowest index wins ties).
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition<T> {
    u: Matrix<T>,
    sigma: Vec<T>,
    v: Matrix<T>,
    rank: usize,
    sweeps: usize,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn u(&self) -> &Matrix<T> {
        &self.u
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn v(&self) -> &Matrix<T> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Jacobi sweeps used, including the final rotation-free sweep.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Shape of the decomposed matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `U · diag(values) · Vᵀ` for an arbitrary replacement spectrum.
    pub fn reconstruct_with(&self, values: &[T]) -> Result<Matrix<T>> {
        if values.len() != self.rank {
            return Err(SdeError::dim(format!(
                "{} singular values for a rank-{} decomposition",
                values.len(),
                self.rank
            )));
        }
        self.u.scale_columns(values)?.matmul_t(&self.v)
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.reconstruct_with(&self.sigma).expect("own spectrum has rank length")
    }

    /// Leading `k` right singular vectors as an `n × k` matrix.
    pub fn top_right_vectors(&self, k: usize) -> Matrix<T> {
        self.v.leading_columns(k)
    }

    pub fn top_left_vectors(&self, k: usize) -> Matrix<T> {
        self.u.leading_columns(k)
    }
}

/// Thin SVD with the default rank tolerance.
pub fn svd<T: Scalar>(f: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    svd_with_tolerance(f, T::of(DEFAULT_RANK_TOLERANCE))
}

/// Thin SVD keeping singular values above `rank_tolerance · σ₁`.
///
/// The rotations act on the columns of whichever of `F` or `Fᵀ` has at least
/// as many rows as columns. A pair is rotated while
/// `|bₚᵀb_q| > ε·rows·‖bₚ‖‖b_q‖`; the sweep loop stops at the first sweep
/// without rotations.
pub fn svd_with_tolerance<T: Scalar>(f: &Matrix<T>, rank_tolerance: T) -> Result<SpectralDecomposition<T>> {
    if !(rank_tolerance > T::zero() && rank_tolerance <= T::of(1e-3)) {
        return Err(SdeError::range(format!("rank tolerance must be in (0, 1e-3], got {rank_tolerance}")));
    }
    if let Some(pos) = f.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(SdeError::NonFinite(format!(
            "svd input entry ({}, {}) is not finite",
            pos / f.cols(),
            pos % f.cols()
        )));
    }
    let (m, n) = f.shape();
    if m == 0 || n == 0 {
        return Err(SdeError::dim(format!("svd of an empty {m}x{n} matrix")));
    }

    let transposed = m < n;
    let (work_rows, work_cols) = if transposed { (n, m) } else { (m, n) };
    // columns of the working matrix A (A = F, or A = Fᵀ when F is wide)
    let mut cols: Vec<Vec<T>> = (0..work_cols)
        .map(|j| if transposed { f.row(j).to_vec() } else { f.column(j) })
        .collect();
    let mut right: Vec<Vec<T>> = (0..work_cols)
        .map(|j| (0..work_cols).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();

    let eps = T::epsilon();
    let tol = eps * T::of_usize(work_rows);
    let fro = f.frobenius_norm();
    let floor = (eps * fro) * (eps * fro);

    let mut sweeps = 0;
    loop {
        if sweeps == MAX_SWEEPS {
            let residual = off_diagonal_residual(&cols);
            return Err(SdeError::Convergence { sweeps, residual: residual.as_f64() });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..work_cols {
            for q in p + 1..work_cols {
                let a_pp = dot(&cols[p], &cols[p]);
                let a_qq = dot(&cols[q], &cols[q]);
                let a_pq = dot(&cols[p], &cols[q]);
                if a_pq.abs() <= floor || a_pq.abs() <= tol * (a_pp * a_qq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (a_qq - a_pp) / (a_pq + a_pq);
                let t = zeta.signum() / (zeta.abs() + T::one().hypot(zeta));
                let c = T::one() / T::one().hypot(t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut right, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..work_cols).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));

    let top = norms[order[0]];
    let cutoff = rank_tolerance * top;
    let rank = if top > T::zero() { order.iter().take_while(|&&j| norms[j] > cutoff).count() } else { 0 };

    let sigma: Vec<T> = order[..rank].iter().map(|&j| norms[j]).collect();
    let left: Vec<Vec<T>> = order[..rank]
        .iter()
        .map(|&j| cols[j].iter().map(|&x| x / norms[j]).collect())
        .collect();
    let rotations: Vec<Vec<T>> = order[..rank].iter().map(|&j| right[j].clone()).collect();

    // A = left · Σ · rotationsᵀ; F = A or Aᵀ
    let (mut u_cols, mut v_cols) = if transposed { (rotations, left) } else { (left, rotations) };
    for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut lead = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < T::zero() {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(SpectralDecomposition {
        u: Matrix::from_columns(m, &u_cols),
        sigma,
        v: Matrix::from_columns(n, &v_cols),
        rank,
        sweeps,
    })
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn off_diagonal_residual<T: Scalar>(cols: &[Vec<T>]) -> T {
    let mut worst = T::zero();
    for p in 0..cols.len() {
        for q in p + 1..cols.len() {
            let denom = (dot(&cols[p], &cols[p]) * dot(&cols[q], &cols[q])).sqrt();
            if denom > T::zero() {
                worst = worst.max(dot(&cols[p], &cols[q]).abs() / denom);
            }
        }
    }
    worst
}
