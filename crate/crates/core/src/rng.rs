//! Seeded random streams and the random matrices built from them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SdeError};
use crate::matrix::{householder_qr, Matrix};
use crate::scalar::Scalar;

/// Identifier of the generator recorded in run manifests.
///
/// ChaCha20 is specified bit-for-bit, so a given seed yields the same stream
/// on every platform. Normal draws use the ziggurat sampler of `rand_distr`.
pub const RNG_ALGORITHM: &str = "chacha20(rand_chacha-0.9)+ziggurat-normal(rand_distr-0.5)";

/// Deterministic random stream.
///
/// Operations take `&mut RngState` and advance it; clone the state to replay
/// a stream from a given point.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha20Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from the original seed and a branch tag.
    pub fn fork(&self, tag: u64) -> Self {
        Self::new(self.seed ^ tag)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        items.shuffle(&mut self.inner);
    }

    /// `count` distinct indices from `0..n`, in increasing order.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        let mut picked = rand::seq::index::sample(&mut self.inner, n, count.min(n)).into_vec();
        picked.sort_unstable();
        picked
    }
}

/// `m × n` matrix of i.i.d. `N(0, sigma²)` draws, filled row-major.
pub fn gaussian_matrix<T: Scalar>(rng: &mut RngState, m: usize, n: usize, sigma: T) -> Result<Matrix<T>> {
    if m == 0 || n == 0 {
        return Err(SdeError::dim(format!("gaussian matrix must be at least 1x1, got {m}x{n}")));
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(SdeError::range(format!("standard deviation must be >= 0, got {sigma}")));
    }
    Ok(Matrix::from_fn(m, n, |_, _| T::of(rng.standard_normal()) * sigma))
}

/// Haar-distributed `n × n` orthogonal matrix.
///
/// QR of a Gaussian matrix with the columns of `Q` flipped so the diagonal
/// of `R` is positive.
pub fn random_orthogonal<T: Scalar>(rng: &mut RngState, n: usize) -> Result<Matrix<T>> {
    let g = gaussian_matrix(rng, n, n, T::one())?;
    let (q, r) = householder_qr(&g)?;
    let signs: Vec<T> =
        (0..n).map(|j| if r[(j, j)] < T::zero() { -T::one() } else { T::one() }).collect();
    q.scale_columns(&signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Determinant by Gaussian elimination with partial pivoting.
    fn lu_determinant(a: &Matrix<f64>) -> f64 {
        let n = a.rows();
        let mut w = a.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| w[(i, k)].abs().total_cmp(&w[(j, k)].abs())).unwrap();
            if w[(p, k)] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    let t = w[(k, j)];
                    w[(k, j)] = w[(p, j)];
                    w[(p, j)] = t;
                }
                det = -det;
            }
            det *= w[(k, k)];
            for i in k + 1..n {
                let f = w[(i, k)] / w[(k, k)];
                for j in k..n {
                    let v = w[(k, j)];
                    w[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    #[test]
    fn zero_sigma_gives_zero_matrix() {
        let g = gaussian_matrix(&mut RngState::new(1), 2, 2, 0.0).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_moments() {
        let g = gaussian_matrix(&mut RngState::new(1), 100, 400, 1.0).unwrap();
        let n = g.as_slice().len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!(var.sqrt() > 0.99 && var.sqrt() < 1.01, "std {}", var.sqrt());
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_matrix::<f64>(&mut RngState::new(7), 3, 5, 1.0).unwrap();
        let b = gaussian_matrix::<f64>(&mut RngState::new(7), 3, 5, 1.0).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            gaussian_matrix::<f64>(&mut RngState::new(1), 0, 3, 1.0),
            Err(SdeError::Dimension(_))
        ));
        assert!(random_orthogonal::<f64>(&mut RngState::new(1), 0).is_err());
    }

    #[test]
    fn orthogonal_one_dimensional() {
        for seed in 0..10 {
            let q: Matrix<f64> = random_orthogonal(&mut RngState::new(seed), 1).unwrap();
            assert_eq!(q[(0, 0)].abs(), 1.0);
        }
    }

    #[test]
    fn orthogonal_eight() {
        let q: Matrix<f64> = random_orthogonal(&mut RngState::new(3), 8).unwrap();
        let qqt = q.matmul_t(&q).unwrap();
        assert!(qqt.sub(&Matrix::identity(8)).unwrap().frobenius_norm() <= 1e-10);
        assert!((lu_determinant(&q).abs() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn orthogonal_large() {
        let mut rng = RngState::new(11);
        for n in [2, 17, 64, 200] {
            let q: Matrix<f64> = random_orthogonal(&mut rng, n).unwrap();
            assert!(q.orthonormality_defect() <= 1e-10, "n={n}");
        }
    }

    #[test]
    fn fork_is_deterministic_and_distinct() {
        let base = RngState::new(42);
        let mut a = base.fork(1);
        let mut b = base.fork(1);
        let mut c = base.fork(2);
        let (x, y, z) = (a.standard_normal(), b.standard_normal(), c.standard_normal());
        assert_eq!(x.to_bits(), y.to_bits());
        assert_ne!(x.to_bits(), z.to_bits());
    }
}
