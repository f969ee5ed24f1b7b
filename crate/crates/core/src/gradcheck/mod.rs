//! Central finite-difference oracle and the analytic gradients it checks.

mod grads;

pub use grads::{
    check_spectral_gap, grad_hellinger_sigma, grad_infonce, grad_spectral, hellinger_gradients,
    right_vectors_to_features, sigma_to_features, spectral_gradients, subspace_gradients, SpectralGradients,
    GAP_TOLERANCE,
};

use serde::Serialize;

use crate::error::{Result, SdeError};
use crate::losses::{infonce, spectral_terms};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, RngState};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-4;
pub const SUITE_SHAPE: (usize, usize) = (12, 20);
pub const SUITE_INSTANCES: usize = 20;
const PROBES_PER_MATRIX: usize = 64;

/// Worst-case agreement between an analytic gradient and central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub probe_count: usize,
    pub step_size: f64,
}

impl GradReport {
    pub fn empty(step_size: f64) -> Self {
        Self { max_rel_error: 0.0, max_abs_error: 0.0, probe_count: 0, step_size }
    }

    pub fn merge(self, other: GradReport) -> Self {
        Self {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            probe_count: self.probe_count + other.probe_count,
            step_size: self.step_size,
        }
    }
}

/// `|a − f| / max(|a|, |f|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(SdeError::range(format!("finite-difference step must be in [1e-7, 1e-3], got {h}")));
    }
    Ok(())
}

fn central<F>(f: &F, x: &Matrix<f64>, h: f64, (i, j): (usize, usize)) -> Result<f64>
where
    F: Fn(&Matrix<f64>) -> Result<f64>,
{
    let mut probe = x.clone();
    let base = x[(i, j)];
    probe[(i, j)] = base + h;
    let plus = f(&probe)?;
    probe[(i, j)] = base - h;
    let minus = f(&probe)?;
    if !plus.is_finite() || !minus.is_finite() {
        return Err(SdeError::NonFinite(format!("objective is not finite near coordinate ({i}, {j})")));
    }
    Ok((plus - minus) / (2.0 * h))
}

/// Central-difference gradient over every coordinate.
pub fn fd_gradient<F>(f: F, x: &Matrix<f64>, h: f64) -> Result<Matrix<f64>>
where
    F: Fn(&Matrix<f64>) -> Result<f64>,
{
    check_step(h)?;
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            out[(i, j)] = central(&f, x, h, (i, j))?;
        }
    }
    Ok(out)
}

/// Central differences at the given coordinates only.
pub fn fd_gradient_sampled<F>(f: F, x: &Matrix<f64>, h: f64, coords: &[(usize, usize)]) -> Result<Vec<f64>>
where
    F: Fn(&Matrix<f64>) -> Result<f64>,
{
    check_step(h)?;
    coords.iter().map(|&c| central(&f, x, h, c)).collect()
}

/// `count` distinct coordinates of a `rows × cols` matrix, in row-major order.
pub fn sample_coordinates(rng: &mut RngState, rows: usize, cols: usize, count: usize) -> Vec<(usize, usize)> {
    let count = count.min(rows * cols);
    rng.sample_indices(rows * cols, count).into_iter().map(|k| (k / cols, k % cols)).collect()
}

/// Compares `analytic` against central differences of `f` at `probes`
/// random coordinates.
pub fn check_gradient<F>(
    f: F,
    x: &Matrix<f64>,
    analytic: &Matrix<f64>,
    h: f64,
    probes: usize,
    rng: &mut RngState,
) -> Result<GradReport>
where
    F: Fn(&Matrix<f64>) -> Result<f64>,
{
    if analytic.shape() != x.shape() {
        return Err(SdeError::dim(format!("gradient {:?} for input {:?}", analytic.shape(), x.shape())));
    }
    let coords = sample_coordinates(rng, x.rows(), x.cols(), probes);
    let numeric = fd_gradient_sampled(f, x, h, &coords)?;
    let mut report = GradReport::empty(h);
    for (&(i, j), &fd) in coords.iter().zip(&numeric) {
        let a = analytic[(i, j)];
        report.max_rel_error = report.max_rel_error.max(relative_error(a, fd));
        report.max_abs_error = report.max_abs_error.max((a - fd).abs());
    }
    report.probe_count = coords.len();
    Ok(report)
}

/// Aggregate result of [`run_suite`].
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub instances: usize,
    pub rows: usize,
    pub cols: usize,
    pub temperature: f64,
    pub k: usize,
    pub tolerance: f64,
    pub infonce: GradReport,
    pub hellinger: GradReport,
    pub subspace: GradReport,
    pub spectral: GradReport,
    /// Draws rejected for violating the spectral-gap precondition.
    pub skipped_degenerate: usize,
    pub pass: bool,
}

/// Checks every analytic gradient against central differences on
/// [`SUITE_INSTANCES`] random `12 × 20` pairs.
pub fn run_suite(seed: u64) -> Result<SuiteReport> {
    run_suite_with(seed, SUITE_INSTANCES, DEFAULT_STEP)
}

pub fn run_suite_with(seed: u64, instances: usize, h: f64) -> Result<SuiteReport> {
    let (rows, cols) = SUITE_SHAPE;
    let (tau, k) = (0.1, 3);
    let mut rng = RngState::new(seed);
    let mut probe_rng = rng.fork(0x9e37);
    let mut acc = [GradReport::empty(h); 4];
    let mut skipped = 0;
    let mut accepted = 0;
    while accepted < instances {
        let x = gaussian_matrix(&mut rng, rows, cols, 1.0)?;
        let y = gaussian_matrix(&mut rng, rows, cols, 1.0)?;
        let terms = spectral_terms(&x, &y, k, None)?;
        let sub = match subspace_gradients(&terms) {
            Ok(g) => g,
            Err(SdeError::SpectralGap { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        accepted += 1;
        let hel = hellinger_gradients(&terms)?;
        let nce = grad_infonce(&x, &y, tau)?;
        let spec = (hel.0.add(&sub.0)?.scale(0.5), hel.1.add(&sub.1)?.scale(0.5));

        let weights = terms.weights.clone();
        let h_of = |a: &Matrix<f64>, b: &Matrix<f64>| -> Result<f64> {
            Ok(spectral_terms(a, b, k, Some(&weights))?.hellinger)
        };
        let s_of = |a: &Matrix<f64>, b: &Matrix<f64>| -> Result<f64> {
            Ok(spectral_terms(a, b, k, Some(&weights))?.subspace)
        };
        let spec_of = |a: &Matrix<f64>, b: &Matrix<f64>| -> Result<f64> {
            Ok(spectral_terms(a, b, k, Some(&weights))?.spec())
        };
        let n_of = |a: &Matrix<f64>, b: &Matrix<f64>| infonce(a, b, tau);

        let p = PROBES_PER_MATRIX;
        let r = &mut probe_rng;
        let checks: [(usize, GradReport); 8] = [
            (0, check_gradient(|a| n_of(a, &y), &x, &nce.0, h, p, r)?),
            (0, check_gradient(|b| n_of(&x, b), &y, &nce.1, h, p, r)?),
            (1, check_gradient(|a| h_of(a, &y), &x, &hel.0, h, p, r)?),
            (1, check_gradient(|b| h_of(&x, b), &y, &hel.1, h, p, r)?),
            (2, check_gradient(|a| s_of(a, &y), &x, &sub.0, h, p, r)?),
            (2, check_gradient(|b| s_of(&x, b), &y, &sub.1, h, p, r)?),
            (3, check_gradient(|a| spec_of(a, &y), &x, &spec.0, h, p, r)?),
            (3, check_gradient(|b| spec_of(&x, b), &y, &spec.1, h, p, r)?),
        ];
        for (slot, rep) in checks {
            acc[slot] = acc[slot].merge(rep);
        }
    }
    let pass = acc.iter().all(|r| r.max_rel_error <= SUITE_TOLERANCE);
    Ok(SuiteReport {
        seed,
        instances,
        rows,
        cols,
        temperature: tau,
        k,
        tolerance: SUITE_TOLERANCE,
        infonce: acc[0],
        hellinger: acc[1],
        subspace: acc[2],
        spectral: acc[3],
        skipped_degenerate: skipped,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::linear_weights;
    use crate::spectral::svd;

    fn assert_fd_close(analytic: &Matrix<f64>, numeric: &Matrix<f64>, tol: f64) {
        for (a, f) in analytic.as_slice().iter().zip(numeric.as_slice()) {
            assert!(relative_error(*a, *f) <= tol, "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn fd_of_quadratic_and_constant() {
        let mut rng = RngState::new(1);
        let x = gaussian_matrix(&mut rng, 3, 4, 1.0).unwrap();
        let g = fd_gradient(|a| Ok(a.frobenius_norm().powi(2)), &x, 1e-5).unwrap();
        assert_fd_close(&x.scale(2.0), &g, 1e-6);
        let c = fd_gradient(|_| Ok(3.5), &x, 1e-5).unwrap();
        assert!(c.max_abs() < 1e-9);
    }

    #[test]
    fn fd_rejects_bad_steps_and_nan() {
        let x = Matrix::<f64>::identity(2);
        assert!(matches!(fd_gradient(|_| Ok(0.0), &x, 1e-2), Err(SdeError::Range(_))));
        assert!(matches!(fd_gradient(|_| Ok(f64::NAN), &x, 1e-5), Err(SdeError::NonFinite(_))));
    }

    #[test]
    fn infonce_gradient_matches_fd() {
        // rows clustered around a shared direction keep the τ = 0.02 softmax
        // unsaturated, so every gradient entry is resolvable by differences
        let mut rng = RngState::new(2);
        let base = gaussian_matrix(&mut rng, 1, 7, 1.0).unwrap();
        let around = |rng: &mut RngState| {
            let mut m = gaussian_matrix(rng, 5, 7, 0.02).unwrap();
            for i in 0..5 {
                m.row_mut(i).iter_mut().zip(base.row(0)).for_each(|(v, b)| *v += b);
            }
            m
        };
        let x = around(&mut rng);
        let y = around(&mut rng);
        let (dx, dy) = grad_infonce(&x, &y, 0.02).unwrap();
        assert_fd_close(&dx, &fd_gradient(|a| infonce(a, &y, 0.02), &x, 1e-6).unwrap(), 1e-5);
        assert_fd_close(&dy, &fd_gradient(|b| infonce(&x, b, 0.02), &y, 1e-6).unwrap(), 1e-5);
    }

    #[test]
    fn infonce_gradient_single_pair_is_zero() {
        let x = Matrix::from_vec(1, 3, vec![1.0, 2.0, -1.0]).unwrap();
        let y = Matrix::from_vec(1, 3, vec![0.5, 0.1, 3.0]).unwrap();
        let (dx, dy) = grad_infonce(&x, &y, 0.02).unwrap();
        assert!(dx.max_abs() < 1e-12 && dy.max_abs() < 1e-12);
    }

    #[test]
    fn infonce_gradient_orthogonal_2x2() {
        let x = Matrix::<f64>::identity(2);
        let y = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let (dx, _) = grad_infonce(&x, &y, 0.5).unwrap();
        let fd = fd_gradient(|a| infonce(a, &y, 0.5), &x, 1e-6).unwrap();
        assert_fd_close(&dx, &fd, 1e-6);
        // gradient of a normalized row is orthogonal to that row
        // hand-derived: a = 1/(1 + e^{-2}) is the softmax weight of the larger logit
        let a = 1.0 / (1.0 + (-2.0f64).exp());
        assert!(dx[(0, 0)].abs() < 1e-15 && dx[(1, 1)].abs() < 1e-15);
        assert!((dx[(0, 1)] + (1.0 - a) / 0.5).abs() < 1e-12);
        assert!((dx[(1, 0)] - a / 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_value_derivative() {
        let mut rng = RngState::new(3);
        let f = gaussian_matrix(&mut rng, 6, 9, 1.0).unwrap();
        let dec = svd(&f).unwrap();
        let h: f64 = 1e-4;
        for i in 0..dec.rank() {
            let mut e = vec![0.0; dec.rank()];
            e[i] = 1.0;
            let dir = sigma_to_features(&dec, &e);
            let mut moved = f.clone();
            moved.axpy(h, &dir).unwrap();
            let s = svd(&moved).unwrap();
            assert!((s.sigma()[i] - dec.sigma()[i] - h).abs() < 1e-6);
        }
    }

    #[test]
    fn hellinger_gradient_vanishes_at_identity() {
        let mut rng = RngState::new(4);
        let x = gaussian_matrix(&mut rng, 6, 8, 1.0).unwrap();
        let terms = spectral_terms(&x, &x, 2, None).unwrap();
        let (dx, dy) = hellinger_gradients(&terms).unwrap();
        assert!(dx.max_abs() < 1e-8 && dy.max_abs() < 1e-8);
    }

    #[test]
    fn spectral_gradient_matches_full_fd() {
        let mut rng = RngState::new(5);
        let x = gaussian_matrix(&mut rng, 12, 20, 1.0).unwrap();
        let y = gaussian_matrix(&mut rng, 12, 20, 1.0).unwrap();
        let w = linear_weights::<f64>(12);
        let (dx, dy) = grad_spectral(&x, &y, 3, Some(&w)).unwrap();
        let f = |a: &Matrix<f64>, b: &Matrix<f64>| Ok(spectral_terms(a, b, 3, Some(&w))?.spec());
        assert_fd_close(&dx, &fd_gradient(|a| f(a, &y), &x, 1e-5).unwrap(), 1e-4);
        assert_fd_close(&dy, &fd_gradient(|b| f(&x, b), &y, 1e-5).unwrap(), 1e-4);
    }

    #[test]
    fn tall_subspace_gradient_matches_fd() {
        let mut rng = RngState::new(6);
        let x = gaussian_matrix(&mut rng, 9, 5, 1.0).unwrap();
        let y = gaussian_matrix(&mut rng, 9, 5, 1.0).unwrap();
        let terms = spectral_terms(&x, &y, 2, None).unwrap();
        let w = terms.weights.clone();
        let (dx, _) = subspace_gradients(&terms).unwrap();
        let fd = fd_gradient(|a| Ok(spectral_terms(a, &y, 2, Some(&w))?.subspace), &x, 1e-5).unwrap();
        assert_fd_close(&dx, &fd, 1e-4);
    }

    #[test]
    fn degenerate_gap_reported() {
        let f = Matrix::from_diag(&[2.0, 2.0, 1.0]);
        let dec = svd(&f).unwrap();
        assert!(matches!(check_spectral_gap(&dec, 1), Err(SdeError::SpectralGap { index: 0, .. })));
        assert!(check_spectral_gap(&svd(&Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap(), 3).is_ok());
        let r = grad_spectral(&f, &Matrix::from_diag(&[3.0, 2.0, 1.0]), 1, None);
        assert!(matches!(r, Err(SdeError::SpectralGap { .. })));
    }

    #[test]
    fn hellinger_gradient_is_equivariant() {
        let mut rng = RngState::new(7);
        let x = gaussian_matrix(&mut rng, 6, 8, 1.0).unwrap();
        let y = gaussian_matrix(&mut rng, 6, 8, 1.0).unwrap();
        let q: Matrix<f64> = crate::rng::random_orthogonal(&mut rng, 8).unwrap();
        let (_, dy) = hellinger_gradients(&spectral_terms(&x, &y, 2, None).unwrap()).unwrap();
        let yq = y.matmul_t(&q).unwrap();
        let (_, dyq) = hellinger_gradients(&spectral_terms(&x, &yq, 2, None).unwrap()).unwrap();
        assert!(dyq.sub(&dy.matmul_t(&q).unwrap()).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn suite_passes_on_default_seed() {
        let report = run_suite(0).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.infonce.probe_count, SUITE_INSTANCES * 2 * PROBES_PER_MATRIX);
    }
}
