//! Marchenko–Pastur support bounds and noise-scale estimation.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Result, SdeError};
use crate::scalar::Scalar;

/// Asymptotic singular-value support `[ϑ|√n − √m|, ϑ(√n + √m)]` of an
/// `m × n` i.i.d. noise matrix with entry standard deviation `ϑ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpBounds<T> {
    pub lower: T,
    pub upper: T,
    pub vartheta: T,
    pub m: usize,
    pub n: usize,
}

pub fn mp_bounds<T: Scalar>(m: usize, n: usize, vartheta: T) -> Result<MpBounds<T>> {
    if m == 0 || n == 0 {
        return Err(SdeError::dim(format!("mp bounds need m, n >= 1, got {m}x{n}")));
    }
    if !(vartheta > T::zero()) || !vartheta.is_finite() {
        return Err(SdeError::range(format!("noise scale must be > 0, got {vartheta}")));
    }
    let (sm, sn) = (T::of_usize(m).sqrt(), T::of_usize(n).sqrt());
    Ok(MpBounds { lower: vartheta * (sn - sm).abs(), upper: vartheta * (sn + sm), vartheta, m, n })
}

/// How the noise scale `ϑ` is recovered from an observed spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseEstimator {
    /// Median singular value over the median of the unit-variance
    /// Marchenko–Pastur singular-value law for the same aspect ratio.
    #[default]
    MpMedian,
    /// Median singular value over the midpoint of the unit-variance support,
    /// `(|√n − √m| + √n + √m) / 2`.
    SupportCenter,
}

/// Noise-scale estimate with the default [`NoiseEstimator`].
pub fn estimate_vartheta<T: Scalar>(sigma: &[T], m: usize, n: usize) -> Result<T> {
    estimate_vartheta_with(sigma, m, n, NoiseEstimator::default())
}

pub fn estimate_vartheta_with<T: Scalar>(sigma: &[T], m: usize, n: usize, estimator: NoiseEstimator) -> Result<T> {
    if sigma.is_empty() {
        return Err(SdeError::degenerate("noise scale of an empty spectrum"));
    }
    if m == 0 || n == 0 {
        return Err(SdeError::dim(format!("noise scale needs m, n >= 1, got {m}x{n}")));
    }
    // zeros carry no scale information (they only appear in hand-built spectra)
    let positive: Vec<T> = sigma.iter().copied().filter(|&s| s > T::zero()).collect();
    if positive.is_empty() {
        return Err(SdeError::degenerate("noise scale of an all-zero spectrum"));
    }
    let med = median(&positive);
    let reference = match estimator {
        NoiseEstimator::SupportCenter => {
            let unit = mp_bounds(m, n, T::one())?;
            (unit.lower + unit.upper) / T::of(2.0)
        }
        NoiseEstimator::MpMedian => T::of(mp_median_singular_value(m, n)),
    };
    Ok(med / reference)
}

/// Median singular value of an `m × n` matrix of i.i.d. unit-variance
/// entries in the Marchenko–Pastur limit: `√(max(m,n) · μ_β)` with
/// `β = min/max` and `μ_β` the median of the eigenvalue law.
pub fn mp_median_singular_value(m: usize, n: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let (small, large) = if m <= n { (m, n) } else { (n, m) };
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().expect("cache lock").get(&(small, large)) {
        return v;
    }
    let beta = small as f64 / large as f64;
    let value = (large as f64 * mp_eigenvalue_median(beta)).sqrt();
    cache.lock().expect("cache lock").insert((small, large), value);
    value
}

/// Median of the Marchenko–Pastur eigenvalue law with ratio `β ∈ (0, 1]`.
///
/// The density `√((b−x)(x−a)) / (2πβx)` on `[a, b] = [(1−√β)², (1+√β)²]`
/// is integrated in the angle `θ` with `x = a + h(1 − cos θ)`, `h = (b−a)/2`,
/// which removes the square-root endpoint singularities.
pub fn mp_eigenvalue_median(beta: f64) -> f64 {
    assert!(beta > 0.0 && beta <= 1.0, "aspect ratio must be in (0, 1], got {beta}");
    let a = (1.0 - beta.sqrt()).powi(2);
    let b = (1.0 + beta.sqrt()).powi(2);
    let h = (b - a) / 2.0;
    let x_of = |theta: f64| a + h * (1.0 - theta.cos());
    let density = |theta: f64| {
        let (c, s) = (theta.cos(), theta.sin());
        if a == 0.0 {
            // (1 - c) cancels between sin² and x
            h * (1.0 + c) / (2.0 * std::f64::consts::PI * beta)
        } else {
            h * h * s * s / (2.0 * std::f64::consts::PI * beta * x_of(theta))
        }
    };
    let mass = |upper: f64| simpson(&density, 0.0, upper, 1024);
    let total = mass(std::f64::consts::PI);
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 0.5 * total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    x_of(0.5 * (lo + hi))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Median with midpoint averaging for even lengths.
pub fn median<T: Scalar>(values: &[T]) -> T {
    quantile(values, T::of(0.5))
}

/// Linearly interpolated quantile (the `(n−1)·q` rule).
pub fn quantile<T: Scalar>(values: &[T], q: T) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = q * T::of_usize(sorted.len() - 1);
    let lo = pos.floor().to_usize().unwrap_or(0);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - T::of_usize(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, RngState};
    use crate::spectral::svd;

    #[test]
    fn bounds_examples() {
        let b = mp_bounds(100, 400, 1.0).unwrap();
        assert_eq!((b.lower, b.upper), (10.0, 30.0));
        assert_eq!(mp_bounds(50, 50, 1.0).unwrap().lower, 0.0);
        let tall = mp_bounds(400, 100, 2.0).unwrap();
        assert_eq!((tall.lower, tall.upper), (20.0, 60.0));
        assert!(mp_bounds(3, 3, 0.0).is_err());
    }

    #[test]
    fn support_center_example() {
        let est = estimate_vartheta_with(&[5.0, 5.0, 5.0], 3, 3, NoiseEstimator::SupportCenter).unwrap();
        assert!((est - 5.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn estimator_is_homogeneous() {
        let s = [9.0, 4.0, 3.5, 2.0, 1.0];
        for est in [NoiseEstimator::MpMedian, NoiseEstimator::SupportCenter] {
            let base = estimate_vartheta_with(&s, 5, 9, est).unwrap();
            let scaled: Vec<f64> = s.iter().map(|v| v * 4.0).collect();
            assert_eq!(estimate_vartheta_with(&scaled, 5, 9, est).unwrap(), 4.0 * base);
        }
    }

    #[test]
    fn degenerate_spectra() {
        assert!(matches!(estimate_vartheta::<f64>(&[], 3, 3), Err(SdeError::Degenerate(_))));
        assert!(matches!(estimate_vartheta(&[0.0, 0.0], 3, 3), Err(SdeError::Degenerate(_))));
    }

    // Reference medians computed independently with scipy (quad + brentq on
    // the closed-form density).
    #[test]
    fn eigenvalue_median_matches_reference() {
        assert!((mp_eigenvalue_median(0.25) - 0.916_004_070_686_661_7).abs() < 1e-9);
        assert!((mp_median_singular_value(100, 400) - 19.141_620_314_766_058).abs() < 1e-7);
    }

    #[test]
    fn eigenvalue_median_square_case_matches_monte_carlo() {
        // β = 1, estimated from pooled Wishart eigenvalues
        let mut rng = RngState::new(17);
        let n = 120;
        let mut eig = Vec::new();
        for _ in 0..5 {
            let f = gaussian_matrix(&mut rng, n, n, 1.0).unwrap();
            eig.extend(svd(&f).unwrap().sigma().iter().map(|s| s * s / n as f64));
        }
        let mc = median(&eig);
        assert!((mp_eigenvalue_median(1.0) - mc).abs() < 0.03, "{mc}");
    }

    #[test]
    fn gaussian_noise_scale_recovered() {
        let mut rng = RngState::new(23);
        let f = gaussian_matrix(&mut rng, 200, 800, 1.0f64).unwrap();
        let s = svd(&f).unwrap();
        for est in [NoiseEstimator::MpMedian, NoiseEstimator::SupportCenter] {
            let v = estimate_vartheta_with(s.sigma(), 200, 800, est).unwrap();
            assert!(v > 0.8 && v < 1.2, "{est:?} {v}");
        }
        let v = estimate_vartheta(s.sigma(), 200, 800).unwrap();
        assert!((v - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }
}
