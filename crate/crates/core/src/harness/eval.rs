use crate::error::{Result, SdeError};
use crate::harness::task::SyntheticTask;
use crate::harness::train::EncoderParams;
use crate::losses::normalize_rows;
use crate::matrix::{dot, Matrix};
use crate::rng::{random_orthogonal, RngState};
use crate::spectral::svd;

/// Share of queries whose own target is the top-ranked candidate by cosine.
/// Ties go to the lowest candidate index.
pub fn precision_at_1(queries: &Matrix<f64>, targets: &Matrix<f64>) -> Result<f64> {
    if queries.shape() != targets.shape() {
        return Err(SdeError::dim(format!("queries {:?} vs targets {:?}", queries.shape(), targets.shape())));
    }
    if queries.rows() < 2 {
        return Err(SdeError::dim("precision@1 needs at least 2 pairs"));
    }
    let (q, _) = normalize_rows(queries, "query embeddings")?;
    let (t, _) = normalize_rows(targets, "target embeddings")?;
    let hits = (0..q.rows())
        .filter(|&i| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for j in 0..t.rows() {
                let s = dot(q.row(i), t.row(j));
                if s > best_score {
                    best = j;
                    best_score = s;
                }
            }
            best == i
        })
        .count();
    Ok(hits as f64 / q.rows() as f64)
}

/// Precision@1 after each of `round(fraction·P)` randomly chosen targets is
/// rotated by its own Haar-random orthogonal map.
pub fn perturbed_precision(
    queries: &Matrix<f64>,
    targets: &Matrix<f64>,
    fraction: f64,
    rng: &mut RngState,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SdeError::range(format!("fraction must be in [0, 1], got {fraction}")));
    }
    let count = (fraction * targets.rows() as f64).round() as usize;
    let mut moved = targets.clone();
    for j in rng.sample_indices(targets.rows(), count) {
        let q: Matrix<f64> = random_orthogonal(rng, targets.cols())?;
        let row = Matrix::from_fn(targets.cols(), 1, |i, _| targets[(j, i)]);
        let rotated = q.matmul(&row)?;
        moved.row_mut(j).copy_from_slice(rotated.as_slice());
    }
    precision_at_1(queries, &moved)
}

/// Test-split embeddings `(X_test W_x, Y_test W_y)`.
pub fn test_embeddings(params: &EncoderParams, task: &SyntheticTask) -> Result<(Matrix<f64>, Matrix<f64>)> {
    Ok((params.embed_x(&task.x, &task.test)?, params.embed_y(&task.y, &task.test)?))
}

pub fn evaluate(params: &EncoderParams, task: &SyntheticTask) -> Result<f64> {
    let (x, y) = test_embeddings(params, task)?;
    precision_at_1(&x, &y)
}

pub fn perturbed_eval(params: &EncoderParams, task: &SyntheticTask, fraction: f64, rng: &mut RngState) -> Result<f64> {
    let (x, y) = test_embeddings(params, task)?;
    perturbed_precision(&x, &y, fraction, rng)
}

/// Encoders fit by least squares from raw features to the shared latents on
/// the training split, via the SVD pseudo-inverse.
pub fn least_squares_oracle(task: &SyntheticTask) -> Result<EncoderParams> {
    let d = task.latents.cols();
    if d == 0 {
        return Err(SdeError::degenerate("task has no shared latent to regress on"));
    }
    let z = task.latents.select_rows(&task.train);
    let fit = |raw: &Matrix<f64>| -> Result<Matrix<f64>> {
        let a = raw.select_rows(&task.train);
        let dec = svd(&a)?;
        // W = V S⁻¹ Uᵀ Z
        let mut uz = dec.u().t_matmul(&z)?;
        for (i, &s) in dec.sigma().iter().enumerate() {
            uz.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        dec.v().matmul(&uz)
    };
    Ok(EncoderParams { w_x: fit(&task.x)?, w_y: fit(&task.y)?, embed_dim: d })
}
