use serde::{Deserialize, Serialize};

use crate::error::{Result, SdeError};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, RngState};

/// Generator settings for a paired two-modality dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Shared semantic dimensions `d_s`.
    pub latent_dim: usize,
    /// Modality-specific nuisance dimensions per side.
    pub nuisance_dim: usize,
    /// Raw feature dimension of each modality.
    pub ambient_dim: usize,
    pub pairs: usize,
    pub noise_scale: f64,
    /// Amplitude of the nuisance factors relative to the shared ones.
    pub nuisance_scale: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            nuisance_dim: 8,
            ambient_dim: 48,
            pairs: 512,
            noise_scale: 0.5,
            nuisance_scale: 1.0,
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Generated pairs `x = A_x z + B_x u_x + η_x`, `y = A_y z + B_y u_y + η_y`.
#[derive(Debug, Clone, Serialize)]
pub struct SyntheticTask {
    pub config: TaskConfig,
    /// One raw query per row.
    pub x: Matrix<f64>,
    pub y: Matrix<f64>,
    /// Shared latent `z` of each pair.
    pub latents: Matrix<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

const MIXING_TAG: u64 = 0x7461_736b_0001;
const SAMPLE_TAG: u64 = 0x7461_736b_0002;
const SPLIT_TAG: u64 = 0x7461_736b_0003;

/// Draws the dataset and a disjoint train/test split. `batch_size` is the
/// training batch the task must support (`pairs ≥ 4·batch_size`).
pub fn generate_task(cfg: &TaskConfig, batch_size: usize) -> Result<SyntheticTask> {
    let config_err = |key: &str, message: String| SdeError::Config { key: key.into(), message };
    if cfg.ambient_dim == 0 {
        return Err(config_err("task.ambient_dim", "must be >= 1".into()));
    }
    if batch_size == 0 {
        return Err(config_err("train.batch_size", "must be >= 1".into()));
    }
    if cfg.pairs < 4 * batch_size {
        return Err(config_err("task.pairs", format!("{} pairs < 4 x batch size {batch_size}", cfg.pairs)));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(config_err("task.test_fraction", format!("must be in (0, 1), got {}", cfg.test_fraction)));
    }
    for (key, v) in [("task.noise_scale", cfg.noise_scale), ("task.nuisance_scale", cfg.nuisance_scale)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(config_err(key, format!("must be finite and >= 0, got {v}")));
        }
    }
    let n_test = ((cfg.pairs as f64 * cfg.test_fraction).round() as usize).max(2);
    if cfg.pairs - n_test < batch_size {
        return Err(config_err("task.test_fraction", format!("leaves fewer than {batch_size} training pairs")));
    }

    let root = RngState::new(cfg.seed);
    let n = cfg.ambient_dim;
    let mut mix = root.fork(MIXING_TAG);
    let ds = (cfg.latent_dim.max(1)) as f64;
    let du = (cfg.nuisance_dim.max(1)) as f64;
    let ax = draw(&mut mix, n, cfg.latent_dim, 1.0 / ds.sqrt())?;
    let ay = draw(&mut mix, n, cfg.latent_dim, 1.0 / ds.sqrt())?;
    let bx = draw(&mut mix, n, cfg.nuisance_dim, cfg.nuisance_scale / du.sqrt())?;
    let by = draw(&mut mix, n, cfg.nuisance_dim, cfg.nuisance_scale / du.sqrt())?;

    let mut s = root.fork(SAMPLE_TAG);
    let z = draw(&mut s, cfg.pairs, cfg.latent_dim, 1.0)?;
    let ux = draw(&mut s, cfg.pairs, cfg.nuisance_dim, 1.0)?;
    let uy = draw(&mut s, cfg.pairs, cfg.nuisance_dim, 1.0)?;
    let ex = draw(&mut s, cfg.pairs, n, cfg.noise_scale)?;
    let ey = draw(&mut s, cfg.pairs, n, cfg.noise_scale)?;
    // rows are samples, so x_i = A z_i becomes X = Z Aᵀ
    let x = z.matmul_t(&ax)?.add(&ux.matmul_t(&bx)?)?.add(&ex)?;
    let y = z.matmul_t(&ay)?.add(&uy.matmul_t(&by)?)?.add(&ey)?;

    let mut order: Vec<usize> = (0..cfg.pairs).collect();
    root.fork(SPLIT_TAG).shuffle(&mut order);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SyntheticTask { config: cfg.clone(), x, y, latents: z, train, test })
}

// empty factor blocks (latent_dim = 0 or nuisance_dim = 0) are legitimate
fn draw(rng: &mut RngState, m: usize, n: usize, sigma: f64) -> Result<Matrix<f64>> {
    if m == 0 || n == 0 {
        return Ok(Matrix::zeros(m, n));
    }
    gaussian_matrix(rng, m, n, sigma)
}
