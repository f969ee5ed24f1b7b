//! Curriculum schedules for the perturbation strength `α(t)` and the
//! spectral-loss weight `λ(t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdeError};

/// Batch size at which the batch scaling factor equals `log 2 / log 8 = 1/3`.
pub const REFERENCE_BATCH: f64 = 256.0;

/// `β = ln(batch/256 + 1) / ln 8`.
pub fn batch_scaling(batch_size: usize) -> f64 {
    (batch_size as f64 / REFERENCE_BATCH + 1.0).ln() / 8f64.ln()
}

/// Three-branch cosine curriculum over `p = t/T`.
///
/// Branch membership is decided on the integers (`100t < 15T`, `2t < T`),
/// so boundary steps never depend on rounding of `t/T`.
pub fn alpha_schedule(t: usize, total_steps: usize, batch_size: usize) -> Result<f64> {
    if total_steps == 0 {
        return Err(SdeError::range("total steps must be >= 1"));
    }
    if batch_size == 0 {
        return Err(SdeError::range("batch size must be >= 1"));
    }
    if t > total_steps {
        return Err(SdeError::range(format!("step {t} exceeds total steps {total_steps}")));
    }
    let beta = batch_scaling(batch_size);
    let x = t as f64 / total_steps as f64;
    let value = if 100 * t < 15 * total_steps {
        (0.8 - 0.15 * beta) * (1.0 - (6.0 * PI * x).cos())
    } else if 2 * t < total_steps {
        (0.4 - 0.08 * beta) * (1.0 + (3.0 * PI * (x - 0.15)).cos())
    } else {
        (0.1 - 0.02 * beta) * (1.0 - (2.0 * PI * (x - 0.5)).cos())
    };
    Ok(value)
}

/// Piecewise cosine weight over progress `p ∈ [0, 1]`; continuous, rising
/// from 0.05 to a 0.08 plateau on `[0.3, 0.7)` and falling to 0.03 at `p = 1`.
pub fn lambda_schedule(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SdeError::range(format!("progress must be in [0, 1], got {p}")));
    }
    Ok(if p < 0.3 {
        0.05 + 0.015 * (1.0 - (PI * p / 0.3).cos())
    } else if p < 0.7 {
        0.08
    } else {
        0.08 - 0.025 * (1.0 - (PI * (p - 0.7) / 0.3).cos())
    })
}

/// Schedule values at one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub step: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    pub progress: f64,
    pub beta: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl ScheduleState {
    pub fn at(step: usize, total_steps: usize, batch_size: usize) -> Result<Self> {
        let alpha = alpha_schedule(step, total_steps, batch_size)?;
        let progress = step as f64 / total_steps as f64;
        Ok(Self {
            step,
            total_steps,
            batch_size,
            progress,
            beta: batch_scaling(batch_size),
            alpha,
            lambda: lambda_schedule(progress)?,
        })
    }
}

/// `t,alpha,lambda` rows for `t = 0..=T`.
pub fn schedules_csv(total_steps: usize, batch_size: usize) -> Result<String> {
    let mut out = String::from("t,alpha,lambda\n");
    for t in 0..=total_steps {
        let s = ScheduleState::at(t, total_steps, batch_size)?;
        out.push_str(&format!("{t},{:?},{:?}\n", s.alpha, s.lambda));
    }
    Ok(out)
}
