use serde::{Deserialize, Serialize};

use crate::enhance::{build_delta_with_draws, enhance, ScheduleState, SubspaceMask};
use crate::error::{Result, SdeError};
use crate::gradcheck::{grad_infonce, hellinger_gradients, subspace_gradients};
use crate::harness::task::SyntheticTask;
use crate::losses::{default_k, infonce, loss_report, spectral_terms_from, LossReport, DEFAULT_TEMPERATURE};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, RngState};
use crate::spectral::{partition, svd};

/// Which loss terms drive the encoder updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Enhancement plus `L_feat + λ·½(L_hellinger + L_subspace)`.
    #[default]
    Sde,
    /// Plain InfoNCE on un-enhanced embeddings.
    InfonceOnly,
    /// Enhancement plus `L_feat + λ·L_hellinger`.
    FeatPlusHellinger,
    /// Enhancement plus `L_feat + λ·L_subspace`.
    FeatPlusSubspace,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Sde => "sde",
            TrainMode::InfonceOnly => "infonce_only",
            TrainMode::FeatPlusHellinger => "feat_plus_hellinger",
            TrainMode::FeatPlusSubspace => "feat_plus_subspace",
        }
    }

    fn enhances(self) -> bool {
        self != TrainMode::InfonceOnly
    }

    /// Weights of the Hellinger and subspace terms relative to `λ`.
    fn spectral_weights(self) -> (f64, f64) {
        match self {
            TrainMode::Sde => (0.5, 0.5),
            TrainMode::InfonceOnly => (0.0, 0.0),
            TrainMode::FeatPlusHellinger => (1.0, 0.0),
            TrainMode::FeatPlusSubspace => (0.0, 1.0),
        }
    }
}

/// How gradients cross the enhancement and the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdGrad {
    /// `U`, `V`, `Δ` and the partition are constants of the step: only the
    /// InfoNCE path and the singular values carry gradient.
    #[default]
    StraightThrough,
    /// Additionally differentiates the subspace loss through `V`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub batch_size: usize,
    pub temperature: f64,
    /// Subspace dimension; `None` picks `min(|S_X|, |S_Y|, 8)` per step.
    pub k: Option<usize>,
    pub learning_rate: f64,
    pub embed_dim: usize,
    pub mode: TrainMode,
    pub svd_grad: SvdGrad,
    pub enhance_mask: SubspaceMask,
    /// Replaces `α(t)` at every step.
    pub alpha_override: Option<f64>,
    /// Replaces `λ(t)` at every step.
    pub lambda_override: Option<f64>,
    /// Share of test targets rotated in the robustness evaluation.
    pub perturb_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 500,
            batch_size: 32,
            temperature: DEFAULT_TEMPERATURE,
            k: None,
            learning_rate: 0.05,
            embed_dim: 32,
            mode: TrainMode::Sde,
            svd_grad: SvdGrad::StraightThrough,
            enhance_mask: SubspaceMask::ALL,
            alpha_override: None,
            lambda_override: None,
            perturb_fraction: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(SdeError::Config { key: format!("train.{key}"), message });
        if self.total_steps == 0 {
            return bad("total_steps", "must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad("batch_size", "must be >= 2".into());
        }
        if self.embed_dim == 0 {
            return bad("embed_dim", "must be >= 1".into());
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad("temperature", format!("must be > 0, got {}", self.temperature));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if self.k == Some(0) {
            return bad("k", "must be >= 1".into());
        }
        for (key, v) in [("alpha_override", self.alpha_override), ("lambda_override", self.lambda_override)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(key, format!("must be finite and >= 0, got {v}"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.perturb_fraction) {
            return bad("perturb_fraction", format!("must be in [0, 1], got {}", self.perturb_fraction));
        }
        Ok(())
    }

    fn schedule(&self, step: usize) -> Result<ScheduleState> {
        let mut s = ScheduleState::at(step, self.total_steps, self.batch_size)?;
        if let Some(a) = self.alpha_override {
            s.alpha = a;
        }
        if let Some(l) = self.lambda_override {
            s.lambda = l;
        }
        Ok(s)
    }
}

/// Two linear encoders, `embed = raw · W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncoderParams {
    /// `n_raw × n_emb`
    pub w_x: Matrix<f64>,
    pub w_y: Matrix<f64>,
    pub embed_dim: usize,
}

impl EncoderParams {
    pub fn init(raw_x: usize, raw_y: usize, embed_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = RngState::new(seed).fork(INIT_TAG);
        let w_x = gaussian_matrix(&mut rng, raw_x, embed_dim, 1.0 / (raw_x as f64).sqrt())?;
        let w_y = gaussian_matrix(&mut rng, raw_y, embed_dim, 1.0 / (raw_y as f64).sqrt())?;
        Ok(Self { w_x, w_y, embed_dim })
    }

    pub fn embed_x(&self, raw: &Matrix<f64>, rows: &[usize]) -> Result<Matrix<f64>> {
        raw.select_rows(rows).matmul(&self.w_x)
    }

    pub fn embed_y(&self, raw: &Matrix<f64>, rows: &[usize]) -> Result<Matrix<f64>> {
        raw.select_rows(rows).matmul(&self.w_y)
    }

    pub fn is_finite(&self) -> bool {
        self.w_x.is_finite() && self.w_y.is_finite()
    }
}

const INIT_TAG: u64 = 0x696e_6974;
const BATCH_TAG: u64 = 0x0062_6174_6368;
const ENHANCE_X_TAG: u64 = 0x656e_6800_0000_0000;
const ENHANCE_Y_TAG: u64 = 0x656e_6801_0000_0000;

/// Everything logged for one optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub schedule: ScheduleState,
    pub report: LossReport,
    /// Value of the mode's objective, the quantity actually descended.
    pub objective: f64,
    /// Training-pair indices of the batch.
    pub batch: Vec<usize>,
    /// Strong-block draws used to enhance each side; empty when the step ran
    /// without enhancement.
    pub eps_x: Vec<f64>,
    pub eps_y: Vec<f64>,
    pub enhanced: bool,
    /// The spectral-gradient contribution was dropped because of a
    /// near-degenerate singular gap.
    pub spectral_skipped: bool,
}

enum Draws<'a> {
    Fresh { x: RngState, y: RngState },
    Recorded { x: &'a [f64], y: &'a [f64] },
}

struct Forward {
    report: LossReport,
    objective: f64,
    eps_x: Vec<f64>,
    eps_y: Vec<f64>,
    enhanced: bool,
    spectral_skipped: bool,
    grad_x: Matrix<f64>,
    grad_y: Matrix<f64>,
}

fn enhance_side(f: &Matrix<f64>, alpha: f64, mask: SubspaceMask, draws: DrawSource<'_>) -> Result<(Matrix<f64>, Vec<f64>)> {
    let dec = svd(f)?;
    let part = partition(&dec, f.rows(), f.cols())?;
    let eps: Vec<f64> = match draws {
        DrawSource::Fresh(mut rng) => {
            if mask.strong {
                part.strong().map(|_| rng.standard_normal()).collect()
            } else {
                Vec::new()
            }
        }
        DrawSource::Recorded(e) => e.to_vec(),
    };
    let delta = build_delta_with_draws(dec.sigma(), &part, alpha, mask, &eps)?;
    Ok((enhance(f, &delta, &dec)?, eps))
}

enum DrawSource<'a> {
    Fresh(RngState),
    Recorded(&'a [f64]),
}

fn forward(
    task: &SyntheticTask,
    cfg: &TrainConfig,
    params: &EncoderParams,
    batch: &[usize],
    schedule: &ScheduleState,
    draws: Draws<'_>,
) -> Result<Forward> {
    let x = params.embed_x(&task.x, batch)?;
    let y = params.embed_y(&task.y, batch)?;
    let enhanced = cfg.mode.enhances() && schedule.alpha > 0.0;
    let (xe, ye, eps_x, eps_y) = if enhanced {
        let (sx, sy) = match draws {
            Draws::Fresh { x, y } => (DrawSource::Fresh(x), DrawSource::Fresh(y)),
            Draws::Recorded { x, y } => (DrawSource::Recorded(x), DrawSource::Recorded(y)),
        };
        let (xe, ex) = enhance_side(&x, schedule.alpha, cfg.enhance_mask, sx)?;
        let (ye, ey) = enhance_side(&y, schedule.alpha, cfg.enhance_mask, sy)?;
        (xe, ye, ex, ey)
    } else {
        (x, y, Vec::new(), Vec::new())
    };

    let tau = cfg.temperature;
    let feat = infonce(&xe, &ye, tau)?;
    let (dec_x, dec_y) = (svd(&xe)?, svd(&ye)?);
    let k = match cfg.k {
        Some(k) => k.min(dec_x.rank()).min(dec_y.rank()).max(1),
        None => default_k(&partition(&dec_x, xe.rows(), xe.cols())?, &partition(&dec_y, ye.rows(), ye.cols())?),
    };
    let terms = spectral_terms_from(dec_x, dec_y, k, None)?;
    let report = loss_report(feat, &terms, schedule.lambda, tau);
    let (wh, ws) = cfg.mode.spectral_weights();
    let objective = feat + schedule.lambda * (wh * report.hellinger + ws * report.subspace);

    let (mut grad_x, mut grad_y) = grad_infonce(&xe, &ye, tau)?;
    let mut spectral_skipped = false;
    if schedule.lambda > 0.0 {
        if wh > 0.0 {
            let (hx, hy) = hellinger_gradients(&terms)?;
            grad_x.axpy(schedule.lambda * wh, &hx)?;
            grad_y.axpy(schedule.lambda * wh, &hy)?;
        }
        if ws > 0.0 && cfg.svd_grad == SvdGrad::Full {
            match subspace_gradients(&terms) {
                Ok((sx, sy)) => {
                    grad_x.axpy(schedule.lambda * ws, &sx)?;
                    grad_y.axpy(schedule.lambda * ws, &sy)?;
                }
                Err(SdeError::SpectralGap { .. }) => spectral_skipped = true,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Forward { report, objective, eps_x, eps_y, enhanced, spectral_skipped, grad_x, grad_y })
}

/// Stateful gradient-descent loop over one task.
pub struct Trainer<'a> {
    task: &'a SyntheticTask,
    cfg: TrainConfig,
    params: EncoderParams,
    step: usize,
    batch_rng: RngState,
    root: RngState,
}

impl<'a> Trainer<'a> {
    pub fn new(task: &'a SyntheticTask, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if task.train.len() < cfg.batch_size {
            return Err(SdeError::Config {
                key: "train.batch_size".into(),
                message: format!("{} exceeds the {} training pairs", cfg.batch_size, task.train.len()),
            });
        }
        let params = EncoderParams::init(task.x.cols(), task.y.cols(), cfg.embed_dim, cfg.seed)?;
        let root = RngState::new(cfg.seed);
        Ok(Self { task, cfg: cfg.clone(), params, step: 0, batch_rng: root.fork(BATCH_TAG), root })
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn finished(&self) -> bool {
        self.step >= self.cfg.total_steps
    }

    /// One descent step; returns its log record.
    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.step;
        if self.finished() {
            return Err(SdeError::Training { step: t, message: "training already finished".into() });
        }
        let schedule = self.cfg.schedule(t)?;
        let picks = self.batch_rng.sample_indices(self.task.train.len(), self.cfg.batch_size);
        let batch: Vec<usize> = picks.iter().map(|&i| self.task.train[i]).collect();
        let draws = Draws::Fresh {
            x: self.root.fork(ENHANCE_X_TAG ^ t as u64),
            y: self.root.fork(ENHANCE_Y_TAG ^ t as u64),
        };
        let fwd = forward(self.task, &self.cfg, &self.params, &batch, &schedule, draws).map_err(|e| at_step(t, e))?;
        if !fwd.objective.is_finite() {
            return Err(SdeError::Training { step: t, message: format!("objective is {}", fwd.objective) });
        }
        let raw_x = self.task.x.select_rows(&batch);
        let raw_y = self.task.y.select_rows(&batch);
        let lr = self.cfg.learning_rate;
        self.params.w_x.axpy(-lr, &raw_x.t_matmul(&fwd.grad_x)?)?;
        self.params.w_y.axpy(-lr, &raw_y.t_matmul(&fwd.grad_y)?)?;
        if !self.params.is_finite() {
            return Err(SdeError::Training { step: t, message: "encoder weights became non-finite".into() });
        }
        self.step += 1;
        Ok(StepRecord {
            schedule,
            report: fwd.report,
            objective: fwd.objective,
            batch,
            eps_x: fwd.eps_x,
            eps_y: fwd.eps_y,
            enhanced: fwd.enhanced,
            spectral_skipped: fwd.spectral_skipped,
        })
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut log = Vec::with_capacity(self.cfg.total_steps);
        while !self.finished() {
            log.push(self.step()?);
        }
        Ok(TrainOutcome { params: self.params, log })
    }
}

// Numeric failures inside a step are reported against that step; input
// errors keep their own kind.
fn at_step(step: usize, e: SdeError) -> SdeError {
    match e {
        SdeError::Convergence { .. } | SdeError::NonFinite(_) | SdeError::Degenerate(_) => {
            SdeError::Training { step, message: e.to_string() }
        }
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub log: Vec<StepRecord>,
}

pub fn train(task: &SyntheticTask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(task, cfg)?.run()
}

/// Recomputes the loss of a logged step from the parameters it started
/// with and the recorded enhancement draws.
pub fn replay_step(
    task: &SyntheticTask,
    cfg: &TrainConfig,
    params_before: &EncoderParams,
    record: &StepRecord,
) -> Result<LossReport> {
    let draws = Draws::Recorded { x: &record.eps_x, y: &record.eps_y };
    Ok(forward(task, cfg, params_before, &record.batch, &record.schedule, draws)?.report)
}

/// One JSON object per step.
pub fn log_jsonl(log: &[StepRecord]) -> String {
    let mut out = String::new();
    for rec in log {
        out.push_str(&serde_json::to_string(rec).expect("step record serializes"));
        out.push('\n');
    }
    out
}
