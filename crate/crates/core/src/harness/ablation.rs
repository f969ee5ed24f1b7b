use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::enhance::SubspaceMask;
use crate::error::{Result, SdeError};
use crate::harness::eval::{evaluate, perturbed_eval};
use crate::harness::task::{generate_task, SyntheticTask, TaskConfig};
use crate::harness::train::{train, TrainConfig, TrainMode, TrainOutcome};
use crate::rng::RngState;

/// One row of the ablation grid: a loss mode, or the full loss with
/// enhancement restricted to one subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Sde,
    InfonceOnly,
    FeatPlusHellinger,
    FeatPlusSubspace,
    StrongOnly,
    WeakOnly,
    NoiseOnly,
}

impl AblationMode {
    pub const ALL: [AblationMode; 7] = [
        AblationMode::Sde,
        AblationMode::InfonceOnly,
        AblationMode::FeatPlusHellinger,
        AblationMode::FeatPlusSubspace,
        AblationMode::StrongOnly,
        AblationMode::WeakOnly,
        AblationMode::NoiseOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Sde => "sde",
            AblationMode::InfonceOnly => "infonce_only",
            AblationMode::FeatPlusHellinger => "feat_plus_hellinger",
            AblationMode::FeatPlusSubspace => "feat_plus_subspace",
            AblationMode::StrongOnly => "strong_only",
            AblationMode::WeakOnly => "weak_only",
            AblationMode::NoiseOnly => "noise_only",
        }
    }

    /// The training configuration this row runs with.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let (mode, mask) = match self {
            AblationMode::Sde => (TrainMode::Sde, SubspaceMask::ALL),
            AblationMode::InfonceOnly => (TrainMode::InfonceOnly, SubspaceMask::ALL),
            AblationMode::FeatPlusHellinger => (TrainMode::FeatPlusHellinger, SubspaceMask::ALL),
            AblationMode::FeatPlusSubspace => (TrainMode::FeatPlusSubspace, SubspaceMask::ALL),
            AblationMode::StrongOnly => (TrainMode::Sde, SubspaceMask::STRONG_ONLY),
            AblationMode::WeakOnly => (TrainMode::Sde, SubspaceMask::WEAK_ONLY),
            AblationMode::NoiseOnly => (TrainMode::Sde, SubspaceMask::NOISE_ONLY),
        };
        TrainConfig { mode, enhance_mask: mask, ..base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub seed: u64,
    pub clean_p1: f64,
    pub perturbed_p1: f64,
    pub final_feat: f64,
    pub final_spec: f64,
    pub initial_feat: f64,
}

impl AblationRow {
    /// `(clean − perturbed) / clean`, zero when the clean score is zero.
    pub fn relative_drop(&self) -> f64 {
        if self.clean_p1 > 0.0 {
            (self.clean_p1 - self.perturbed_p1) / self.clean_p1
        } else {
            0.0
        }
    }
}

pub const ABLATION_CSV_HEADER: &str = "mode,seed,clean_p1,perturbed_p1,final_feat,final_spec";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = format!("{ABLATION_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&csv_row(r.mode.name(), r.seed, r.clean_p1, r.perturbed_p1, r.final_feat, r.final_spec));
    }
    out
}

/// One line of the results table.
pub fn csv_row(mode: &str, seed: u64, clean: f64, perturbed: f64, feat: f64, spec: f64) -> String {
    format!("{mode},{seed},{clean:?},{perturbed:?},{feat:?},{spec:?}\n")
}

const PERTURB_TAG: u64 = 0x7065_7274;

/// Scores of one trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub clean_p1: f64,
    pub perturbed_p1: f64,
    pub final_feat: f64,
    pub final_spec: f64,
    pub initial_feat: f64,
}

/// Generates the task for `cfg.seed`, trains, and evaluates clean and
/// perturbed Precision@1 on the test split. The task, the encoder
/// initialization, the batches and the perturbation all derive from the
/// seed, so runs that share it are paired.
pub fn run_experiment(task_cfg: &TaskConfig, cfg: &TrainConfig) -> Result<(SyntheticTask, TrainOutcome, RunMetrics)> {
    let task = generate_task(&TaskConfig { seed: cfg.seed, ..task_cfg.clone() }, cfg.batch_size)?;
    let out = train(&task, cfg)?;
    let clean_p1 = evaluate(&out.params, &task)?;
    let mut rng = RngState::new(cfg.seed).fork(PERTURB_TAG);
    let perturbed_p1 = perturbed_eval(&out.params, &task, cfg.perturb_fraction, &mut rng)?;
    let first = out.log.first().expect("at least one step");
    let last = out.log.last().expect("at least one step");
    let metrics = RunMetrics {
        clean_p1,
        perturbed_p1,
        final_feat: last.report.feat,
        final_spec: last.report.spec,
        initial_feat: first.report.feat,
    };
    Ok((task, out, metrics))
}

pub fn run_cell(task_cfg: &TaskConfig, base: &TrainConfig, mode: AblationMode, seed: u64) -> Result<AblationRow> {
    let cfg = TrainConfig { seed, ..mode.apply(base) };
    let (_, _, m) = run_experiment(task_cfg, &cfg)?;
    Ok(AblationRow {
        mode,
        seed,
        clean_p1: m.clean_p1,
        perturbed_p1: m.perturbed_p1,
        final_feat: m.final_feat,
        final_spec: m.final_spec,
        initial_feat: m.initial_feat,
    })
}

/// Every `(mode, seed)` cell, in mode-major grid order. Cells run on up to
/// `workers` threads; the output order does not depend on scheduling.
pub fn ablation_suite(
    task_cfg: &TaskConfig,
    base: &TrainConfig,
    modes: &[AblationMode],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<AblationRow>> {
    if modes.is_empty() || seeds.is_empty() {
        return Err(SdeError::Config { key: "ablate".into(), message: "grid needs at least one mode and one seed".into() });
    }
    base.validate()?;
    let cells: Vec<(AblationMode, u64)> = modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let slots: Vec<Mutex<Option<Result<AblationRow>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let workers = workers.clamp(1, cells.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(mode, seed)) = cells.get(idx) else { break };
                let row = run_cell(task_cfg, base, mode, seed);
                *slots[idx].lock().expect("slot lock") = Some(row);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every cell ran")).collect()
}
