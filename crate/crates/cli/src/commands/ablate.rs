use clap::Args;
use serde::Serialize;

use sde_core::harness::{ablation_csv, ablation_suite, AblationMode, AblationRow};
use sde_core::{Result, SdeError};

use super::train::{TaskFlags, TrainFlags};
use super::{serde_value, to_json, Context, Outcome};
use crate::config::RunConfig;

pub const WORKERS_ENV: &str = "SDE_WORKERS";

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub task: TaskFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Comma-separated grid rows.
    #[arg(long, value_delimiter = ',', value_parser = serde_value::<AblationMode>)]
    pub modes: Option<Vec<AblationMode>>,
    /// Comma-separated grid seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

impl AblateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.task.apply(cfg);
        self.train.apply(cfg);
        if let Some(m) = &self.modes {
            cfg.ablate.modes = m.clone();
        }
        if let Some(s) = &self.seeds {
            cfg.ablate.seeds = s.clone();
        }
    }
}

/// Per-mode means over seeds.
#[derive(Debug, Serialize)]
pub struct ModeSummary {
    pub mode: AblationMode,
    pub seeds: usize,
    pub mean_clean_p1: f64,
    pub mean_perturbed_p1: f64,
    pub mean_relative_drop: f64,
    pub relative_drop_std_error: f64,
}

pub fn summarize(rows: &[AblationRow], modes: &[AblationMode]) -> Vec<ModeSummary> {
    modes
        .iter()
        .map(|&mode| {
            let sel: Vec<&AblationRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let n = sel.len() as f64;
            let mean = |f: &dyn Fn(&AblationRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
            let drop = mean(&|r| r.relative_drop());
            let se = if sel.len() > 1 {
                let var = sel.iter().map(|r| (r.relative_drop() - drop).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            ModeSummary {
                mode,
                seeds: sel.len(),
                mean_clean_p1: mean(&|r| r.clean_p1),
                mean_perturbed_p1: mean(&|r| r.perturbed_p1),
                mean_relative_drop: drop,
                relative_drop_std_error: se,
            }
        })
        .collect()
}

pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(SdeError::Config { key: WORKERS_ENV.into(), message: format!("expected a positive integer, got `{v}`") }),
        },
    }
}

#[derive(Serialize)]
struct AblationDoc<'a> {
    rows: &'a [AblationRow],
    summary: Vec<ModeSummary>,
}

pub fn run(ctx: &mut Context, _args: &AblateArgs) -> Result<Outcome> {
    let workers = workers_from_env()?;
    let grid = ctx.config.ablate.clone();
    let rows = ablation_suite(&ctx.config.task, &ctx.config.train, &grid.modes, &grid.seeds, workers)?;
    ctx.write_text("ablation.csv", &ablation_csv(&rows))?;
    let doc = AblationDoc { rows: &rows, summary: summarize(&rows, &grid.modes) };
    ctx.write_text("ablation.json", &to_json(&doc))?;
    Ok(Outcome::Success)
}
