use clap::Args;

use sde_core::enhance::SubspaceMask;
use sde_core::harness::{csv_row, log_jsonl, run_experiment, SvdGrad, TrainMode, ABLATION_CSV_HEADER};
use sde_core::Result;

use super::{parse_mask, serde_value, to_json, Context, Outcome};
use crate::config::RunConfig;

/// Flags for the `task` config section.
#[derive(Debug, Args)]
pub struct TaskFlags {
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub nuisance_dim: Option<usize>,
    #[arg(long)]
    pub ambient_dim: Option<usize>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub nuisance_scale: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

/// Flags for the `train` config section.
#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// `sde`, `infonce_only`, `feat_plus_hellinger` or `feat_plus_subspace`.
    #[arg(long, value_parser = serde_value::<TrainMode>)]
    pub mode: Option<TrainMode>,
    /// `straight_through` or `full`.
    #[arg(long, value_parser = serde_value::<SvdGrad>)]
    pub svd_grad: Option<SvdGrad>,
    #[arg(long, value_parser = parse_mask)]
    pub enhance_mask: Option<SubspaceMask>,
    #[arg(long)]
    pub alpha_override: Option<f64>,
    #[arg(long)]
    pub lambda_override: Option<f64>,
    #[arg(long)]
    pub perturb_fraction: Option<f64>,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl TaskFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.task;
        set!(t.latent_dim, self.latent_dim);
        set!(t.nuisance_dim, self.nuisance_dim);
        set!(t.ambient_dim, self.ambient_dim);
        set!(t.pairs, self.pairs);
        set!(t.noise_scale, self.noise_scale);
        set!(t.nuisance_scale, self.nuisance_scale);
        set!(t.test_fraction, self.test_fraction);
    }
}

impl TrainFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set!(t.total_steps, self.total_steps);
        set!(t.batch_size, self.batch_size);
        set!(t.temperature, self.temperature);
        if self.k.is_some() {
            t.k = self.k;
        }
        set!(t.learning_rate, self.learning_rate);
        set!(t.embed_dim, self.embed_dim);
        set!(t.mode, self.mode);
        set!(t.svd_grad, self.svd_grad);
        set!(t.enhance_mask, self.enhance_mask);
        if self.alpha_override.is_some() {
            t.alpha_override = self.alpha_override;
        }
        if self.lambda_override.is_some() {
            t.lambda_override = self.lambda_override;
        }
        set!(t.perturb_fraction, self.perturb_fraction);
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub task: TaskFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.task.apply(cfg);
        self.train.apply(cfg);
        // the run seed drives task generation and training together
        if let Some(s) = cfg.seed {
            cfg.train.seed = s;
        }
        cfg.task.seed = cfg.train.seed;
    }
}

pub fn run(ctx: &mut Context, _args: &TrainArgs) -> Result<Outcome> {
    let cfg = ctx.config.train.clone();
    cfg.validate()?;
    let (_, out, m) = run_experiment(&ctx.config.task, &cfg)?;
    ctx.write_text("train_log.jsonl", &log_jsonl(&out.log))?;
    let table = format!(
        "{ABLATION_CSV_HEADER}\n{}",
        csv_row(cfg.mode.name(), cfg.seed, m.clean_p1, m.perturbed_p1, m.final_feat, m.final_spec)
    );
    ctx.write_text("results.csv", &table)?;
    ctx.write_text("metrics.json", &to_json(&m))?;
    ctx.write_matrix("w_x", &out.params.w_x)?;
    ctx.write_matrix("w_y", &out.params.w_y)?;
    Ok(Outcome::Success)
}
