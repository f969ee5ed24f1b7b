use clap::Args;

use sde_core::gradcheck::run_suite_with;
use sde_core::Result;

use super::{to_json, Context, Outcome};
use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub instances: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    pub step_size: Option<f64>,
}

impl GradcheckArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(i) = self.instances {
            cfg.gradcheck.instances = i;
        }
        if let Some(h) = self.step_size {
            cfg.gradcheck.step_size = h;
        }
    }
}

pub fn run(ctx: &mut Context, _args: &GradcheckArgs) -> Result<Outcome> {
    let g = &ctx.config.gradcheck;
    let report = run_suite_with(ctx.seed(), g.instances, g.step_size)?;
    ctx.write_text("gradcheck.json", &to_json(&report))?;
    if report.pass {
        Ok(Outcome::Success)
    } else {
        let worst = [report.infonce, report.hellinger, report.subspace, report.spectral]
            .iter()
            .map(|r| r.max_rel_error)
            .fold(0.0, f64::max);
        Ok(Outcome::CheckFailed(format!(
            "max relative error {worst:e} exceeds {:e}",
            report.tolerance
        )))
    }
}
