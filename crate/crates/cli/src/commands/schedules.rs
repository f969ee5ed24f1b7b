use clap::Args;

use sde_core::enhance::{schedules_csv, ScheduleState};
use sde_core::Result;

use super::{Context, Outcome};
use crate::config::RunConfig;
use crate::svg::{render, Line, Panel};

#[derive(Debug, Args)]
pub struct SchedulesArgs {
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl SchedulesArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = self.total_steps {
            cfg.schedules.total_steps = t;
        }
        if let Some(b) = self.batch_size {
            cfg.schedules.batch_size = b;
        }
    }
}

pub fn run(ctx: &mut Context, _args: &SchedulesArgs) -> Result<Outcome> {
    let (total, batch) = (ctx.config.schedules.total_steps, ctx.config.schedules.batch_size);
    let csv = schedules_csv(total, batch)?;
    let states = (0..=total).map(|t| ScheduleState::at(t, total, batch)).collect::<Result<Vec<_>>>()?;
    let curve = |name: &str, pick: fn(&ScheduleState) -> f64| Line {
        name: name.into(),
        points: states.iter().map(|s| (s.step as f64, pick(s))).collect(),
    };
    let svg = render(&[
        Panel::Lines {
            title: format!("Enhancement strength (batch {batch})"),
            x_label: "step".into(),
            y_label: "alpha".into(),
            lines: vec![curve("alpha", |s| s.alpha)],
            markers: vec![],
        },
        Panel::Lines {
            title: "Spectral loss weight".into(),
            x_label: "step".into(),
            y_label: "lambda".into(),
            lines: vec![curve("lambda", |s| s.lambda)],
            markers: vec![],
        },
    ]);
    ctx.write_text("schedules.csv", &csv)?;
    ctx.write_text("schedules.svg", &svg)?;
    Ok(Outcome::Success)
}
