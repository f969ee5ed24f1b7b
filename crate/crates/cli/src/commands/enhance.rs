use std::path::PathBuf;

use clap::Args;

use sde_core::enhance::{build_delta_masked, enhance, ScheduleState, SubspaceMask};
use sde_core::io::read_matrix;
use sde_core::spectral::{partition_with, svd, NoiseEstimator};
use sde_core::{Result, RngState, SdeError};

use super::{parse_mask, serde_value, to_json, Context, Outcome};
use crate::config::{EnhanceConfig, RunConfig};
use crate::svg::{render, Line, Panel};

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Matrix file, CSV or binary.
    pub input: PathBuf,
    /// Fixed enhancement strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Schedule step `t`; needs `--total-steps`.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_parser = serde_value::<NoiseEstimator>)]
    pub estimator: Option<NoiseEstimator>,
    /// `all` or e.g. `strong+weak`.
    #[arg(long, value_parser = parse_mask)]
    pub mask: Option<SubspaceMask>,
}

impl EnhanceArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let e = &mut cfg.enhance;
        if self.alpha.is_some() {
            e.alpha = self.alpha;
        }
        if self.step.is_some() {
            e.step = self.step;
        }
        if self.total_steps.is_some() {
            e.total_steps = self.total_steps;
        }
        if let Some(b) = self.batch_size {
            e.batch_size = b;
        }
        if let Some(v) = self.estimator {
            e.estimator = v;
        }
        if let Some(m) = self.mask {
            e.mask = m;
        }
    }
}

/// `α` from the explicit value or from the schedule at `(t, T, batch)`.
pub fn resolve_alpha(e: &EnhanceConfig) -> Result<(f64, Option<ScheduleState>)> {
    let bad = |key: &str, message: &str| Err(SdeError::Config { key: format!("enhance.{key}"), message: message.into() });
    match (e.alpha, e.step, e.total_steps) {
        (Some(a), None, None) => Ok((a, None)),
        (Some(_), _, _) => bad("alpha", "give either alpha or a schedule step, not both"),
        (None, Some(t), Some(total)) => {
            let s = ScheduleState::at(t, total, e.batch_size)?;
            Ok((s.alpha, Some(s)))
        }
        (None, None, Some(_)) => bad("step", "a schedule needs step as well as total_steps"),
        (None, Some(_), None) => bad("total_steps", "a schedule needs total_steps as well as step"),
        (None, None, None) => bad("alpha", "give alpha or step and total_steps"),
    }
}

pub fn run(ctx: &mut Context, args: &EnhanceArgs) -> Result<Outcome> {
    let e = ctx.config.enhance.clone();
    let (alpha, _) = resolve_alpha(&e)?;
    let f = read_matrix(&args.input)?;
    let (m, n) = f.shape();
    let dec = svd(&f)?;
    let part = partition_with(&dec, m, n, e.estimator)?;
    let mut rng = RngState::new(ctx.seed());
    let delta = build_delta_masked(&dec, &part, alpha, e.mask, &mut rng)?;
    let enhanced = enhance(&f, &delta, &dec)?;
    ctx.write_matrix("enhanced", &enhanced)?;
    ctx.write_text("delta.json", &to_json(&delta))?;
    let index = |v: &[f64]| v.iter().enumerate().map(|(i, &s)| ((i + 1) as f64, s)).collect::<Vec<_>>();
    let svg = render(&[Panel::Lines {
        title: format!("Spectrum before and after enhancement (alpha = {alpha})"),
        x_label: "index".into(),
        y_label: "sigma".into(),
        lines: vec![
            Line { name: "before".into(), points: index(dec.sigma()) },
            Line { name: "after".into(), points: index(&delta.apply(dec.sigma())) },
        ],
        markers: vec![],
    }]);
    ctx.write_text("enhance.svg", &svg)?;
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_sources() {
        let base = EnhanceConfig::default();
        let fixed = EnhanceConfig { alpha: Some(0.3), ..base.clone() };
        assert_eq!(resolve_alpha(&fixed).unwrap().0, 0.3);
        let sched = EnhanceConfig { step: Some(0), total_steps: Some(100), ..base.clone() };
        let (a, s) = resolve_alpha(&sched).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(s.unwrap().step, 0);
        let key = |c: &EnhanceConfig| match resolve_alpha(c) {
            Err(SdeError::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key(&base), "enhance.alpha");
        assert_eq!(key(&EnhanceConfig { step: Some(3), ..base.clone() }), "enhance.total_steps");
        assert_eq!(key(&EnhanceConfig { alpha: Some(0.1), step: Some(3), ..base }), "enhance.alpha");
    }
}
