use std::path::PathBuf;

use clap::Args;

use sde_core::io::read_matrix;
use sde_core::spectral::{partition_with, spectral_report, svd, NoiseEstimator, SpectralReport};
use sde_core::Result;

use super::{serde_value, Context, Outcome};
use crate::config::RunConfig;
use crate::svg::{render, Line, Marker, Panel};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Matrix file, CSV or binary.
    pub input: PathBuf,
    /// `mp_median` or `support_center`.
    #[arg(long, value_parser = serde_value::<NoiseEstimator>)]
    pub estimator: Option<NoiseEstimator>,
}

impl AnalyzeArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.estimator {
            cfg.analyze.estimator = e;
        }
    }
}

pub fn run(ctx: &mut Context, args: &AnalyzeArgs) -> Result<Outcome> {
    let f = read_matrix(&args.input)?;
    let (m, n) = f.shape();
    let dec = svd(&f)?;
    let part = partition_with(&dec, m, n, ctx.config.analyze.estimator)?;
    let report = spectral_report(dec.sigma(), &part);
    ctx.write_text("spectrum.csv", &report.spectrum_csv())?;
    ctx.write_text("partition.json", &(report.to_json() + "\n"))?;
    ctx.write_text("cumulative_energy.csv", &report.cumulative_energy_csv())?;
    ctx.write_text("analysis.svg", &analysis_svg(&report))?;
    Ok(Outcome::Success)
}

fn analysis_svg(r: &SpectralReport) -> String {
    let names = ["S", "W", "N"];
    let mut bars: Vec<(String, f64)> = names.iter().zip(r.proportions).map(|(n, p)| (format!("{n} count"), p)).collect();
    bars.extend(names.iter().zip(r.energy_fractions).map(|(n, e)| (format!("{n} energy"), e)));
    let index = |v: &[f64]| v.iter().enumerate().map(|(i, &s)| ((i + 1) as f64, s)).collect::<Vec<_>>();
    let markers = [("MP edge", r.noise_edge), ("IQR fence", r.strong_threshold)]
        .into_iter()
        .filter(|(_, y)| y.is_finite())
        .map(|(name, y)| Marker { name: name.into(), y })
        .collect();
    render(&[
        Panel::Bars { title: "Component proportions (S strong, W weak, N noise)".into(), y_label: "fraction".into(), bars },
        Panel::Lines {
            title: "Singular values".into(),
            x_label: "index".into(),
            y_label: "sigma".into(),
            lines: vec![Line { name: "sigma".into(), points: index(&r.sigma) }],
            markers,
        },
        Panel::Lines {
            title: "Cumulative energy".into(),
            x_label: "index".into(),
            y_label: "fraction".into(),
            lines: vec![Line { name: "cumulative".into(), points: index(&r.cumulative_energy) }],
            markers: vec![],
        },
    ])
}
