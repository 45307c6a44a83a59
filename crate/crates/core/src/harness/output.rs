//! CSV, SVG and metadata artifacts. Output depends only on the config, so a
//! repeated invocation reproduces every byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, REFERENCE_RUNS};
use super::experiment::{ExperimentResult, RegretCurve, Scenario};
use super::format_sig;
use crate::error::{invalid, Error, Result};
use crate::policy::PolicyKind;
use crate::trading::scenario_timeline_render;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `<dir>/<policy>.csv` with columns `round,inst_mean,inst_se,cum_mean`.
pub fn write_curves_csv(curves: &[RegretCurve], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(curves.len());
    for c in curves {
        let path = dir.join(format!("{}.csv", c.policy));
        let mut out = create(&path)?;
        writeln!(out, "round,inst_mean,inst_se,cum_mean")?;
        for i in 0..c.horizon() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                format_sig(c.inst_mean[i]),
                format_sig(c.inst_se[i]),
                format_sig(c.cum_mean[i])
            )?;
        }
        out.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

fn color(kind: PolicyKind) -> RGBColor {
    match kind {
        PolicyKind::Sbetc => RGBColor(31, 119, 180),
        PolicyKind::Ucb => RGBColor(214, 39, 40),
        PolicyKind::Oracle => RGBColor(44, 160, 44),
    }
}

fn label(kind: PolicyKind) -> &'static str {
    match kind {
        PolicyKind::Sbetc => "SB-ETC",
        PolicyKind::Ucb => "UCB",
        PolicyKind::Oracle => "Oracle",
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn line_chart(path: &Path, title: &str, y_desc: &str, curves: &[RegretCurve], series: impl Fn(&RegretCurve) -> &[f64]) -> Result<()> {
    let n = curves.iter().map(RegretCurve::horizon).max().unwrap_or(0).max(2);
    let y_max = curves
        .iter()
        .flat_map(|c| series(c).iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };

    let root = SVGBackend::new(path, (960, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(1.0..n as f64, 0.0..y_max)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("round").y_desc(y_desc).draw().map_err(plot_err)?;
    for c in curves {
        let col = color(c.policy);
        let points = series(c).iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v));
        chart
            .draw_series(LineSeries::new(points, col.stroke_width(2)))
            .map_err(plot_err)?
            .label(label(c.policy))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], col.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.9))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// `instantaneous_regret.svg` and `cumulative_regret.svg`, one series per
/// policy.
pub fn render_plots(curves: &[RegretCurve], dir: &Path) -> Result<[PathBuf; 2]> {
    if curves.is_empty() {
        return Err(invalid("no curves to plot"));
    }
    fs::create_dir_all(dir)?;
    let inst = dir.join("instantaneous_regret.svg");
    let cum = dir.join("cumulative_regret.svg");
    line_chart(&inst, "Instantaneous regret", "mean instantaneous regret", curves, |c| &c.inst_mean)?;
    line_chart(&cum, "Cumulative regret", "mean cumulative regret", curves, |c| &c.cum_mean)?;
    Ok([inst, cum])
}

/// `metadata.json`: resolved configuration, replication count against the
/// 1000-run reference, final regret and per-run noise checksums.
pub fn write_metadata(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let finals: serde_json::Map<String, serde_json::Value> = result
        .curves
        .iter()
        .map(|c| (c.policy.to_string(), json!(c.cum_mean.last().copied().unwrap_or(0.0))))
        .collect();
    let meta = json!({
        "config": cfg,
        "horizon": cfg.horizon(),
        "runs": cfg.runs,
        "reference_runs": REFERENCE_RUNS,
        "fewer_runs_than_reference": cfg.runs < REFERENCE_RUNS,
        "final_mean_cumulative_regret": finals,
        "pairing_verified": true,
        "noise_checksums": result.checksums.iter().map(|c| format!("{c:016x}")).collect::<Vec<_>>(),
    });
    let path = dir.join("metadata.json");
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &meta)?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

/// Everything for one experiment: curves, plots, metadata and, if the
/// config asks for them, run 0's decision logs and trading timelines.
pub fn write_artifacts(cfg: &ExperimentConfig, scenario: &Scenario, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    let mut paths = write_curves_csv(&result.curves, dir)?;
    paths.extend(render_plots(&result.curves, dir)?);
    paths.push(write_metadata(cfg, result, dir)?);
    for log in &result.decision_logs {
        let path = dir.join(format!("{}_run0_decisions.csv", log.policy));
        let mut out = create(&path)?;
        log.write_csv(&mut out)?;
        out.flush()?;
        paths.push(path);
        if let Some((assets, dt)) = scenario.trading {
            let arms: Vec<usize> = log.records.iter().map(|r| r.chosen).collect();
            let path = dir.join(format!("{}_run0_timeline.csv", log.policy));
            fs::write(&path, scenario_timeline_render(&arms, assets, dt))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
