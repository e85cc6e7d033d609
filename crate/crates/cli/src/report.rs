//! CSV, JSON, SVG and PGM outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uge_core::planners::Method;
use uge_core::world::{Costmap, LETHAL};

use crate::error::{io_err, BenchError, Result};
use crate::experiment::{AggregateStats, TrialRecord};
use crate::scenario::ScenarioSpec;

pub const CSV_HEADER: [&str; 11] = [
    "scenario",
    "environment",
    "goal_x",
    "goal_y",
    "method",
    "trial",
    "seed",
    "success",
    "goal_time",
    "iterations",
    "path_length",
];

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub generated_unix: u64,
    pub stats: Vec<AggregateStats>,
}

/// Everything `bench plot` needs to redraw a run.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunBundle {
    pub scenarios: Vec<ScenarioSpec>,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Default)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub bundle: PathBuf,
    pub svgs: Vec<PathBuf>,
    pub pgms: Vec<PathBuf>,
}

fn path_length(path: &[uge_core::State]) -> f64 {
    path.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
}

pub fn csv_string(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        let goal_time = r.result.goal_time.map(|t| format!("{t:.2}")).unwrap_or_default();
        w.write_record([
            r.scenario.clone(),
            r.environment.to_string(),
            r.goal[0].to_string(),
            r.goal[1].to_string(),
            r.method.name().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.result.success.to_string(),
            goal_time,
            r.result.iterations_used.to_string(),
            format!("{:.4}", path_length(&r.result.path)),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

const METHOD_COLORS: [(Method, &str); 3] =
    [(Method::Mppi, "#d62728"), (Method::UgeMpc, "#1f77b4"), (Method::LogMppi, "#2ca02c")];

fn color(method: Method) -> &'static str {
    METHOD_COLORS.iter().find(|(m, _)| *m == method).map(|(_, c)| *c).unwrap_or("#000000")
}

/// Paths over the lethal cells of `map`; failed trials are dashed.
pub fn render_svg(map: &Costmap, goals: &[[f64; 2]], tolerance: f64, records: &[&TrialRecord]) -> String {
    let b = map.bounds();
    let scale = 40.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="{} {} {} {}">"#,
        b.width() * scale,
        b.height() * scale,
        b.x_min,
        -b.y_max,
        b.width(),
        b.height()
    );
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#, b.x_min, -b.y_max, b.width(), b.height());
    let res = map.resolution();
    let _ = writeln!(s, r#"<g fill="black" stroke="none">"#);
    for iy in 0..map.height() {
        let mut ix = 0;
        while ix < map.width() {
            if map.get(ix, iy) != LETHAL {
                ix += 1;
                continue;
            }
            let run_start = ix;
            while ix < map.width() && map.get(ix, iy) == LETHAL {
                ix += 1;
            }
            let x = map.origin()[0] + run_start as f64 * res;
            let y = map.origin()[1] + (iy + 1) as f64 * res;
            let _ = writeln!(s, r#"<rect x="{x:.3}" y="{:.3}" width="{:.3}" height="{res:.3}"/>"#, -y, (ix - run_start) as f64 * res);
        }
    }
    let _ = writeln!(s, "</g>");
    for g in goals {
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
            g[0],
            -g[1],
            tolerance
        );
    }
    for r in records {
        let mut d = String::new();
        for (i, p) in r.result.path.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3}", if i == 0 { "M" } else { " L" }, p.x, -p.y);
        }
        let dash = if r.result.success { "" } else { r#" stroke-dasharray="0.15 0.1""# };
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="0.04"{dash}><title>{} trial {}</title></path>"#,
            color(r.method),
            r.method,
            r.trial
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes plots and costmaps for every scenario environment in `bundle`.
pub fn emit_plots(bundle: &RunBundle, out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let (mut svgs, mut pgms) = (Vec::new(), Vec::new());
    for spec in &bundle.scenarios {
        for env in spec.environments()? {
            let recs: Vec<&TrialRecord> =
                bundle.records.iter().filter(|r| r.scenario == spec.name && r.environment == env.index).collect();
            if recs.is_empty() {
                continue;
            }
            let stem = format!("{}_env{}", spec.name, env.index);
            let svg = out_dir.join(format!("{stem}.svg"));
            write(&svg, render_svg(&env.map, &spec.goals, spec.goal_tolerance, &recs))?;
            let pgm = out_dir.join(format!("{stem}.pgm"));
            write(&pgm, env.map.to_pgm())?;
            svgs.push(svg);
            pgms.push(pgm);
        }
    }
    Ok((svgs, pgms))
}

/// Writes `results.csv`, `summary.json`, `run.json` and per-environment plots.
pub fn emit_report(
    scenarios: &[ScenarioSpec],
    records: &[TrialRecord],
    stats: &[AggregateStats],
    out_dir: &Path,
) -> Result<ReportFiles> {
    if records.is_empty() {
        return Err(BenchError::Precondition("no trial results to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv = out_dir.join("results.csv");
    write(&csv, csv_string(records)?)?;

    let generated_unix =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let summary = out_dir.join("summary.json");
    write(&summary, serde_json::to_string_pretty(&Summary { generated_unix, stats: stats.to_vec() })?)?;

    let bundle = RunBundle { scenarios: scenarios.to_vec(), records: records.to_vec() };
    let bundle_path = out_dir.join("run.json");
    write(&bundle_path, serde_json::to_string(&bundle)?)?;
    let (svgs, pgms) = emit_plots(&bundle, out_dir)?;
    Ok(ReportFiles { csv, summary, bundle: bundle_path, svgs, pgms })
}

pub fn load_bundle(dir: &Path) -> Result<RunBundle> {
    let path = dir.join("run.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&text)?)
}
