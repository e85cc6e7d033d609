//! Glue between parsed command-line options and the experiment drivers.

use std::path::Path;

use uge_core::planners::Method;

use crate::error::Result;
use crate::experiment::{run_experiment, AggregateStats, TrialRecord};
use crate::report::{emit_report, ReportFiles};
use crate::scenario::ScenarioSpec;

pub struct RunOutput {
    pub files: ReportFiles,
    pub stats: Vec<AggregateStats>,
}

/// Parses a comma-separated method list such as `mppi,uge_mpc`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(crate::BenchError::Config("empty method list".into()));
    }
    Ok(out)
}

/// Applies `--trials` and `--seed` overrides to every scenario.
pub fn apply_overrides(specs: &mut [ScenarioSpec], trials: Option<usize>, seed: Option<u64>) {
    for s in specs {
        if let Some(t) = trials {
            s.trials = t;
        }
        if let Some(seed) = seed {
            s.seed = seed;
        }
    }
}

pub fn run_all(specs: &[ScenarioSpec], methods: &[Method], out_dir: &Path) -> Result<RunOutput> {
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut stats = Vec::new();
    for spec in specs {
        spec.validate()?;
        for &m in methods {
            let r = run_experiment(spec, m)?;
            records.extend(r.records);
            stats.push(r.stats);
        }
    }
    let files = emit_report(specs, &records, &stats, out_dir)?;
    Ok(RunOutput { files, stats })
}
