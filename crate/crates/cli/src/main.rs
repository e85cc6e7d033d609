use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use uge_bench::app::{apply_overrides, parse_methods, run_all};
use uge_bench::report::{emit_plots, load_bundle};
use uge_bench::scenario::{parse_config, preset, presets};

#[derive(Parser)]
#[command(name = "bench", version, about = "Benchmark harness for MPPI and UGE-MPC planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a config file (or a named preset) and write a report.
    Run {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Use a built-in preset instead of a config file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value = "mppi,uge_mpc,log_mppi")]
        methods: String,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Redraw SVG plots and PGM costmaps from a previous run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// List the built-in scenario presets.
    Presets {
        /// Print every preset as a JSON config array.
        #[arg(long)]
        dump: bool,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, preset: preset_name, methods, out, trials, seed, threads } => {
            let mut specs = match (config, preset_name) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    parse_config(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                (None, Some(name)) => match preset(&name) {
                    Some(s) => vec![s],
                    None => bail!("unknown preset '{name}'"),
                },
                (None, None) => unreachable!("clap requires --config or --preset"),
            };
            apply_overrides(&mut specs, trials, seed);
            let methods = parse_methods(&methods)?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                if t == 0 {
                    bail!("--threads must be at least 1");
                }
                pool = pool.num_threads(t);
            }
            let pool = pool.build()?;
            let output = pool.install(|| run_all(&specs, &methods, &out))?;
            for s in &output.stats {
                let time = s.overall.mean_goal_time.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "--".into());
                println!(
                    "{:<14} {:<9} success {:>3}/{:<3} ({:.2})  mean goal time {}",
                    s.scenario, s.method, s.overall.successes, s.overall.trials, s.overall.success_rate, time
                );
            }
            println!("wrote {}", output.files.csv.display());
            println!("wrote {}", output.files.summary.display());
            for p in output.files.svgs.iter().chain(&output.files.pgms) {
                println!("wrote {}", p.display());
            }
        }
        Command::Plot { input } => {
            let bundle = load_bundle(&input)?;
            let (svgs, pgms) = emit_plots(&bundle, &input)?;
            for p in svgs.iter().chain(&pgms) {
                println!("wrote {}", p.display());
            }
        }
        Command::Presets { dump } => {
            let all = presets();
            if dump {
                println!("{}", serde_json::to_string_pretty(&all)?);
            } else {
                for s in &all {
                    println!(
                        "{:<14} {:?}, {} goal(s), {} environment(s), {} trials",
                        s.name,
                        s.kind,
                        s.goals.len(),
                        s.environment_count(),
                        s.trials
                    );
                }
            }
        }
    }
    Ok(())
}
