use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symphony_sim::config::ScenarioConfig;
use symphony_sim::experiment::{self, ExperimentError, SweepParam};

mod plot;

/// Ring-collective simulator with switch-side step-misalignment throttling.
///
/// Exit status: 0 on success, 1 for configuration errors, 2 for runtime
/// errors. SYMPHONY_WORKERS sets the number of parallel runs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of a scenario and write its CSVs.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare two run directories seed by seed (first one is the baseline).
    Compare {
        baseline: PathBuf,
        treatment: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// One of k, chunk_bytes, imbalance_ratio, t_win, n_warmup.
        #[arg(long)]
        param: String,
        /// Comma-separated values; chunk sizes accept K/M suffixes, t_win is in microseconds.
        #[arg(long)]
        values: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render SVG charts from a run directory.
    Plot {
        dir: PathBuf,
        /// Defaults to `<dir>/plots`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let manifest = experiment::run_scenario(&cfg, &out)?;
            println!(
                "{} runs of {} written to {}",
                manifest.runs.len(),
                manifest.name,
                out.display()
            );
        }
        Cmd::Compare {
            baseline,
            treatment,
            json,
        } => {
            let report = experiment::compare(&baseline, &treatment)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", report.render_text());
            }
        }
        Cmd::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let param: SweepParam = param.parse()?;
            let values = experiment::parse_values(param, &values)?;
            let rows = experiment::sweep(&cfg, param, &values, &out)?;
            println!("{:>14} {:>16}", param.name(), "median cct (ms)");
            for (v, m) in experiment::sweep_medians(&rows) {
                let m = m.map_or("-".to_string(), |x| format!("{:.3}", x / 1e6));
                println!("{v:>14} {m:>16}");
            }
        }
        Cmd::Plot { dir, out } => {
            let out = out.unwrap_or_else(|| dir.join("plots"));
            for p in plot::plot_dir(&dir, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
