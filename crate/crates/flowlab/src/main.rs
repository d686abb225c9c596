use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use flowlab_core::config::parse_config;
use flowlab_core::experiments::{registry, run_experiment};
use flowlab_core::report::{render, write_report, Format};

#[derive(Parser)]
#[command(name = "flowlab", version, about = "Monte Carlo experiments for a two-regime stochastic flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report destination; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the experiment registry.
    List,
}

fn run(config: PathBuf, out: Option<PathBuf>, format: Format, threads: Option<usize>) -> Result<bool> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("parsing {}", config.display()))?;
    let start = Instant::now();
    let reports = run_experiment(&cfg)?;
    for r in &reports {
        eprintln!(
            "{:<4} {:<36} {:>11.4e} <= {:<11.4e} {}",
            r.experiment,
            r.name,
            r.statistic,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    eprintln!("{} reports in {:.1?}", reports.len(), start.elapsed());
    match out {
        Some(path) => write_report(&reports, format, &path)?,
        None => print!("{}", render(&reports, format)?),
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for info in registry() {
                println!("{:<4} {}", info.id, info.summary);
            }
            println!("ALL  every experiment above, in order");
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            format,
            threads,
        } => match run(config, out, format, threads) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
