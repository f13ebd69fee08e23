use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use manetsim::harness::{self, compare_files, parse_seeds, write_report};
use manetsim::{Error, RunOptions, ScenarioConfig, SweepTable};

/// Packet-level MANET simulator comparing CH_G and CHG clustered backbones.
#[derive(Parser)]
#[command(name = "manetsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed and write a single-row report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Event log, one line per processed event.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Role-change log.
        #[arg(long)]
        role_log: Option<PathBuf>,
        /// Per-node MAC counters as CSV.
        #[arg(long)]
        mac_counters: Option<PathBuf>,
    },
    /// Simulate many seeds in parallel and add median/min/max rows.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// `N` for 1..=N, `a..b`, or a comma-separated list.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair two reports seed by seed (`b` relative to `a`).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn create(path: &Path) -> anyhow::Result<Box<dyn Write + Send>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

/// `MANETSIM_TRACE_DIR` redirects the trace into that directory.
fn trace_destination(requested: &Path) -> PathBuf {
    match std::env::var_os("MANETSIM_TRACE_DIR") {
        Some(dir) if !dir.is_empty() => {
            let name = requested.file_name().unwrap_or(requested.as_os_str());
            Path::new(&dir).join(name)
        }
        _ => requested.to_path_buf(),
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run {
            scenario,
            seed,
            out,
            trace,
            role_log,
            mac_counters,
        } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let seed = seed.unwrap_or(cfg.master_seed);
            let options = RunOptions {
                trace: trace.map(|p| create(&trace_destination(&p))).transpose()?,
                role_log: role_log.map(|p| create(&p)).transpose()?,
            };
            let outcome = harness::run(&cfg, seed, options)?;
            let table = SweepTable {
                reports: vec![outcome.report],
                aggregates: Vec::new(),
            };
            write_report(&out, &table, &cfg.with_seed(seed))?;
            if let Some(path) = mac_counters {
                let mut w = create(&path)?;
                writeln!(
                    w,
                    "node,enqueued,tx_attempts,delivered,collisions,drops_retry,drops_queue,broadcasts"
                )?;
                for (i, c) in outcome.mac.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        i + 1,
                        c.enqueued,
                        c.tx_attempts,
                        c.delivered,
                        c.collisions,
                        c.drops_retry,
                        c.drops_queue,
                        c.broadcasts
                    )?;
                }
                w.flush()?;
            }
            println!("{}", outcome.report.to_csv_row());
        }
        Command::Sweep {
            scenario,
            seeds,
            out,
        } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let seeds = parse_seeds(&seeds).map_err(Error::from)?;
            let table = harness::sweep(&cfg, &seeds)?;
            write_report(&out, &table, &cfg)?;
            eprintln!("{} runs written to {}", table.reports.len(), out.display());
        }
        Command::Compare { a, b, out } => {
            let report = compare_files(&a, &b)?;
            std::fs::write(&out, report.to_csv())
                .with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}
