use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ergopoint_cli::{emit_plot_data, run, ExperimentConfig, RunManifest, SeriesKind, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "ergopoint", version, about = "Run ergopoint experiments and export their data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, env = OUT_DIR_ENV, default_value = "ergopoint-out")]
        out: PathBuf,
    },
    /// Write one data series of a manifest as CSV.
    Emit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: SeriesKind,
        /// Defaults to `<kind>.csv` next to the manifest.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, seed, replicates, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = replicates {
                cfg.replicates = n;
            }
            let manifest = run(&cfg, &out).with_context(|| format!("running {}", config.display()))?;
            for r in &manifest.reports {
                println!(
                    "{:<28} {} statistic={:.6} p={:.4} N={}",
                    r.test_name,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.statistic,
                    r.p_value,
                    r.sample_size
                );
            }
            println!("overall: {}  ({:.2}s, output in {})", if manifest.overall_pass { "PASS" } else { "FAIL" }, manifest.wall_clock_seconds, out.display());
            Ok(manifest.overall_pass)
        }
        Command::Emit { manifest, kind, output } => {
            let m = RunManifest::load(&manifest)?;
            let path = output.unwrap_or_else(|| manifest.with_file_name(format!("{kind}.csv")));
            emit_plot_data(&m, kind, &path)?;
            println!("{}", path.display());
            Ok(true)
        }
    }
}
