use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use eraser_cli::commands::{cmd_chsh, cmd_fig2, cmd_fig3, cmd_mc, cmd_sweep, Engine, Outcome};
use eraser_cli::config::{OutputFormat, RunConfig};
use eraser_cli::{with_workers, worker_count};
use eraser_core::McMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Quantum,
    Classical,
}

#[derive(Parser, Debug)]
#[command(
    name = "eraser-corr",
    version,
    about = "Gated heterodyne eraser correlations and CHSH analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Photon-pair events per Monte-Carlo run.
    #[arg(long, global = true)]
    events: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[arg(long, global = true, value_enum, default_value_t = Engine::Analytic)]
    engine: Engine,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads; falls back to ERASER_CORR_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// CHSH parameter for the configured angle schedule.
    Chsh,
    /// Coincidence and intensity fringes versus zeta.
    Fig2,
    /// Coincidence rates versus delay.
    Fig3,
    /// One Monte-Carlo run checked against the closed forms.
    Mc,
    /// Gated S versus delay.
    Sweep,
}

fn configure(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.source.seed = seed;
    }
    if let Some(n) = cli.events {
        anyhow::ensure!(n > 0, "--events must be at least 1");
        cfg.mc.n_events = n;
    }
    if let Some(mode) = cli.mode {
        cfg.mc.mode = match mode {
            Mode::Quantum => McMode::QuantumGated,
            Mode::Classical => McMode::ClassicalUngated,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    cfg.output.svg |= cli.svg;
    cfg.check()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = configure(cli)?;
    let workers = worker_count(cli.threads)?;
    with_workers(workers, || match cli.command {
        Command::Chsh => cmd_chsh(&cfg, cli.engine),
        Command::Fig2 => cmd_fig2(&cfg),
        Command::Fig3 => cmd_fig3(&cfg),
        Command::Mc => cmd_mc(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
