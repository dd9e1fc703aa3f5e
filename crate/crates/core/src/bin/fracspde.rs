use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fracspde::config::{parse_config_with, run, Overrides, SEED_ENV};
use fracspde::harness::Mode;
use fracspde::{Error, Result};

/// Convergence and timing experiments for the fractional stochastic
/// sub-diffusion solvers.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Master seed; overrides the file and FRACSPDE_SEED.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// spatial, temporal, timing or single.
    #[arg(long)]
    mode: Option<String>,
}

fn execute(cli: &Cli) -> Result<()> {
    let mode = cli.mode.as_deref().map(str::parse::<Mode>).transpose()?;
    let text = std::fs::read_to_string(&cli.config)?;
    let ov = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        out_dir: cli.out.clone(),
        mode,
    };
    let cfg = parse_config_with(&text, &ov)?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cfg.verbosity))
        .try_init()
        .ok();
    let seed = cfg.resolve_seed(std::env::var(SEED_ENV).ok().as_deref())?;
    log::info!("mode {} seed {seed} -> {}", cfg.mode, cfg.out_dir.display());
    run(&cfg, seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracspde: {e}");
            let code: Error = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}
