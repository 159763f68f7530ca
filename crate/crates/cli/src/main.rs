use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use holoqd_cli::{parse_config, run, write_manifest, Manifest, RunConfig, Scenario, EXIT_CONFIG};
use log::error;

/// Holonomic heavy-hole spin control simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Scenario to run; overrides `scenario` in the config file.
    #[arg(value_enum)]
    scenario: Option<Scenario>,
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and gate inputs.
    #[arg(long)]
    threads: Option<usize>,
    /// Rotates the sphere quadrature point set.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<RunConfig, String> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if args.scenario.is_some() {
        cfg.scenario = args.scenario;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let clock = Instant::now();
    let args = Args::parse();
    match load(&args) {
        Ok(cfg) => ExitCode::from(run(&cfg) as u8),
        Err(msg) => {
            error!("{msg}");
            let dir = args.out.clone().unwrap_or_else(|| RunConfig::default().out_dir);
            let manifest = Manifest::config_failure(&msg, clock.elapsed().as_secs_f64());
            if let Err(e) = write_manifest(&dir, &manifest) {
                error!("could not write manifest: {e}");
            }
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
