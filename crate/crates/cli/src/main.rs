mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use output::{Manifest, Output};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Reaction polynomials, potential minima and optional well depths.
    Potential,
    /// Simulated trajectories with coarse-grained profiles.
    Simulate,
    /// PDE solution against averaged simulated profiles.
    Hydro,
    /// Exact total-variation mixing time.
    MixExact,
    /// Coupling upper estimate of the mixing time.
    MixCouple,
    /// Escape times and the exponential-law test.
    Hit,
    /// Mixing times over a list of system sizes.
    SweepMix,
    /// Mean escape times over a list of system sizes.
    SweepEscape,
    /// Rate function of a path or a homogeneous quasi-potential.
    Action,
    /// Stationary law, TV curves, mean hitting times and set rates.
    Exact,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "rdlab", version, about = "Experiments on the Glauber+Kawasaki reaction-diffusion system")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for replica ensembles.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<()> {
    let name = cli.command.name();
    let cfg = config::load(&cli.config, &name)?;
    let threads = cli.threads.or(cfg.common.threads).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.common.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    let mut out = Output::create(&dir)?;
    commands::dispatch(&name, &cfg, &mut out)?;
    let mut outputs = out.files().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        command: &name,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.common.seed,
        threads: rayon::current_num_threads(),
        config: &cfg.raw,
        outputs,
    };
    out.json("manifest.json", &manifest)?;
    eprintln!("{name}: wrote {} files to {}", out.files().len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<config::ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
