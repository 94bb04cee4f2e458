use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use landau_lab::dynamics::Component;
use landau_lab::kernels::SpeciesPair;
use landau_lab::run::{parse_window, run_command, validate_config, Command, CommandOptions};
use landau_lab::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Coeffs,
    Conserve,
    Nullspace,
    Coercivity,
    Spectrum,
    Dispersion,
    Cancellation,
    Gap,
    Evolve,
    Hsplit,
    Decay,
    Picard,
    Smooth,
    All,
}

/// Spectral-Galerkin experiments for the linearized two-species Landau system.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for random property samples (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// x-derivative order (decay) or Picard order.
    #[arg(long)]
    k: Option<u32>,
    /// p-derivative order (decay).
    #[arg(long)]
    l: Option<u32>,
    /// Decay component, e.g. g-fluid, h00, hperp0.
    #[arg(long)]
    component: Option<String>,
    /// Species pair AB or BB.
    #[arg(long)]
    pair: Option<String>,
    /// Fit window t1:t2.
    #[arg(long)]
    window: Option<String>,
}

fn usage(e: Error) -> ExitCode {
    eprintln!("usage error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return usage(Error::Config { location: p.display().to_string(), message: e.to_string() }),
        },
        None => "{}".to_string(),
    };
    let mut config = match validate_config(&text) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let command: Command = match format!("{:?}", cli.command).to_lowercase().parse() {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let parsed = (|| -> landau_lab::Result<CommandOptions> {
        Ok(CommandOptions {
            k: cli.k,
            l: cli.l,
            component: cli.component.as_deref().map(Component::parse).transpose()?,
            pair: cli.pair.as_deref().map(str::parse::<SpeciesPair>).transpose()?,
            window: cli.window.as_deref().map(parse_window).transpose()?,
            threads: cli.threads,
        })
    })();
    let opts = match parsed {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    match run_command(&config, command, &opts) {
        Ok(m) => {
            print!("{}", m.summary_table());
            println!("manifest: {}", config.output_dir.join("manifest.json").display());
            if m.passed {
                ExitCode::SUCCESS
            } else {
                for c in m.failed_checks() {
                    eprintln!("check failed: {} (value {:e}, limit {})", c.name, c.value, c.limit);
                }
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config { .. }) => usage(e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
