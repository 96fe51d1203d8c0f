use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blowup::commands::{execute, with_output, Command};
use blowup::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "blowup", version, about = "Blowup profiles, spectral checks and shooting for a coupled heat system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any configuration key, e.g. `--set M_trunc=12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Primary output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print Γ, γ, b, c1, D, E as JSON.
    Constants(Common),
    /// Tabulate eigenpairs up to degree M_trunc as CSV.
    Eigen(Common),
    /// Run the identity suite and write the JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run over the full (p, q, μ) grid instead of one point.
        #[arg(long)]
        grid: bool,
        /// Perturb b by this relative amount (self-test of the suite).
        #[arg(long)]
        fault_b: Option<f64>,
    },
    /// Evolve initial data and write trajectory and snapshot CSV.
    Simulate(Common),
    /// Search for a trapped (d0, d1).
    Shoot(Common),
    /// Recover (T, a) under a ladder of perturbations.
    Stability(Common),
    /// Tabulate the final-time profile as CSV.
    FinalProfile(Common),
}

fn build_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for (key, v) in [("p", common.p), ("q", common.q), ("mu", common.mu)] {
        if let Some(v) = v {
            cfg.set(key, &v.to_string())?;
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    let cfg = with_output(&cfg, common.out.as_deref());
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, command) = match cli.command {
        Cmd::Constants(c) => (c, Command::Constants),
        Cmd::Eigen(c) => (c, Command::Eigen),
        Cmd::Verify { common, grid, fault_b } => (common, Command::Verify { grid, fault_b }),
        Cmd::Simulate(c) => (c, Command::Simulate),
        Cmd::Shoot(c) => (c, Command::Shoot),
        Cmd::Stability(c) => (c, Command::Stability),
        Cmd::FinalProfile(c) => (c, Command::FinalProfile),
    };
    let result = build_config(&common).and_then(|cfg| execute(&command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
