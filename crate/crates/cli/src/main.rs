use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use goalrate_cli::{run, CliError, ExperimentConfig, Subcommand};

#[derive(Parser)]
#[command(name = "goalrate", version, about = "Rate allocation experiments for rate-limited LQR control")]
enum Cli {
    /// Relative LQR cost of optimal vs. uniform allocation across a sweep of A.
    CostSweep(Common),
    /// Per-stage optimal rates for each (A, B) pair.
    RateProfile(Common),
    /// Closed form vs. exhaustive search on a plant whose A jumps.
    TimeVariant(Common),
    /// Run the self-checks and report pass/fail.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `mc.master_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications (overrides `mc.replications`).
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let (cmd, args) = match Cli::parse() {
        Cli::CostSweep(a) => (Subcommand::CostSweep, a),
        Cli::RateProfile(a) => (Subcommand::RateProfile, a),
        Cli::TimeVariant(a) => (Subcommand::TimeVariant, a),
        Cli::Validate(a) => (Subcommand::Validate, a),
    };
    match execute(cmd, args) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("goalrate {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Subcommand, args: Common) -> Result<PathBuf, CliError> {
    let (mut cfg, bytes) = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.mc.master_seed = seed;
    }
    if let Some(n) = args.replications {
        cfg.mc.replications = n;
    }
    cfg.check()?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let out = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    run(cmd, &cfg, &bytes, &out)
}
