//! Experiment runner for goal-oriented rate allocation: configuration
//! files, the experiment tables and the validation suite behind the
//! `goalrate` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod table;
pub mod validate;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CostSweep,
    RateProfile,
    TimeVariant,
    Validate,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::CostSweep => "cost-sweep",
            Self::RateProfile => "rate-profile",
            Self::TimeVariant => "time-variant",
            Self::Validate => "validate",
        }
    }
}

/// Runs one subcommand, writing `<out>/<subcommand>.csv` and
/// `<out>/manifest.txt`. Returns the CSV path.
pub fn run(
    cmd: Subcommand,
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    write_manifest(cmd, cfg, config_bytes, out_dir)?;
    let path = out_dir.join(format!("{}.csv", cmd.name()));
    let file = BufWriter::new(File::create(&path)?);
    match cmd {
        Subcommand::CostSweep => {
            experiments::run_invariant_cost_sweep(cfg, file)?;
        }
        Subcommand::RateProfile => {
            experiments::run_rate_profile(cfg, file)?;
        }
        Subcommand::TimeVariant => {
            experiments::run_time_variant(cfg, file)?;
        }
        Subcommand::Validate => {
            let report = validate::run_validation(cfg)?;
            report.write(file)?;
            if !report.passed() {
                let names: Vec<String> = report
                    .failures()
                    .map(|c| format!("{} ({})", c.name, c.system))
                    .collect();
                return Err(CliError::Validation(names.join(", ")));
            }
        }
    }
    Ok(path)
}

fn write_manifest(
    cmd: Subcommand,
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<(), CliError> {
    let hash = hex::encode(Sha256::digest(config_bytes));
    let text = format!(
        "subcommand = {}\nconfig_sha256 = {hash}\nschema_version = {}\nmaster_seed = {}\nreplications = {}\ngoalrate_core = {}\ngoalrate_cli = {}\n",
        cmd.name(),
        cfg.schema_version,
        cfg.mc.master_seed,
        cfg.mc.replications,
        goalrate::VERSION,
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(out_dir.join("manifest.txt"), text)?;
    Ok(())
}
