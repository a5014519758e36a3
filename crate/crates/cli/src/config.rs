//! Experiment configuration files (TOML, schema version 1).
//!
//! Plant parameters the experiments share default to `B = 1`, `Q = 2`,
//! `D = 5`, `x0 = 100` and 11 stages. Everything else (budget, compression
//! constant, disturbance variance, Monte Carlo settings) has to be written
//! in the file. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use goalrate::SystemSpec;
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub system: SystemConfig,
    /// Total rate budget `R_sum` in bits.
    pub budget: f64,
    #[serde(default = "default_modes")]
    pub allocation_modes: Vec<AllocationMode>,
    pub sweep: Option<SweepConfig>,
    pub mc: McConfig,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default)]
    pub exhaustive: ExhaustiveConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Constant plant coefficient.
    pub a: Option<f64>,
    /// Explicit per-stage coefficients; length must equal `horizon`.
    pub a_seq: Option<Vec<f64>>,
    pub jump: Option<JumpConfig>,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub sigma_z2: f64,
    pub c2: f64,
    /// Riccati seed; defaults to `q`.
    pub terminal_weight: Option<f64>,
}

/// `A_t = a1` for `t < t_jump`, `a2` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub t_jump: usize,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    Optimal,
    Uniform,
    Exhaustive,
}

impl AllocationMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Uniform => "uniform",
            Self::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepParameter {
    A,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl SweepConfig {
    /// Points `from, from + step, ...` up to `to` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.from + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub replications: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustiveConfig {
    #[serde(default = "default_max_horizon")]
    pub max_horizon: usize,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

impl Default for ExhaustiveConfig {
    fn default() -> Self {
        Self {
            max_horizon: default_max_horizon(),
            cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// `(A, B)` pairs for `rate-profile`; falls back to the sweep values with
    /// `system.b`.
    pub pairs: Option<Vec<[f64; 2]>>,
    /// Replaces the Riccati gains with one constant gain.
    pub fixed_gain: Option<f64>,
}

fn default_modes() -> Vec<AllocationMode> {
    vec![AllocationMode::Optimal, AllocationMode::Uniform]
}
fn default_grid_step() -> f64 {
    0.05
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_b() -> f64 {
    1.0
}
fn default_q() -> f64 {
    2.0
}
fn default_d() -> f64 {
    5.0
}
fn default_x0() -> f64 {
    100.0
}
fn default_horizon() -> usize {
    11
}
fn default_max_horizon() -> usize {
    6
}
fn default_cap() -> u64 {
    100_000_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
        Ok((Self::from_toml(text)?, bytes))
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return bad(format!("budget must be >= 0, got {}", self.budget));
        }
        if self.allocation_modes.is_empty() {
            return bad("allocation_modes must not be empty".into());
        }
        if !(self.grid_step > 0.0) {
            return bad(format!("grid_step must be > 0, got {}", self.grid_step));
        }
        if self.mc.replications == 0 {
            return bad("mc.replications must be >= 1".into());
        }
        if let Some(sweep) = &self.sweep {
            if !(sweep.step > 0.0) || !(sweep.to >= sweep.from) {
                return bad(format!(
                    "sweep needs step > 0 and to >= from, got from={} to={} step={}",
                    sweep.from, sweep.to, sweep.step
                ));
            }
        }
        let s = &self.system;
        let sources = [s.a.is_some(), s.a_seq.is_some(), s.jump.is_some()]
            .iter()
            .filter(|x| **x)
            .count();
        if sources > 1 {
            return bad("set at most one of system.a, system.a_seq, system.jump".into());
        }
        if self.allocation_modes.contains(&AllocationMode::Exhaustive)
            && s.horizon > self.exhaustive.max_horizon
        {
            return bad(format!(
                "exhaustive mode needs horizon <= {}, got {}",
                self.exhaustive.max_horizon, s.horizon
            ));
        }
        if sources == 1 {
            self.configured_spec()?;
        } else {
            // No coefficient yet; the sweep supplies it.
            self.spec_with(1.0)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn base_spec(&self, a_seq: Vec<f64>, b: f64) -> SystemSpec {
        let s = &self.system;
        SystemSpec {
            a_seq,
            b,
            q: s.q,
            d: s.d,
            horizon: s.horizon,
            x0: s.x0,
            sigma_z2: s.sigma_z2,
            c2: s.c2,
            terminal_weight: s.terminal_weight.unwrap_or(s.q),
        }
    }

    /// The configured plant. A constant `a` overrides any sequence or jump.
    pub fn spec_with(&self, a: f64) -> SystemSpec {
        self.base_spec(vec![a; self.system.horizon], self.system.b)
    }

    pub fn spec_with_pair(&self, a: f64, b: f64) -> SystemSpec {
        self.base_spec(vec![a; self.system.horizon], b)
    }

    /// Plant as written in `[system]`, honoring `a_seq` and `jump`.
    pub fn configured_spec(&self) -> Result<SystemSpec, CliError> {
        let s = &self.system;
        let a_seq = if let Some(seq) = &s.a_seq {
            seq.clone()
        } else if let Some(j) = s.jump {
            jump_sequence(j, s.horizon)
        } else if let Some(a) = s.a {
            vec![a; s.horizon]
        } else {
            return Err(CliError::Config(
                "system needs one of a, a_seq or jump".into(),
            ));
        };
        let spec = self.base_spec(a_seq, s.b);
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn jump(&self) -> Result<JumpConfig, CliError> {
        self.system
            .jump
            .ok_or_else(|| CliError::Config("time-variant needs [system.jump]".into()))
    }

    pub fn sweep_values(&self) -> Result<Vec<f64>, CliError> {
        self.sweep
            .as_ref()
            .map(SweepConfig::values)
            .ok_or_else(|| CliError::Config("this experiment needs a [sweep] table".into()))
    }

    pub fn jump_spec(&self, jump: JumpConfig) -> SystemSpec {
        self.base_spec(jump_sequence(jump, self.system.horizon), self.system.b)
    }
}

fn jump_sequence(j: JumpConfig, horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| if t < j.t_jump { j.a1 } else { j.a2 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
budget = 22.0
[system]
sigma_z2 = 1.0
c2 = 100.0
[mc]
replications = 1000
master_seed = 7
"#;

    #[test]
    fn minimal_config_gets_shared_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.system.b, 1.0);
        assert_eq!(cfg.system.q, 2.0);
        assert_eq!(cfg.system.d, 5.0);
        assert_eq!(cfg.system.x0, 100.0);
        assert_eq!(cfg.system.horizon, 11);
        let spec = cfg.spec_with(1.5);
        assert_eq!(spec.terminal_weight, 2.0);
        assert_eq!(spec.a_seq, vec![1.5; 11]);
        assert!(cfg.configured_spec().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("budget = 22.0", "budget = 22.0\nbugdet = 1.0");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(CliError::Config(_))
        ));
        let text = MINIMAL.replace("c2 = 100.0", "c2 = 100.0\nfoo = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn required_fields_and_versions() {
        let text = MINIMAL.replace("c2 = 100.0\n", "");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = MINIMAL.replace("budget = 22.0", "budget = -1.0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn sweep_validation_and_values() {
        let text = format!("{MINIMAL}[sweep]\nparameter = \"A\"\nfrom = 0.0\nto = 3.0\nstep = 0.5\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.sweep_values().unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let text = text.replace("step = 0.5", "step = 0.0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = format!("{MINIMAL}[sweep]\nparameter = \"B\"\nfrom = 0.0\nto = 3.0\nstep = 0.5\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn exhaustive_requires_short_horizon() {
        let text = format!("allocation_modes = [\"optimal\", \"exhaustive\"]\n{MINIMAL}");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = text.replace("c2 = 100.0", "c2 = 100.0\nhorizon = 4");
        assert!(ExperimentConfig::from_toml(&text).is_ok());
    }

    #[test]
    fn jump_sequence_switches_at_t_jump() {
        let text = MINIMAL.replace(
            "c2 = 100.0",
            "c2 = 100.0\nhorizon = 4\njump = { t_jump = 3, a1 = 1.0, a2 = 2.0 }",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.configured_spec().unwrap().a_seq, vec![1.0, 1.0, 1.0, 2.0]);
        let both = text.replace("horizon = 4", "horizon = 4\na = 1.0");
        assert!(ExperimentConfig::from_toml(&both).is_err());
    }
}
