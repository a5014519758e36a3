//! Self-checks run by the `validate` subcommand.

use std::io::Write;

use goalrate::streams::ReplicationStreams;
use goalrate::{
    closed_form_allocation, cost_coefficients, deviation_gains, estimate_costs,
    exhaustive_allocation_capped, expected_gap, simulate_pair, synthesize_gains,
    uniform_allocation, GainSchedule, RateAllocation, SystemSpec,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::table::{num, TableWriter};

pub const VALIDATION_COLUMNS: &[&str] = &["check", "system", "passed", "measured", "tolerance", "detail"];

const PATH_REPLICATIONS: u64 = 200;
const PATH_TOL: f64 = 1e-9;
const KKT_TOL: f64 = 1e-9;
const Z_LIMIT: f64 = 5.0;
const ORACLE_HORIZON: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub system: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<W, CliError> {
        let mut table = TableWriter::new(
            out,
            &format!("validate v1: {}", VALIDATION_COLUMNS.join(",")),
            VALIDATION_COLUMNS,
        )?;
        for c in &self.checks {
            table.row(&[
                c.name.to_string(),
                c.system.clone(),
                c.passed.to_string(),
                num(c.measured),
                num(c.tolerance),
                c.detail.clone(),
            ])?;
        }
        table.into_inner()
    }
}

/// `(measured, tolerance, detail)`; passes when `measured <= tolerance`.
type Outcome = Result<(f64, f64, String), goalrate::Error>;

fn record(report: &mut ValidationReport, name: &'static str, system: &str, outcome: Outcome) {
    let check = match outcome {
        Ok((measured, tolerance, detail)) => Check {
            name,
            system: system.to_string(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            detail,
        },
        Err(e) => Check {
            name,
            system: system.to_string(),
            passed: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
            detail: e.to_string(),
        },
    };
    report.checks.push(check);
}

fn systems(cfg: &ExperimentConfig) -> Result<Vec<(String, SystemSpec)>, CliError> {
    let s = &cfg.system;
    if s.a.is_some() || s.a_seq.is_some() || s.jump.is_some() {
        return Ok(vec![("configured".into(), cfg.configured_spec()?)]);
    }
    Ok(cfg
        .sweep_values()?
        .into_iter()
        .map(|a| (format!("A={a}"), cfg.spec_with(a)))
        .collect())
}

pub fn run_validation(cfg: &ExperimentConfig) -> Result<ValidationReport, CliError> {
    run_validation_with(cfg, |spec| synthesize_gains(spec))
}

/// Runs the suite with gains from `make_gains` instead of the Riccati
/// recursion.
pub fn run_validation_with(
    cfg: &ExperimentConfig,
    make_gains: impl Fn(&SystemSpec) -> goalrate::Result<GainSchedule>,
) -> Result<ValidationReport, CliError> {
    let mut report = ValidationReport::default();
    for (label, spec) in systems(cfg)? {
        let gains = make_gains(&spec)?;
        check_system(cfg, &label, &spec, &gains, &mut report);
    }
    Ok(report)
}

fn check_system(
    cfg: &ExperimentConfig,
    label: &str,
    spec: &SystemSpec,
    gains: &GainSchedule,
    report: &mut ValidationReport,
) {
    record(report, "gain_schedule", label, gains.check(spec.horizon).map(|_| {
        (0.0, 0.0, format!("F_T = {}", gains.f_seq.last().copied().unwrap_or(f64::NAN)))
    }));
    record(report, "path_identity", label, path_identity(cfg, spec, gains));

    let coeffs = deviation_gains(spec, gains).and_then(|t| cost_coefficients(spec, gains, &t));
    let optimal = coeffs
        .clone()
        .and_then(|c| closed_form_allocation(&c, cfg.budget));
    record(report, "kkt_equalization", label, coeffs.clone().and_then(|c| {
        let alloc = optimal.clone()?;
        let levels: Vec<f64> = (0..c.a.len())
            .filter(|&t| alloc.r[t] > 0.0)
            .map(|t| c.a[t] * (-2.0 * alloc.r[t]).exp2())
            .collect();
        let spread = match levels.iter().cloned().reduce(f64::max) {
            Some(hi) => {
                let lo = levels.iter().cloned().fold(f64::INFINITY, f64::min);
                (hi - lo) / hi
            }
            None => 0.0,
        };
        Ok((spread, KKT_TOL, format!("{} active stages", levels.len())))
    }));
    record(report, "budget", label, coeffs.clone().and_then(|c| {
        let alloc = optimal.clone()?;
        alloc.check()?;
        let slack = if c.a.iter().any(|&a| a > 0.0) {
            (alloc.total() - cfg.budget).abs()
        } else {
            0.0
        };
        Ok((slack, goalrate::alloc::BUDGET_SLACK, format!("sum R = {}", alloc.total())))
    }));
    record(report, "oracle_dominance", label, oracle_dominance(cfg, spec, gains));
    let uniform = uniform_allocation(cfg.budget, spec.horizon);
    for (name, alloc) in [("mc_gap_optimal", optimal), ("mc_gap_uniform", uniform)] {
        record(report, name, label, alloc.and_then(|a| mc_gap(cfg, spec, gains, &a)));
    }
}

fn path_identity(cfg: &ExperimentConfig, spec: &SystemSpec, gains: &GainSchedule) -> Outcome {
    let table = deviation_gains(spec, gains)?;
    let alloc = uniform_allocation(cfg.budget, spec.horizon)?;
    let mut worst: f64 = 0.0;
    for r in 0..PATH_REPLICATIONS {
        let mut streams = ReplicationStreams::new(cfg.mc.master_seed, r);
        let pair = simulate_pair(spec, gains, &alloc, &mut streams)?;
        for k in 1..=spec.horizon {
            let predicted: f64 = table.row(k).iter().zip(&pair.n_c).map(|(g, n)| g * n).sum();
            let dev = pair.x_c[k] - pair.x_p[k];
            worst = worst.max((dev - predicted).abs() / (1.0 + pair.x_c[k].abs()));
        }
    }
    Ok((worst, PATH_TOL, format!("{PATH_REPLICATIONS} paths")))
}

fn oracle_dominance(cfg: &ExperimentConfig, spec: &SystemSpec, gains: &GainSchedule) -> Outcome {
    // Grid search is only tractable on a short horizon; use the leading
    // stages with a proportional share of the budget.
    let horizon = spec.horizon.min(ORACLE_HORIZON);
    let short = SystemSpec {
        a_seq: spec.a_seq[..horizon].to_vec(),
        horizon,
        ..spec.clone()
    };
    let short_gains = if horizon == spec.horizon {
        gains.clone()
    } else {
        synthesize_gains(&short)?
    };
    let budget = cfg.budget * horizon as f64 / spec.horizon as f64;
    let table = deviation_gains(&short, &short_gains)?;
    let coeffs = cost_coefficients(&short, &short_gains, &table)?;
    let closed = closed_form_allocation(&coeffs, budget)?;
    let grid = exhaustive_allocation_capped(&coeffs, budget, cfg.grid_step, cfg.exhaustive.cap as u128)?;
    let gap_closed = expected_gap(&coeffs, &closed)?;
    let gap_grid = expected_gap(&coeffs, &grid)?;
    let a_max = coeffs.a.iter().cloned().fold(0.0, f64::max);
    let eps = a_max * (1.0 - (-2.0 * cfg.grid_step).exp2());
    let tol = 1e-12 * gap_grid.max(1.0);
    // Both directions: the closed form is optimal and the grid is within
    // its resolution bound of it.
    let excess = (gap_closed - gap_grid).max(gap_grid - gap_closed - eps);
    Ok((excess, tol, format!("{horizon} stages, closed {gap_closed}, grid {gap_grid}, eps {eps}")))
}

fn mc_gap(
    cfg: &ExperimentConfig,
    spec: &SystemSpec,
    gains: &GainSchedule,
    alloc: &RateAllocation,
) -> Outcome {
    let report = estimate_costs(spec, gains, alloc, cfg.mc.replications, cfg.mc.master_seed)?;
    let diff = report.excess.mean - report.analytic_gap;
    let z = if report.excess.se > 0.0 {
        diff.abs() / report.excess.se
    } else if diff.abs() <= 1e-12 * report.analytic_gap.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok((
        z,
        Z_LIMIT,
        format!(
            "mc {} +- {} vs analytic {}",
            report.excess.mean, report.excess.se, report.analytic_gap
        ),
    ))
}
