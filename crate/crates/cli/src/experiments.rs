//! The three experiment tables: cost sweep over `A`, per-stage rate
//! profiles, and the time-variant plant with a coefficient jump.

use std::io::Write;

use goalrate::sim::{compare_allocations, AllocationComparison};
use goalrate::{
    closed_form_allocation, cost_coefficients, deviation_gains, exhaustive_allocation_capped,
    expected_gap, synthesize_gains, unconstrained_closed_form, uniform_allocation,
    CostCoefficients, GainSchedule, RateAllocation, SystemSpec,
};

use crate::config::{AllocationMode, ExperimentConfig, JumpConfig};
use crate::error::CliError;
use crate::table::{num, TableWriter};

pub const COST_SWEEP_COLUMNS: &[&str] = &[
    "A",
    "R_sum",
    "J_p",
    "J_p_se",
    "J_c_opt",
    "J_c_opt_se",
    "J_c_unif",
    "J_c_unif_se",
    "J_RCost_opt",
    "J_RCost_opt_se",
    "J_RCost_unif",
    "J_RCost_unif_se",
    "J_RCost_gain",
    "J_RCost_gain_se",
    "gap_opt_analytic",
    "gap_opt_mc",
    "gap_opt_mc_se",
    "gap_unif_analytic",
    "gap_unif_mc",
    "gap_unif_mc_se",
];

pub const TIME_VARIANT_COLUMNS: &[&str] = &[
    "run",
    "t",
    "A_t",
    "F_t",
    "a_t",
    "R_closed_form",
    "R_exhaustive",
    "gap_closed_form",
    "gap_exhaustive",
    "eps_grid",
];

/// Gains (Riccati or a fixed override), deviation table and cost weights.
pub struct Analysis {
    pub spec: SystemSpec,
    pub gains: GainSchedule,
    pub coeffs: CostCoefficients,
}

impl Analysis {
    pub fn new(spec: SystemSpec, fixed_gain: Option<f64>) -> Result<Self, CliError> {
        let gains = match fixed_gain {
            Some(f) => GainSchedule::constant(f, spec.horizon),
            None => synthesize_gains(&spec)?,
        };
        let table = deviation_gains(&spec, &gains)?;
        let coeffs = cost_coefficients(&spec, &gains, &table)?;
        Ok(Self { spec, gains, coeffs })
    }
}

pub struct SweepPoint {
    pub a: f64,
    pub optimal: RateAllocation,
    pub uniform: RateAllocation,
    /// `first` is the optimal allocation, `second` the uniform one.
    pub costs: AllocationComparison,
}

/// Relative-cost comparison of optimal and uniform allocation for every `A`
/// in the sweep. Rows are written and flushed as each point finishes.
pub fn run_invariant_cost_sweep<W: Write>(
    cfg: &ExperimentConfig,
    out: W,
) -> Result<(Vec<SweepPoint>, W), CliError> {
    let mut table = TableWriter::new(
        out,
        &format!("cost-sweep v1: {}", COST_SWEEP_COLUMNS.join(",")),
        COST_SWEEP_COLUMNS,
    )?;
    let mut points = Vec::new();
    for a in cfg.sweep_values()? {
        let analysis = Analysis::new(cfg.spec_with(a), None)?;
        let optimal = closed_form_allocation(&analysis.coeffs, cfg.budget)?;
        let uniform = uniform_allocation(cfg.budget, analysis.spec.horizon)?;
        let costs = compare_allocations(
            &analysis.spec,
            &analysis.gains,
            &optimal,
            &uniform,
            cfg.mc.replications,
            cfg.mc.master_seed,
        )?;
        let (o, u) = (&costs.first, &costs.second);
        table.row(&[
            num(a),
            num(cfg.budget),
            num(o.j_p.mean),
            num(o.j_p.se),
            num(o.j_c.mean),
            num(o.j_c.se),
            num(u.j_c.mean),
            num(u.j_c.se),
            num(o.j_rcost.mean),
            num(o.j_rcost.se),
            num(u.j_rcost.mean),
            num(u.j_rcost.se),
            num(costs.rcost_advantage.mean),
            num(costs.rcost_advantage.se),
            num(o.analytic_gap),
            num(o.excess.mean),
            num(o.excess.se),
            num(u.analytic_gap),
            num(u.excess.mean),
            num(u.excess.se),
        ])?;
        points.push(SweepPoint {
            a,
            optimal,
            uniform,
            costs,
        });
    }
    Ok((points, table.into_inner()?))
}

pub struct ProfileRun {
    pub a: f64,
    pub b: f64,
    pub analysis: Analysis,
    pub raw: Vec<f64>,
    pub allocations: Vec<(AllocationMode, RateAllocation)>,
}

impl ProfileRun {
    pub fn allocation(&self, mode: AllocationMode) -> Option<&RateAllocation> {
        self.allocations
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, r)| r)
    }
}

fn allocate(
    cfg: &ExperimentConfig,
    mode: AllocationMode,
    coeffs: &CostCoefficients,
    horizon: usize,
) -> Result<RateAllocation, CliError> {
    Ok(match mode {
        AllocationMode::Optimal => closed_form_allocation(coeffs, cfg.budget)?,
        AllocationMode::Uniform => uniform_allocation(cfg.budget, horizon)?,
        AllocationMode::Exhaustive => exhaustive_allocation_capped(
            coeffs,
            cfg.budget,
            cfg.grid_step,
            cfg.exhaustive.cap as u128,
        )?,
    })
}

/// Per-stage rates for each configured `(A, B)` pair.
pub fn run_rate_profile<W: Write>(
    cfg: &ExperimentConfig,
    out: W,
) -> Result<(Vec<ProfileRun>, W), CliError> {
    let pairs: Vec<(f64, f64)> = match &cfg.profile.pairs {
        Some(pairs) => pairs.iter().map(|p| (p[0], p[1])).collect(),
        None => cfg
            .sweep_values()?
            .into_iter()
            .map(|a| (a, cfg.system.b))
            .collect(),
    };
    let mut columns: Vec<String> = ["A", "B", "t", "F_t", "a_t", "R_raw"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    columns.extend(cfg.allocation_modes.iter().map(|m| format!("R_{}", m.name())));
    let header: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = TableWriter::new(
        out,
        &format!("rate-profile v1: {}", columns.join(",")),
        &header,
    )?;

    let mut runs = Vec::new();
    for (a, b) in pairs {
        let analysis = Analysis::new(cfg.spec_with_pair(a, b), cfg.profile.fixed_gain)?;
        let horizon = analysis.spec.horizon;
        let raw = unconstrained_closed_form(&analysis.coeffs, cfg.budget)?;
        let allocations = cfg
            .allocation_modes
            .iter()
            .map(|&m| allocate(cfg, m, &analysis.coeffs, horizon).map(|r| (m, r)))
            .collect::<Result<Vec<_>, _>>()?;
        for t in 0..=horizon {
            let mut row = vec![
                num(a),
                num(b),
                t.to_string(),
                num(analysis.gains.f_seq[t]),
                num(analysis.coeffs.a[t]),
                num(raw[t]),
            ];
            row.extend(allocations.iter().map(|(_, r)| num(r.r[t])));
            table.row(&row)?;
        }
        runs.push(ProfileRun {
            a,
            b,
            analysis,
            raw,
            allocations,
        });
    }
    Ok((runs, table.into_inner()?))
}

pub struct TimeVariantRun {
    pub label: &'static str,
    pub analysis: Analysis,
    pub closed_form: RateAllocation,
    pub exhaustive: RateAllocation,
    pub gap_closed_form: f64,
    pub gap_exhaustive: f64,
    pub eps_grid: f64,
}

impl TimeVariantRun {
    fn new(label: &'static str, cfg: &ExperimentConfig, spec: SystemSpec) -> Result<Self, CliError> {
        let analysis = Analysis::new(spec, None)?;
        let closed_form = closed_form_allocation(&analysis.coeffs, cfg.budget)?;
        let exhaustive = exhaustive_allocation_capped(
            &analysis.coeffs,
            cfg.budget,
            cfg.grid_step,
            cfg.exhaustive.cap as u128,
        )?;
        let gap_closed_form = expected_gap(&analysis.coeffs, &closed_form)?;
        let gap_exhaustive = expected_gap(&analysis.coeffs, &exhaustive)?;
        let a_max = analysis.coeffs.a.iter().cloned().fold(0.0, f64::max);
        let eps_grid = a_max * (1.0 - (-2.0 * cfg.grid_step).exp2());
        Ok(Self {
            label,
            analysis,
            closed_form,
            exhaustive,
            gap_closed_form,
            gap_exhaustive,
            eps_grid,
        })
    }

    /// Closed form no worse than the grid, grid within the resolution bound.
    pub fn agrees(&self) -> bool {
        let tol = 1e-12 * self.gap_exhaustive.abs().max(1.0);
        self.gap_closed_form <= self.gap_exhaustive + tol
            && self.gap_exhaustive <= self.gap_closed_form + self.eps_grid + tol
    }
}

/// Closed-form and grid-search allocations for the jump plant and for a
/// control run without the jump (`A2 = A1`).
pub fn run_time_variant<W: Write>(
    cfg: &ExperimentConfig,
    out: W,
) -> Result<(Vec<TimeVariantRun>, W), CliError> {
    let jump = cfg.jump()?;
    if cfg.system.horizon > cfg.exhaustive.max_horizon {
        return Err(CliError::Config(format!(
            "time-variant needs horizon <= {}, got {}",
            cfg.exhaustive.max_horizon, cfg.system.horizon
        )));
    }
    let control = JumpConfig { a2: jump.a1, ..jump };
    let runs = vec![
        TimeVariantRun::new("jump", cfg, cfg.jump_spec(jump))?,
        TimeVariantRun::new("control", cfg, cfg.jump_spec(control))?,
    ];
    let mut table = TableWriter::new(
        out,
        &format!("time-variant v1: {}", TIME_VARIANT_COLUMNS.join(",")),
        TIME_VARIANT_COLUMNS,
    )?;
    for run in &runs {
        let spec = &run.analysis.spec;
        for t in 0..=spec.horizon {
            let a_t = spec.a_seq.get(t).map(|&v| num(v)).unwrap_or_default();
            table.row(&[
                run.label.to_string(),
                t.to_string(),
                a_t,
                num(run.analysis.gains.f_seq[t]),
                num(run.analysis.coeffs.a[t]),
                num(run.closed_form.r[t]),
                num(run.exhaustive.r[t]),
                num(run.gap_closed_form),
                num(run.gap_exhaustive),
                num(run.eps_grid),
            ])?;
        }
    }
    let out = table.into_inner()?;
    if let Some(bad) = runs.iter().find(|r| !r.agrees()) {
        return Err(CliError::Validation(format!(
            "{} run: closed-form gap {} vs exhaustive gap {} (grid bound {})",
            bad.label, bad.gap_closed_form, bad.gap_exhaustive, bad.eps_grid
        )));
    }
    Ok((runs, out))
}
