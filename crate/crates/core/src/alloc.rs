//! Budgeted rate allocation.
//!
//! The expected excess cost of the rate-limited loop over the perfectly
//! observed one is `sum_t a_t 2^(-2 R_t)`. Minimizing it under
//! `sum_t R_t <= R_sum` equalizes `a_t 2^(-2 R_t)` across the stages that get
//! a positive rate, which gives a geometric-mean closed form. Stages the
//! closed form would drive negative are switched off and the rest re-solved.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lqr::{GainSchedule, SystemSpec};
use crate::noise::DeviationGainTable;

/// Absolute slack allowed on the budget constraint.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Default limit on the number of grid points the exhaustive oracle visits.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Weights `a_0..=a_T` of the excess-cost objective; `a_T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCoefficients {
    pub a: Vec<f64>,
}

impl CostCoefficients {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "cost coefficients must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { a })
    }

    fn active(&self) -> Vec<usize> {
        (0..self.a.len()).filter(|&t| self.a[t] > 0.0).collect()
    }
}

/// Per-stage rates `R_0..=R_T` in bits, with the budget they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    pub r: Vec<f64>,
    pub budget: f64,
}

impl RateAllocation {
    pub fn new(r: Vec<f64>, budget: f64) -> Result<Self> {
        let alloc = Self { r, budget };
        alloc.check()?;
        Ok(alloc)
    }

    pub fn total(&self) -> f64 {
        self.r.iter().sum()
    }

    /// Nonnegative rates whose sum stays within the budget.
    pub fn check(&self) -> Result<()> {
        if let Some((t, r)) = self.r.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("rate R_{t} = {r} is negative")));
        }
        if self.total() > self.budget + BUDGET_SLACK {
            return Err(Error::InvalidArgument(format!(
                "rates sum to {} over budget {}",
                self.total(),
                self.budget
            )));
        }
        Ok(())
    }
}

/// Excess-cost weights for a gain schedule.
///
/// `a_t = c2 (F_t^2 D + sum_{m=t+1}^{T-1} (Q + F_m^2 D) G[m][t]^2)` for
/// `t < T` and `a_T = 0`. Only the costed stages `0..T` contribute, matching
/// the cost charged by the simulator.
pub fn cost_coefficients(
    spec: &SystemSpec,
    gains: &GainSchedule,
    table: &DeviationGainTable,
) -> Result<CostCoefficients> {
    spec.validate()?;
    gains.check(spec.horizon)?;
    let t_end = spec.horizon;
    if table.horizon() != t_end {
        return Err(Error::Dimension(format!(
            "gain table horizon {} vs system horizon {t_end}",
            table.horizon()
        )));
    }
    let weight = |m: usize| spec.q + gains.f_seq[m] * gains.f_seq[m] * spec.d;
    let mut a = vec![0.0; t_end + 1];
    for (t, slot) in a.iter_mut().enumerate().take(t_end) {
        let f = gains.f_seq[t];
        let mut acc = f * f * spec.d;
        for m in (t + 1)..t_end {
            let g = table.row(m)[t];
            acc += weight(m) * g * g;
        }
        *slot = spec.c2 * acc;
    }
    Ok(CostCoefficients { a })
}

/// `sum_t a_t 2^(-2 R_t)`: `T` times the expected excess average-stage cost.
pub fn expected_gap(coeffs: &CostCoefficients, alloc: &RateAllocation) -> Result<f64> {
    if coeffs.a.len() != alloc.r.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients vs {} rates",
            coeffs.a.len(),
            alloc.r.len()
        )));
    }
    Ok(gap_of(&coeffs.a, &alloc.r))
}

fn gap_of(a: &[f64], r: &[f64]) -> f64 {
    a.iter()
        .zip(r)
        .map(|(a, r)| if *a == 0.0 { 0.0 } else { a * (-2.0 * r).exp2() })
        .sum()
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "budget must be finite and >= 0, got {budget}"
        )));
    }
    Ok(())
}

/// Geometric-mean solution over `stages`, written into `out`.
fn solve_on(a: &[f64], stages: &[usize], budget: f64, out: &mut [f64]) {
    let k = stages.len() as f64;
    let mean_log = stages.iter().map(|&t| a[t].log2()).sum::<f64>() / k;
    let share = budget / k;
    for &t in stages {
        out[t] = 0.5 * (a[t].log2() - mean_log) + share;
    }
}

/// Lagrangian closed form without the nonnegativity constraint.
///
/// Zero-weight stages get rate 0 and are left out of the geometric mean; the
/// others can come out negative.
pub fn unconstrained_closed_form(coeffs: &CostCoefficients, budget: f64) -> Result<Vec<f64>> {
    check_budget(budget)?;
    let mut r = vec![0.0; coeffs.a.len()];
    let active = coeffs.active();
    if !active.is_empty() {
        solve_on(&coeffs.a, &active, budget, &mut r);
    }
    Ok(r)
}

/// Optimal allocation with `R_t >= 0`.
///
/// Solves the closed form on the active set, drops every stage that came out
/// nonpositive, and repeats until all active rates are positive. Returns all
/// zeros when every weight is zero.
pub fn closed_form_allocation(coeffs: &CostCoefficients, budget: f64) -> Result<RateAllocation> {
    check_budget(budget)?;
    let a = &coeffs.a;
    let mut r = vec![0.0; a.len()];
    let mut active = coeffs.active();
    while !active.is_empty() {
        solve_on(a, &active, budget, &mut r);
        let before = active.len();
        active.retain(|&t| r[t] > 0.0);
        if active.len() == before {
            break;
        }
        r.iter_mut().for_each(|v| *v = 0.0);
    }
    // Drop the rounding residue of the log-domain solve so the active rates
    // add up to the budget.
    if !active.is_empty() {
        let residue = (budget - active.iter().map(|&t| r[t]).sum::<f64>()) / active.len() as f64;
        for &t in &active {
            r[t] = (r[t] + residue).max(0.0);
        }
    }
    Ok(RateAllocation { r, budget })
}

/// Constant-rate baseline: `budget / T` on stages `0..T`, nothing on `T`.
pub fn uniform_allocation(budget: f64, horizon: usize) -> Result<RateAllocation> {
    check_budget(budget)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut r = vec![budget / horizon as f64; horizon + 1];
    r[horizon] = 0.0;
    Ok(RateAllocation { r, budget })
}

/// Number of ways to split `units` among `parts` stages, saturating.
fn compositions(units: u64, parts: usize) -> u128 {
    if parts == 0 {
        return 1;
    }
    // C(units + parts - 1, parts - 1)
    let n = units as u128 + parts as u128 - 1;
    let k = (parts as u128 - 1).min(units as u128);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Grid-search oracle with the default enumeration cap.
pub fn exhaustive_allocation(
    coeffs: &CostCoefficients,
    budget: f64,
    grid_step: f64,
) -> Result<RateAllocation> {
    exhaustive_allocation_capped(coeffs, budget, grid_step, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates every split of `floor(budget / grid_step)` grid units over
/// the stages with positive weight and returns the one with the smallest
/// gap. Ties go to the lexicographically largest rate vector.
pub fn exhaustive_allocation_capped(
    coeffs: &CostCoefficients,
    budget: f64,
    grid_step: f64,
    cap: u128,
) -> Result<RateAllocation> {
    check_budget(budget)?;
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid_step must be > 0, got {grid_step}"
        )));
    }
    let active = coeffs.active();
    let units = (budget / grid_step + 1e-9).floor() as u64;
    let needed = compositions(units, active.len());
    if needed > cap {
        return Err(Error::EnumerationCap { needed, cap });
    }
    let mut r = vec![0.0; coeffs.a.len()];
    if active.is_empty() {
        return Ok(RateAllocation { r, budget });
    }

    // term[i][n] = a_{active[i]} 2^(-2 n step)
    let terms: Vec<Vec<f64>> = active
        .iter()
        .map(|&t| {
            (0..=units)
                .map(|n| coeffs.a[t] * (-2.0 * n as f64 * grid_step).exp2())
                .collect()
        })
        .collect();

    let best = (0..=units)
        .into_par_iter()
        .filter_map(|first| {
            let mut search = GridSearch {
                terms: &terms,
                current: vec![0; terms.len()],
                best: None,
            };
            search.current[0] = first;
            search.descend(1, units - first, terms[0][first as usize]);
            search.best
        })
        .reduce_with(|lhs, rhs| pick_earlier(lhs, rhs))
        .expect("the all-on-first-stage split is always a candidate");

    for (i, &t) in active.iter().enumerate() {
        r[t] = best.1[i] as f64 * grid_step;
    }
    Ok(RateAllocation { r, budget })
}

type Candidate = (f64, Vec<u64>);

/// Strictly smaller gap wins; on ties the lexicographically larger vector.
fn pick_earlier(lhs: Candidate, rhs: Candidate) -> Candidate {
    if rhs.0 < lhs.0 || (rhs.0 == lhs.0 && rhs.1 > lhs.1) {
        rhs
    } else {
        lhs
    }
}

struct GridSearch<'a> {
    terms: &'a [Vec<f64>],
    current: Vec<u64>,
    best: Option<Candidate>,
}

impl GridSearch<'_> {
    fn descend(&mut self, stage: usize, remaining: u64, partial: f64) {
        let last = self.terms.len() - 1;
        if stage > last {
            // Only reachable with a single active stage.
            if remaining == 0 {
                self.offer(partial);
            }
            return;
        }
        if stage == last {
            self.current[stage] = remaining;
            let total = partial + self.terms[stage][remaining as usize];
            self.offer(total);
            return;
        }
        for n in (0..=remaining).rev() {
            self.current[stage] = n;
            let next = partial + self.terms[stage][n as usize];
            self.descend(stage + 1, remaining - n, next);
        }
    }

    // Candidates arrive in decreasing lexicographic order, so only a strict
    // improvement replaces the incumbent.
    fn offer(&mut self, gap: f64) {
        match &self.best {
            Some((g, _)) if gap >= *g => {}
            _ => self.best = Some((gap, self.current.clone())),
        }
    }
}
