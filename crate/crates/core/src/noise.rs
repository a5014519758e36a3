//! How compression noise injected at one stage reaches later states.
//!
//! With the loop closed on a noisy observation `x + n_m`, the deviation
//! between the compressed and perfectly observed trajectories obeys
//!
//! ```text
//! e_{t+1} = (A_t + B F_t) e_t + B F_t n_t,    e_0 = 0
//! ```
//!
//! so `e_{t+1} = sum_{m<=t} G[t+1][m] n_m` with `G[t+1][t] = B F_t` and
//! `G[t+1][m] = (A_t + B F_t) G[t][m]` for `m < t`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alloc::RateAllocation;
use crate::error::{Error, Result};
use crate::lqr::{GainSchedule, SystemSpec};

/// Lower-triangular table of deviation gains.
///
/// Row `k` (for `k = 1..=T`) holds `G[k][m]` for `m = 0..k`. Row 0 is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationGainTable {
    rows: Vec<Vec<f64>>,
}

impl DeviationGainTable {
    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }

    /// `G[state][noise]`, or `None` when `noise >= state`.
    pub fn get(&self, state: usize, noise: usize) -> Option<f64> {
        self.rows.get(state).and_then(|row| row.get(noise)).copied()
    }

    /// Gains from every earlier noise into `x_state`.
    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }
}

/// Builds the deviation gain table for stages `0..T`.
pub fn deviation_gains(spec: &SystemSpec, gains: &GainSchedule) -> Result<DeviationGainTable> {
    spec.validate()?;
    gains.check(spec.horizon)?;
    let t_end = spec.horizon;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t_end + 1);
    rows.push(Vec::new());
    for t in 0..t_end {
        let bf = spec.b * gains.f_seq[t];
        let closed = spec.a_seq[t] + bf;
        let mut next: Vec<f64> = rows[t].iter().map(|g| closed * g).collect();
        next.push(bf);
        rows.push(next);
    }
    Ok(DeviationGainTable { rows })
}

/// Variances `sigma2[t]` of `x^(c)_t - x^(p)_t`, `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationVariances {
    pub sigma2: Vec<f64>,
}

/// Variance of the compression noise at a given rate: `c2 * 2^(-2 rate)`.
#[inline]
pub fn noise_variance(rate: f64, c2: f64) -> f64 {
    c2 * (-2.0 * rate).exp2()
}

pub fn accumulated_variance(
    table: &DeviationGainTable,
    rates: &RateAllocation,
    c2: f64,
) -> Result<DeviationVariances> {
    if !(c2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("c2 must be >= 0, got {c2}")));
    }
    let t_end = table.horizon();
    if rates.r.len() < t_end {
        return Err(Error::Dimension(format!(
            "{} rates for horizon {t_end}",
            rates.r.len()
        )));
    }
    let weights: Vec<f64> = rates.r[..t_end]
        .iter()
        .map(|&r| noise_variance(r, c2))
        .collect();
    let mut sigma2 = Vec::with_capacity(t_end + 1);
    sigma2.push(0.0);
    for k in 1..=t_end {
        let terms = table.rows[k].iter().zip(&weights).map(|(g, w)| g * g * w);
        sigma2.push(sum_terms(terms, t_end > 100));
    }
    Ok(DeviationVariances { sigma2 })
}

fn sum_terms(terms: impl Iterator<Item = f64>, compensated: bool) -> f64 {
    if !compensated {
        return terms.sum();
    }
    // Kahan
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in terms {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// One zero-mean Gaussian draw with variance `c2 * 2^(-2 rate)`.
///
/// Always consumes exactly one standard normal from `rng`, so the stream
/// position does not depend on the rate.
pub fn sample_compression_noise<R: Rng + ?Sized>(rate: f64, c2: f64, rng: &mut R) -> f64 {
    let unit: f64 = rng.sample(StandardNormal);
    noise_variance(rate, c2).sqrt() * unit
}
