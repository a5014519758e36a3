//! Paired Monte Carlo simulation of the perfectly observed and rate-limited
//! loops.
//!
//! Both loops see the same disturbance draws, so the per-replication cost
//! difference isolates the effect of compression noise. Replication `r` uses
//! [`ReplicationStreams::new(master_seed, r)`](ReplicationStreams) and the
//! reduction runs in replication order, which makes every report
//! bit-reproducible regardless of thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::alloc::{cost_coefficients, expected_gap, RateAllocation};
use crate::error::{Error, Result};
use crate::lqr::{stage_cost, GainSchedule, SystemSpec};
use crate::noise::{deviation_gains, noise_variance, sample_compression_noise};
use crate::streams::ReplicationStreams;

/// One replication of both loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub x_p: Vec<f64>,
    pub u_p: Vec<f64>,
    pub x_c: Vec<f64>,
    pub u_c: Vec<f64>,
    pub n_c: Vec<f64>,
    pub z: Vec<f64>,
}

impl TrajectoryPair {
    /// `x_c[t] - x_p[t]` for `t = 0..=T`.
    pub fn deviation(&self) -> Vec<f64> {
        self.x_c.iter().zip(&self.x_p).map(|(c, p)| c - p).collect()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// Average-stage cost of the perfectly observed loop.
    pub j_p: Estimate,
    /// Average-stage cost of the rate-limited loop.
    pub j_c: Estimate,
    /// Paired estimate of `j_c - j_p`.
    pub excess: Estimate,
    /// `(j_c - j_p) / j_p`, delta-method standard error.
    pub j_rcost: Estimate,
    /// Predicted `j_c - j_p`, i.e. the expected gap divided by `T`.
    pub analytic_gap: f64,
    pub replications: u64,
    pub master_seed: u64,
}

fn check_dims(spec: &SystemSpec, gains: &GainSchedule, alloc: &RateAllocation) -> Result<()> {
    spec.validate()?;
    gains.check(spec.horizon)?;
    if alloc.r.len() != spec.horizon + 1 {
        return Err(Error::Dimension(format!(
            "{} rates for horizon {}",
            alloc.r.len(),
            spec.horizon
        )));
    }
    alloc.check()
}

fn disturbance(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let unit: f64 = rng.sample(StandardNormal);
    sd * unit
}

/// Runs both loops once from `x0`, drawing disturbances and compression
/// noise from `streams`.
pub fn simulate_pair(
    spec: &SystemSpec,
    gains: &GainSchedule,
    alloc: &RateAllocation,
    streams: &mut ReplicationStreams,
) -> Result<TrajectoryPair> {
    check_dims(spec, gains, alloc)?;
    let t_end = spec.horizon;
    let z_sd = spec.sigma_z2.sqrt();
    let mut pair = TrajectoryPair {
        x_p: Vec::with_capacity(t_end + 1),
        u_p: Vec::with_capacity(t_end),
        x_c: Vec::with_capacity(t_end + 1),
        u_c: Vec::with_capacity(t_end),
        n_c: Vec::with_capacity(t_end),
        z: Vec::with_capacity(t_end),
    };
    let (mut xp, mut xc) = (spec.x0, spec.x0);
    pair.x_p.push(xp);
    pair.x_c.push(xc);
    for t in 0..t_end {
        let f = gains.f_seq[t];
        let a = spec.a_seq[t];
        let z = disturbance(&mut streams.disturbance, z_sd);
        let n = sample_compression_noise(alloc.r[t], spec.c2, &mut streams.noise);
        let up = f * xp;
        let uc = f * (xc + n);
        xp = a * xp + spec.b * up + z;
        xc = a * xc + spec.b * uc + z;
        pair.u_p.push(up);
        pair.u_c.push(uc);
        pair.n_c.push(n);
        pair.z.push(z);
        pair.x_p.push(xp);
        pair.x_c.push(xc);
    }
    Ok(pair)
}

/// Per-replication average-stage costs: the perfect loop followed by one
/// rate-limited loop per noise scale set. All loops share the same draws.
fn replicate_costs(
    spec: &SystemSpec,
    gains: &GainSchedule,
    noise_sd: &[Vec<f64>],
    streams: &mut ReplicationStreams,
    out: &mut Vec<f64>,
) {
    let t_end = spec.horizon;
    let z_sd = spec.sigma_z2.sqrt();
    let k = noise_sd.len();
    let mut xp = spec.x0;
    let mut xc = vec![spec.x0; k];
    let mut cp = 0.0;
    let mut cc = vec![0.0; k];
    for t in 0..t_end {
        let f = gains.f_seq[t];
        let a = spec.a_seq[t];
        let z = disturbance(&mut streams.disturbance, z_sd);
        let unit: f64 = streams.noise.sample(StandardNormal);
        let up = f * xp;
        cp += stage_cost(xp, up, spec);
        xp = a * xp + spec.b * up + z;
        for j in 0..k {
            let uc = f * (xc[j] + noise_sd[j][t] * unit);
            cc[j] += stage_cost(xc[j], uc, spec);
            xc[j] = a * xc[j] + spec.b * uc + z;
        }
    }
    let horizon = t_end as f64;
    out.clear();
    out.push(cp / horizon);
    out.extend(cc.iter().map(|c| c / horizon));
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    Estimate {
        mean,
        se: (ss / (nf - 1.0) / nf).sqrt(),
    }
}

/// Ratio `num_mean / den_mean` with a delta-method standard error, from paired
/// samples.
fn ratio(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len();
    let num_est = mean_se(num.iter().copied(), n);
    let den_mean = den.iter().sum::<f64>() / n as f64;
    if den_mean == 0.0 {
        let mean = if num_est.mean == 0.0 { 0.0 } else { f64::INFINITY };
        return Estimate { mean, se: 0.0 };
    }
    let rho = num_est.mean / den_mean;
    let lin = num.iter().zip(den).map(move |(x, y)| x - rho * y);
    let spread = mean_se(lin, n).se;
    Estimate {
        mean: rho,
        se: spread / den_mean.abs(),
    }
}

/// Raw per-replication samples: row `r` holds `[J_p, J_c(alloc_0), ...]`.
struct Samples {
    width: usize,
    data: Vec<f64>,
    replications: usize,
}

impl Samples {
    fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.data.iter().skip(j).step_by(self.width).copied()
    }

    fn excess(&self, j: usize) -> Vec<f64> {
        self.column(j + 1).zip(self.column(0)).map(|(c, p)| c - p).collect()
    }
}

fn run_replications(
    spec: &SystemSpec,
    gains: &GainSchedule,
    allocs: &[&RateAllocation],
    replications: u64,
    master_seed: u64,
) -> Result<Samples> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    for alloc in allocs {
        check_dims(spec, gains, alloc)?;
    }
    let noise_sd: Vec<Vec<f64>> = allocs
        .iter()
        .map(|a| a.r.iter().map(|&r| noise_variance(r, spec.c2).sqrt()).collect())
        .collect();
    let width = allocs.len() + 1;
    const CHUNK: u64 = 4096;
    let chunks: Vec<Vec<f64>> = (0..replications.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(replications);
            let mut block = Vec::with_capacity((hi - lo) as usize * width);
            let mut row = Vec::with_capacity(width);
            for r in lo..hi {
                let mut streams = ReplicationStreams::new(master_seed, r);
                replicate_costs(spec, gains, &noise_sd, &mut streams, &mut row);
                block.extend_from_slice(&row);
            }
            block
        })
        .collect();
    Ok(Samples {
        width,
        data: chunks.concat(),
        replications: replications as usize,
    })
}

fn report(
    samples: &Samples,
    j: usize,
    analytic_gap: f64,
    replications: u64,
    master_seed: u64,
) -> CostReport {
    let n = samples.replications;
    let perfect: Vec<f64> = samples.column(0).collect();
    let excess = samples.excess(j);
    CostReport {
        j_p: mean_se(perfect.iter().copied(), n),
        j_c: mean_se(samples.column(j + 1), n),
        excess: mean_se(excess.iter().copied(), n),
        j_rcost: ratio(&excess, &perfect),
        analytic_gap,
        replications,
        master_seed,
    }
}

fn analytic_gap(spec: &SystemSpec, gains: &GainSchedule, alloc: &RateAllocation) -> Result<f64> {
    let table = deviation_gains(spec, gains)?;
    let coeffs = cost_coefficients(spec, gains, &table)?;
    Ok(expected_gap(&coeffs, alloc)? / spec.horizon as f64)
}

/// Monte Carlo estimates of both loops' average-stage costs under `alloc`.
pub fn estimate_costs(
    spec: &SystemSpec,
    gains: &GainSchedule,
    alloc: &RateAllocation,
    replications: u64,
    master_seed: u64,
) -> Result<CostReport> {
    let samples = run_replications(spec, gains, &[alloc], replications, master_seed)?;
    let gap = analytic_gap(spec, gains, alloc)?;
    Ok(report(&samples, 0, gap, replications, master_seed))
}

/// Two allocations evaluated on the same disturbance and noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationComparison {
    pub first: CostReport,
    pub second: CostReport,
    /// Paired estimate of `j_rcost(second) - j_rcost(first)`.
    pub rcost_advantage: Estimate,
}

/// Runs both allocations on common random numbers. `rcost_advantage` is
/// positive when `first` achieves the lower relative cost.
pub fn compare_allocations(
    spec: &SystemSpec,
    gains: &GainSchedule,
    first: &RateAllocation,
    second: &RateAllocation,
    replications: u64,
    master_seed: u64,
) -> Result<AllocationComparison> {
    let samples = run_replications(spec, gains, &[first, second], replications, master_seed)?;
    let perfect: Vec<f64> = samples.column(0).collect();
    let diff: Vec<f64> = samples
        .column(2)
        .zip(samples.column(1))
        .map(|(second, first)| second - first)
        .collect();
    Ok(AllocationComparison {
        first: report(&samples, 0, analytic_gap(spec, gains, first)?, replications, master_seed),
        second: report(&samples, 1, analytic_gap(spec, gains, second)?, replications, master_seed),
        rcost_advantage: ratio(&diff, &perfect),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::uniform_allocation;
    use crate::lqr::synthesize_gains;

    fn spec() -> SystemSpec {
        SystemSpec::constant(1.4, 1.0, 2.0, 5.0, 6).x0(10.0).sigma_z2(1.0).c2(4.0)
    }

    #[test]
    fn no_compression_means_identical_paths() {
        let spec = spec().c2(0.0);
        let gains = synthesize_gains(&spec).unwrap();
        let alloc = uniform_allocation(3.0, 6).unwrap();
        let pair = simulate_pair(&spec, &gains, &alloc, &mut ReplicationStreams::new(1, 0)).unwrap();
        assert_eq!(pair.x_c, pair.x_p);
        assert_eq!(pair.u_c, pair.u_p);
        let report = estimate_costs(&spec, &gains, &alloc, 500, 9).unwrap();
        assert_eq!(report.j_rcost.mean, 0.0);
        assert_eq!(report.excess.mean, 0.0);
    }

    #[test]
    fn noiseless_geometric_decay() {
        let spec = SystemSpec::constant(1.0, 1.0, 2.0, 5.0, 5).x0(3.0);
        let gains = GainSchedule::constant(-0.5, 5);
        let alloc = uniform_allocation(0.0, 5).unwrap();
        let pair = simulate_pair(&spec, &gains, &alloc, &mut ReplicationStreams::new(4, 2)).unwrap();
        for t in 0..=5 {
            assert_eq!(pair.x_p[t], 3.0 * 0.5f64.powi(t as i32));
        }
    }

    #[test]
    fn trajectory_shapes_and_invariants() {
        let spec = spec();
        let gains = synthesize_gains(&spec).unwrap();
        let alloc = uniform_allocation(3.0, 6).unwrap();
        let pair = simulate_pair(&spec, &gains, &alloc, &mut ReplicationStreams::new(3, 8)).unwrap();
        assert_eq!(pair.x_p.len(), 7);
        assert_eq!(pair.x_c.len(), 7);
        assert_eq!(pair.u_c.len(), 6);
        assert_eq!(pair.n_c.len(), 6);
        assert_eq!(pair.x_c[0], spec.x0);
        assert_eq!(pair.x_p[0], spec.x0);
        for t in 0..6 {
            assert_eq!(pair.u_c[t], gains.f_seq[t] * (pair.x_c[t] + pair.n_c[t]));
        }
    }

    #[test]
    fn replicated_costs_agree_with_simulate_pair() {
        let spec = spec();
        let gains = synthesize_gains(&spec).unwrap();
        let alloc = uniform_allocation(3.0, 6).unwrap();
        let pair = simulate_pair(&spec, &gains, &alloc, &mut ReplicationStreams::new(5, 0)).unwrap();
        let cost = |x: &[f64], u: &[f64]| {
            (0..6).map(|t| stage_cost(x[t], u[t], &spec)).sum::<f64>() / 6.0
        };
        let report = estimate_costs(&spec, &gains, &alloc, 1, 5).unwrap();
        assert_eq!(report.j_p.mean, cost(&pair.x_p, &pair.u_p));
        assert_eq!(report.j_c.mean, cost(&pair.x_c, &pair.u_c));
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = spec();
        let gains = synthesize_gains(&spec).unwrap();
        let alloc = uniform_allocation(3.0, 6).unwrap();
        let a = estimate_costs(&spec, &gains, &alloc, 10_000, 77).unwrap();
        let b = estimate_costs(&spec, &gains, &alloc, 10_000, 77).unwrap();
        assert_eq!(a, b);
        let c = estimate_costs(&spec, &gains, &alloc, 10_000, 78).unwrap();
        assert_ne!(a.j_c.mean, c.j_c.mean);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = spec();
        let gains = synthesize_gains(&spec).unwrap();
        let alloc = uniform_allocation(3.0, 6).unwrap();
        assert!(estimate_costs(&spec, &gains, &alloc, 0, 1).is_err());
        let short = uniform_allocation(3.0, 5).unwrap();
        assert!(estimate_costs(&spec, &gains, &short, 10, 1).is_err());
    }
}
