//! Goal-oriented rate allocation for a rate-limited scalar LQR loop.
//!
//! A controller sees the plant state only through a compressed link whose
//! noise variance falls as `c2 * 2^(-2 R_t)` with the rate `R_t` spent at
//! stage `t`. This crate synthesizes the optimal gains ([`lqr`]), propagates
//! compression noise through the closed loop ([`noise`]), splits a total rate
//! budget over time to minimize the expected cost increase ([`alloc`]), and
//! checks the analytic predictions against paired Monte Carlo runs
//! ([`sim`]).

pub mod alloc;
pub mod error;
pub mod lqr;
pub mod noise;
pub mod sim;
pub mod streams;

pub use alloc::{
    closed_form_allocation, cost_coefficients, exhaustive_allocation, exhaustive_allocation_capped,
    expected_gap, uniform_allocation, unconstrained_closed_form, CostCoefficients, RateAllocation,
};
pub use error::{Error, Result};
pub use lqr::{solve_riccati, stage_cost, step_perfect, synthesize_gains, GainSchedule, SystemSpec};
pub use noise::{
    accumulated_variance, deviation_gains, sample_compression_noise, DeviationGainTable,
    DeviationVariances,
};
pub use sim::{estimate_costs, simulate_pair, CostReport, Estimate, TrajectoryPair};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
