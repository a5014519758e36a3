//! Scalar finite-horizon LQR: plant description, backward Riccati gain
//! synthesis and stage costs.
//!
//! Gains carry their own sign, so the control law is `u_t = F_t * x_t` and a
//! stabilizing gain is negative when `A_t * B > 0`.

use crate::error::{Error, Result};

/// Scalar plant with a possibly time-varying state coefficient.
///
/// `a_seq[t]` drives the transition from `x_t` to `x_{t+1}` for
/// `t = 0..horizon`. States exist for `t = 0..=horizon`, stage costs are
/// charged for `t = 0..horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub a_seq: Vec<f64>,
    pub b: f64,
    pub q: f64,
    pub d: f64,
    pub horizon: usize,
    pub x0: f64,
    pub sigma_z2: f64,
    pub c2: f64,
    /// Riccati seed `P_T`. Only shapes the gains; no terminal cost is charged.
    pub terminal_weight: f64,
}

impl SystemSpec {
    /// Time-invariant plant with `terminal_weight = q`.
    pub fn constant(a: f64, b: f64, q: f64, d: f64, horizon: usize) -> Self {
        Self {
            a_seq: vec![a; horizon],
            b,
            q,
            d,
            horizon,
            x0: 0.0,
            sigma_z2: 0.0,
            c2: 0.0,
            terminal_weight: q,
        }
    }

    /// Plant whose coefficient is `a1` before stage `t_jump` and `a2` from it on.
    pub fn with_jump(a1: f64, a2: f64, t_jump: usize, b: f64, q: f64, d: f64, horizon: usize) -> Self {
        let mut spec = Self::constant(a1, b, q, d, horizon);
        for a in spec.a_seq.iter_mut().skip(t_jump) {
            *a = a2;
        }
        spec
    }

    pub fn x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn sigma_z2(mut self, sigma_z2: f64) -> Self {
        self.sigma_z2 = sigma_z2;
        self
    }

    pub fn c2(mut self, c2: f64) -> Self {
        self.c2 = c2;
        self
    }

    pub fn terminal_weight(mut self, w: f64) -> Self {
        self.terminal_weight = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if !(self.q > 0.0) {
            return bad(format!("state weight q must be > 0, got {}", self.q));
        }
        if !(self.d > 0.0) {
            return bad(format!("control weight d must be > 0, got {}", self.d));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.a_seq.len() != self.horizon {
            return bad(format!(
                "a_seq has {} entries for horizon {}",
                self.a_seq.len(),
                self.horizon
            ));
        }
        if !(self.sigma_z2 >= 0.0) {
            return bad(format!("sigma_z2 must be >= 0, got {}", self.sigma_z2));
        }
        if !(self.c2 >= 0.0) {
            return bad(format!("c2 must be >= 0, got {}", self.c2));
        }
        if !(self.terminal_weight >= 0.0) {
            return bad(format!(
                "terminal_weight must be >= 0, got {}",
                self.terminal_weight
            ));
        }
        let finite = self.a_seq.iter().all(|a| a.is_finite())
            && [self.b, self.q, self.d, self.x0, self.sigma_z2, self.c2, self.terminal_weight]
                .iter()
                .all(|v| v.is_finite());
        if !finite {
            return bad("all coefficients must be finite".into());
        }
        Ok(())
    }
}

/// Feedback gains `F_0..=F_T`; `F_T` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub f_seq: Vec<f64>,
}

impl GainSchedule {
    /// Same gain `f` at every costed stage, `F_T = 0`.
    pub fn constant(f: f64, horizon: usize) -> Self {
        let mut f_seq = vec![f; horizon + 1];
        f_seq[horizon] = 0.0;
        Self { f_seq }
    }

    pub fn horizon(&self) -> usize {
        self.f_seq.len().saturating_sub(1)
    }

    pub fn gain(&self, t: usize) -> f64 {
        self.f_seq[t]
    }

    /// Checks length and the `F_T = 0` invariant against a horizon.
    pub fn check(&self, horizon: usize) -> Result<()> {
        if self.f_seq.len() != horizon + 1 {
            return Err(Error::GainLength {
                expected: horizon + 1,
                got: self.f_seq.len(),
            });
        }
        let last = self.f_seq[horizon];
        if last != 0.0 {
            return Err(Error::TerminalGain(last));
        }
        Ok(())
    }
}

/// Gains together with the cost-to-go sequence `P_0..=P_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub gains: GainSchedule,
    pub cost_to_go: Vec<f64>,
}

pub fn solve_riccati(spec: &SystemSpec) -> Result<RiccatiSolution> {
    spec.validate()?;
    let t_end = spec.horizon;
    let b = spec.b;
    let mut p = vec![0.0; t_end + 1];
    let mut f = vec![0.0; t_end + 1];
    p[t_end] = spec.terminal_weight;
    for t in (0..t_end).rev() {
        let a = spec.a_seq[t];
        let p_next = p[t + 1];
        let denom = spec.d + b * b * p_next;
        if !(denom > 0.0) {
            return Err(Error::RiccatiDenominator {
                stage: t,
                value: denom,
            });
        }
        let cross = a * b * p_next;
        f[t] = -cross / denom;
        // Q + A^2 P - (A B P)^2 / (D + B^2 P), folded so it stays >= Q in floating point.
        p[t] = spec.q + a * a * p_next * spec.d / denom;
    }
    Ok(RiccatiSolution {
        gains: GainSchedule { f_seq: f },
        cost_to_go: p,
    })
}

/// Optimal finite-horizon gains by backward Riccati recursion seeded with
/// `P_T = terminal_weight`.
pub fn synthesize_gains(spec: &SystemSpec) -> Result<GainSchedule> {
    solve_riccati(spec).map(|s| s.gains)
}

#[inline]
pub fn stage_cost(x: f64, u: f64, spec: &SystemSpec) -> f64 {
    spec.q * x * x + spec.d * u * u
}

/// One step of the perfectly observed loop. Returns `(x_next, u)`.
pub fn step_perfect(
    x: f64,
    t: usize,
    z: f64,
    spec: &SystemSpec,
    gains: &GainSchedule,
) -> Result<(f64, f64)> {
    if t >= spec.horizon || t >= gains.f_seq.len() {
        return Err(Error::StageOutOfRange {
            index: t,
            horizon: spec.horizon,
        });
    }
    let u = gains.f_seq[t] * x;
    Ok((spec.a_seq[t] * x + spec.b * u + z, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_stage() -> SystemSpec {
        SystemSpec::constant(1.0, 1.0, 2.0, 5.0, 2)
    }

    #[test]
    fn single_stage_without_terminal_weight_has_zero_gain() {
        let spec = SystemSpec::constant(1.7, -0.3, 2.0, 5.0, 1).terminal_weight(0.0);
        let g = synthesize_gains(&spec).unwrap();
        assert_eq!(g.f_seq, vec![0.0, 0.0]);
    }

    #[test]
    fn two_stage_hand_unrolled() {
        // P_2 = 2: F_1 = -2/7, P_1 = 2 + 2 - 4/7 = 24/7, F_0 = -(24/7)/(5 + 24/7).
        let sol = solve_riccati(&two_stage()).unwrap();
        let f = &sol.gains.f_seq;
        assert_relative_eq!(f[1], -2.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(sol.cost_to_go[1], 24.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(f[0], -24.0 / 59.0, max_relative = 1e-15);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn zero_input_coefficient_gives_zero_gains() {
        let spec = SystemSpec::constant(2.5, 0.0, 2.0, 5.0, 6);
        let g = synthesize_gains(&spec).unwrap();
        assert!(g.f_seq.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let mut spec = two_stage();
        spec.q = 0.0;
        assert!(matches!(synthesize_gains(&spec), Err(Error::InvalidSystem(_))));
        let mut spec = two_stage();
        spec.d = -1.0;
        assert!(matches!(synthesize_gains(&spec), Err(Error::InvalidSystem(_))));
        let mut spec = two_stage();
        spec.a_seq.pop();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn stage_cost_values() {
        let spec = two_stage();
        assert_eq!(stage_cost(0.0, 0.0, &spec), 0.0);
        assert_eq!(stage_cost(1.0, 1.0, &spec), 7.0);
        assert_eq!(stage_cost(100.0, 0.0, &spec), 20000.0);
    }

    #[test]
    fn perfect_steps() {
        let spec = two_stage();
        let g = synthesize_gains(&spec).unwrap();
        assert_eq!(step_perfect(0.0, 0, 0.0, &spec, &g).unwrap(), (0.0, 0.0));

        let (x1, u) = step_perfect(100.0, 0, 0.0, &spec, &g).unwrap();
        assert_relative_eq!(u, -2400.0 / 59.0, max_relative = 1e-15);
        assert_relative_eq!(x1, 3500.0 / 59.0, max_relative = 1e-14);

        let spec = SystemSpec::constant(2.0, 1.0, 2.0, 5.0, 3);
        let zero = GainSchedule::constant(0.0, 3);
        assert_eq!(step_perfect(5.0, 1, 1.0, &spec, &zero).unwrap(), (11.0, 0.0));
        assert!(matches!(
            step_perfect(5.0, 3, 0.0, &spec, &zero),
            Err(Error::StageOutOfRange { .. })
        ));
    }

    #[test]
    fn gain_schedule_check() {
        let mut g = GainSchedule::constant(-0.5, 4);
        assert!(g.check(4).is_ok());
        assert!(matches!(g.check(3), Err(Error::GainLength { .. })));
        g.f_seq[4] = 0.1;
        assert_eq!(g.check(4), Err(Error::TerminalGain(0.1)));
    }
}
