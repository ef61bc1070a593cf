//! Stationary distributions and social welfare of the observable queue under
//! a threshold strategy `(n0, n1)`.
//!
//! All three cases share one busy-row recursion. With `p = π₁,₀`,
//! `F = λ(λ+θ)/(θμ)` and `a = λ/(λ+ξ)`, the flow cut between orbit levels
//! `n` and `n+1` gives
//!
//! ```text
//! π₁,n+1 = F·[n ≤ n1]·π₁,n + g(n)
//! ```
//!
//! where `g` depends only on the vacation row. Summing it segment by
//! segment yields the closed forms below.

use std::io::Write;

use serde::Serialize;

use crate::distribution::StationaryDistribution;
use crate::error::{Error, Result};
use crate::generator::{build_generator, Regime};
use crate::model::{ModelParams, ServerPhase};
use crate::numeric::{power_difference, KahanSum};
use crate::sojourn::{CaseTag, ThresholdStrategy};

/// Busy-row coefficients, scaled by `π₁,₀`.
///
/// * `n ≤ N-1` (while arrivals still join): `π₁,n = A₁ + A₂Fⁿ`.
/// * `N ≤ n ≤ n0` (same condition): `π₁,n = B₂Fⁿ + D₁aⁿ`.
/// * Case 1, `n0+1 ≤ n ≤ n1+1`: `π₁,n = E₂Fⁿ`.
/// * Once busy arrivals balk below `n0+1`: `π₁,n = ψ(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseCoefficients {
    pub f: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub b2: f64,
    pub d1: f64,
    pub e2: Option<f64>,
    n_policy: usize,
    gamma: f64,
}

impl CaseCoefficients {
    /// Coefficients shared by all cases; `e2` is filled in for Case 1 distributions.
    pub fn new(params: &ModelParams) -> Result<Self> {
        let (l, m, t, x) = (params.lambda(), params.mu(), params.theta(), params.xi());
        let big_n = params.n_policy();
        let f = l * (l + t) / (t * m);
        if (f - 1.0).abs() < 1e-9 {
            return Err(Error::ResonantF { f });
        }
        let den = t * m - (l + t) * (l + x);
        if den.abs() < 1e-12 * (t * m + (l + t) * (l + x)) {
            return Err(Error::SingularD1 { denominator: den });
        }
        let a = l / (l + x);
        let a1 = m * f / (l * (1.0 - f));
        let a2 = 1.0 - a1;
        let d1 = m * (l + t + x) / den * a.powi(1 - big_n as i32);
        let busy_before = a1 + a2 * f.powi(big_n as i32 - 1);
        let b2 = (busy_before - d1 * a.powi(big_n as i32 - 1)) * f.powi(1 - big_n as i32);
        Ok(CaseCoefficients { f, a, a1, a2, b2, d1, e2: None, n_policy: big_n, gamma: l / t + a })
    }

    /// `ψ(n) = (λ/θ + a)·a^{n-N}`, the busy mass once busy arrivals balk.
    pub fn psi(&self, n: usize) -> f64 {
        self.gamma * self.a.powi(n as i32 - self.n_policy as i32)
    }

    /// Busy row through the joining run, `0 ≤ n ≤ n0`.
    fn joined_run(&self, n: usize) -> f64 {
        let big_n = self.n_policy;
        if n < big_n {
            self.a1 + self.a2 * self.f.powi(n as i32)
        } else {
            // Equals B₂Fⁿ + D₁aⁿ, evaluated without the cancellation near a = F.
            let k = (n + 1 - big_n) as u32;
            let before = self.a1 + self.a2 * self.f.powi(big_n as i32 - 1);
            self.f.powi(k as i32) * before + self.gamma * power_difference(self.f, self.a, k)
        }
    }
}

fn case_check(params: &ModelParams, strategy: &ThresholdStrategy, case: CaseTag) -> Result<()> {
    if strategy.n_policy() != params.n_policy() {
        return Err(Error::InvalidConfig(format!(
            "strategy built for N={} but params have N={}",
            strategy.n_policy(),
            params.n_policy()
        )));
    }
    ThresholdStrategy::with_case(strategy.n0(), strategy.n1(), strategy.n_policy(), case)?;
    Ok(())
}

/// Shared construction for all three cases.
fn build(params: &ModelParams, strategy: &ThresholdStrategy, case: CaseTag) -> Result<(StationaryDistribution, CaseCoefficients)> {
    case_check(params, strategy, case)?;
    let mut c = CaseCoefficients::new(params)?;
    let (l, m, t, x) = (params.lambda(), params.mu(), params.theta(), params.xi());
    let big_n = params.n_policy();
    let (n0, n1) = (strategy.n0(), strategy.n1());
    let top = strategy.max_orbit();
    let a = c.a;

    let mut vac = Vec::with_capacity(n0 + 2);
    for n in 0..=n0 + 1 {
        let v = if n < big_n {
            m / l
        } else if n <= n0 {
            m / l * a.powi((n + 1 - big_n) as i32)
        } else {
            m / x * a.powi((n0 + 1 - big_n) as i32)
        };
        vac.push(v);
    }
    let terminal = l / t * a.powi((n0 + 1 - big_n) as i32);

    let mut busy = Vec::with_capacity(top + 1);
    busy.push(1.0);
    for n in 1..=top {
        let v = if n - 1 <= n1 {
            // Every busy arrival below n joined.
            if n <= n0 {
                c.joined_run(n)
            } else {
                // n0 < n ≤ n1+1, only in Case 1.
                let at = c.f * c.joined_run(n0) + terminal;
                at * c.f.powi((n - n0 - 1) as i32)
            }
        } else if n < big_n {
            (l + t) / t
        } else if n <= n0 {
            c.psi(n)
        } else {
            terminal
        };
        busy.push(v);
    }
    if case == CaseTag::Case1 {
        let at = c.f * c.joined_run(n0) + terminal;
        c.e2 = Some(at / c.f.powi(n0 as i32 + 1));
    }

    let mut idle = vec![0.0; top + 1];
    for n in 1..=top {
        let vac_in = if n >= big_n && n <= n0 + 1 { x * vac[n] } else { 0.0 };
        idle[n] = (m * busy[n] + vac_in) / (l + t);
    }

    let mut total = KahanSum::new();
    for row in [&vac, &busy, &idle] {
        total.extend(row.iter().copied());
    }
    let pivot = 1.0 / total.value();
    let scale = |row: Vec<f64>| row.into_iter().map(|v| v * pivot).collect::<Vec<_>>();
    let dist = StationaryDistribution::finite(case, [scale(vac), scale(busy), scale(idle)], pivot);
    Ok((dist, c))
}

/// Case 1, `N-1 ≤ n0 ≤ n1`.
pub fn stationary_case1(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<StationaryDistribution> {
    Ok(build(params, strategy, CaseTag::Case1)?.0)
}

/// Case 2, `N-1 ≤ n1 ≤ n0`.
pub fn stationary_case2(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<StationaryDistribution> {
    Ok(build(params, strategy, CaseTag::Case2)?.0)
}

/// Case 3, `n1 < N-1 ≤ n0`.
pub fn stationary_case3(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<StationaryDistribution> {
    Ok(build(params, strategy, CaseTag::Case3)?.0)
}

/// Dispatches on the strategy's own case tag.
pub fn stationary_observable(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<StationaryDistribution> {
    Ok(build(params, strategy, strategy.case_tag())?.0)
}

/// Distribution together with the coefficients that produced it.
pub fn stationary_with_coefficients(
    params: &ModelParams,
    strategy: &ThresholdStrategy,
) -> Result<(StationaryDistribution, CaseCoefficients)> {
    build(params, strategy, strategy.case_tag())
}

/// How the holding cost counts customers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostAccounting {
    /// Orbit length only, as in the welfare formulas.
    #[default]
    Orbit,
    /// Orbit length plus the customer in service.
    System,
}

/// Probability that an arrival balks under `strategy`.
pub fn balking_mass(dist: &StationaryDistribution, strategy: &ThresholdStrategy) -> f64 {
    let mut s = KahanSum::new();
    for phase in [ServerPhase::Vacation, ServerPhase::Busy] {
        for n in 0..dist.explicit_len(phase) {
            if !strategy.joins(phase, n) {
                s.add(dist.prob(phase, n));
            }
        }
    }
    s.value()
}

/// Welfare rate `λR(1 − P(balk)) − C·E[cost count]` for an already solved distribution.
pub fn welfare_from_distribution(
    params: &ModelParams,
    strategy: &ThresholdStrategy,
    dist: &StationaryDistribution,
    accounting: CostAccounting,
) -> f64 {
    let reward = params.lambda() * params.reward() * (1.0 - balking_mass(dist, strategy));
    let mut count = dist.mean_orbit();
    if accounting == CostAccounting::System {
        count += dist.phase_mass(ServerPhase::Busy);
    }
    reward - params.wait_cost() * count
}

/// Social welfare rate under `strategy`, counting the orbit length.
pub fn social_welfare_observable(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<f64> {
    social_welfare_with(params, strategy, CostAccounting::Orbit)
}

pub fn social_welfare_with(
    params: &ModelParams,
    strategy: &ThresholdStrategy,
    accounting: CostAccounting,
) -> Result<f64> {
    let dist = stationary_observable(params, strategy)?;
    Ok(welfare_from_distribution(params, strategy, &dist, accounting))
}

/// Largest residual over the per-state global balance equations written
/// out directly from the transition structure.
pub fn balance_residual(params: &ModelParams, strategy: &ThresholdStrategy, dist: &StationaryDistribution) -> f64 {
    let (l, m, t, x) = (params.lambda(), params.mu(), params.theta(), params.xi());
    let big_n = params.n_policy();
    let p = |phase, n: usize| dist.prob(phase, n);
    let j0 = |n: usize| if strategy.joins(ServerPhase::Vacation, n) { 1.0 } else { 0.0 };
    let j1 = |n: usize| if strategy.joins(ServerPhase::Busy, n) { 1.0 } else { 0.0 };
    let wake = |n: usize| if n >= big_n { 1.0 } else { 0.0 };
    let (v, b, i) = (ServerPhase::Vacation, ServerPhase::Busy, ServerPhase::Idle);
    let mut worst: f64 = 0.0;
    let top = strategy.max_orbit();
    for n in 0..=top {
        if dist.in_support(v, n) {
            let out = (l * j0(n) + x * wake(n)) * p(v, n);
            let inn = if n == 0 { m * p(b, 0) } else { l * j0(n - 1) * p(v, n - 1) };
            worst = worst.max((out - inn).abs());
        }
        if dist.in_support(b, n) {
            let out = (l * j1(n) + m) * p(b, n);
            let from_below = if n == 0 { 0.0 } else { l * j1(n - 1) * p(b, n - 1) };
            let inn = from_below + l * p(i, n) + t * p(i, n + 1);
            worst = worst.max((out - inn).abs());
        }
        if dist.in_support(i, n) {
            let out = (l + t) * p(i, n);
            let inn = m * p(b, n) + x * wake(n) * p(v, n);
            worst = worst.max((out - inn).abs());
        }
    }
    worst
}

/// Stationary vector of the matching finite generator, by GTH elimination.
pub fn numeric_oracle(params: &ModelParams, strategy: &ThresholdStrategy) -> Result<StationaryDistribution> {
    let g = build_generator(params, Regime::Observable { case: strategy.case_tag(), strategy: *strategy })?;
    let pi = g.stationary()?;
    let top = strategy.max_orbit();
    let mut rows: [Vec<f64>; 3] = [vec![0.0; strategy.n0() + 2], vec![0.0; top + 1], vec![0.0; top + 1]];
    for (s, p) in g.states().iter().zip(pi) {
        rows[s.phase().code()][s.orbit()] = p;
    }
    let pivot = rows[1][0];
    Ok(StationaryDistribution::finite(strategy.case_tag(), rows, pivot))
}

/// Writes the distribution of `strategy` as `phase,orbit,probability`.
pub fn export_csv<W: Write>(params: &ModelParams, strategy: &ThresholdStrategy, writer: W) -> Result<()> {
    stationary_observable(params, strategy)?.write_csv(writer, None)
}
