//! Finite generators of the chain and a banded GTH stationary solver.
//!
//! The generator is assembled from the transition rules alone, with no use of
//! the closed forms, so its stationary vector serves as an independent check.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ServerPhase, SystemState};
use crate::sojourn::{CaseTag, ThresholdStrategy};

/// Which chain to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Observable queue under a threshold strategy, which must match `case`.
    Observable { case: CaseTag, strategy: ThresholdStrategy },
    /// Unobservable queue with joining rate `lambda_bar`, truncated at orbit
    /// length `cap` by blocking arrivals there.
    Unobservable { lambda_bar: f64, cap: usize },
}

/// Banded square matrix, `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn cols_of_row(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }
}

/// Generator restricted to a finite, lexicographically ordered state list.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    states: Vec<SystemState>,
    rates: BandMatrix,
    truncation_orbit: usize,
}

fn state_space(regime: &Regime) -> (Vec<SystemState>, usize) {
    let (vac_max, busy_max, idle_max) = match *regime {
        Regime::Observable { strategy, .. } => {
            let top = strategy.max_orbit();
            (strategy.n0() + 1, top, top)
        }
        Regime::Unobservable { cap, .. } => (cap, cap, cap),
    };
    let cap = vac_max.max(busy_max).max(idle_max);
    let mut states = Vec::new();
    for n in 0..=cap {
        if n <= vac_max {
            states.push(SystemState::raw(ServerPhase::Vacation, n));
        }
        if n <= busy_max {
            states.push(SystemState::raw(ServerPhase::Busy, n));
        }
        if n >= 1 && n <= idle_max {
            states.push(SystemState::raw(ServerPhase::Idle, n));
        }
    }
    (states, cap)
}

/// Outgoing transitions of `s`. Self-loops (a vacation ending below the
/// trigger, or a balking arrival) are omitted.
fn transitions(params: &ModelParams, regime: &Regime, s: SystemState) -> Vec<(SystemState, f64)> {
    let n = s.orbit();
    let big_n = params.n_policy();
    let (arrival, joins) = match *regime {
        Regime::Observable { strategy, .. } => (params.lambda(), strategy.joins(s.phase(), n)),
        Regime::Unobservable { lambda_bar, cap } => {
            (lambda_bar, s.phase() == ServerPhase::Idle || n < cap)
        }
    };
    let mut out = Vec::with_capacity(2);
    match s.phase() {
        ServerPhase::Vacation => {
            if joins {
                out.push((SystemState::raw(ServerPhase::Vacation, n + 1), arrival));
            }
            if n >= big_n {
                out.push((SystemState::raw(ServerPhase::Idle, n), params.xi()));
            }
        }
        ServerPhase::Busy => {
            if joins {
                out.push((SystemState::raw(ServerPhase::Busy, n + 1), arrival));
            }
            let after = if n == 0 {
                SystemState::raw(ServerPhase::Vacation, 0)
            } else {
                SystemState::raw(ServerPhase::Idle, n)
            };
            out.push((after, params.mu()));
        }
        ServerPhase::Idle => {
            out.push((SystemState::raw(ServerPhase::Busy, n), arrival));
            out.push((SystemState::raw(ServerPhase::Busy, n - 1), params.theta()));
        }
    }
    out
}

/// Assembles the generator for `regime`.
pub fn build_generator(params: &ModelParams, regime: Regime) -> Result<TruncatedGenerator> {
    match regime {
        Regime::Observable { case, strategy } => {
            if strategy.n_policy() != params.n_policy() {
                return Err(Error::InvalidConfig(format!(
                    "strategy built for N={} but params have N={}",
                    strategy.n_policy(),
                    params.n_policy()
                )));
            }
            // Re-check the ordering against the declared case.
            ThresholdStrategy::with_case(strategy.n0(), strategy.n1(), strategy.n_policy(), case)?;
        }
        Regime::Unobservable { lambda_bar, cap } => {
            if !(lambda_bar.is_finite() && lambda_bar >= 0.0) {
                return Err(Error::NonPositiveRate { field: "lambda_bar", value: lambda_bar });
            }
            if cap < params.n_policy() {
                return Err(Error::InvalidConfig(format!(
                    "cap {cap} below N = {}",
                    params.n_policy()
                )));
            }
        }
    }
    let (states, cap) = state_space(&regime);
    let index = |s: &SystemState| states.binary_search(s).ok();

    let mut entries = Vec::new();
    let (mut kl, mut ku) = (0usize, 0usize);
    for (i, &s) in states.iter().enumerate() {
        for (t, rate) in transitions(params, &regime, s) {
            let j = index(&t).expect("transition leaves the state space");
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
            entries.push((i, j, rate));
        }
    }
    let mut rates = BandMatrix::zeros(states.len(), kl, ku);
    for (i, j, r) in entries {
        rates.add(i, j, r);
        rates.add(i, i, -r);
    }
    Ok(TruncatedGenerator { states, rates, truncation_orbit: cap })
}

impl TruncatedGenerator {
    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn truncation_orbit(&self) -> usize {
        self.truncation_orbit
    }

    pub fn index_of(&self, s: SystemState) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    /// Rate from `from` to `to` (the diagonal when they coincide).
    pub fn rate(&self, from: SystemState, to: SystemState) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.rates.get(i, j),
            _ => 0.0,
        }
    }

    pub fn band(&self) -> &BandMatrix {
        &self.rates
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.len())
            .map(|i| self.rates.cols_of_row(i).map(|j| self.rates.get(i, j)).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Whether every state reaches and is reached from the first state.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                let lo = i.saturating_sub(self.rates.kl.max(self.rates.ku));
                let hi = (i + self.rates.kl.max(self.rates.ku) + 1).min(n);
                for j in lo..hi {
                    let r = if forward { self.rates.get(i, j) } else { self.rates.get(j, i) };
                    if j != i && r > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|b| b)
        };
        reach(true) && reach(false)
    }

    /// Largest entry of `|πQ|`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, &p) in pi.iter().enumerate() {
            for j in self.rates.cols_of_row(i) {
                out[j] += p * self.rates.get(i, j);
            }
        }
        out.into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    /// Stationary vector by the Grassmann-Taksar-Heyman elimination.
    ///
    /// The algorithm only adds and divides positive quantities, so it keeps
    /// full relative accuracy even for probabilities many orders below one.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        gth_stationary(&self.rates)
    }
}

/// GTH on a banded generator; the diagonal is never read.
pub fn gth_stationary(q: &BandMatrix) -> Result<Vec<f64>> {
    let n = q.n;
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let (kl, ku) = (q.kl, q.ku);
    let mut a = q.clone();
    let mut out_rate = vec![0.0; n];
    for k in (1..n).rev() {
        let jlo = k.saturating_sub(kl);
        let s: f64 = (jlo..k).map(|j| a.get(k, j)).sum();
        if s <= 0.0 {
            return Err(Error::Reducible(k));
        }
        out_rate[k] = s;
        let ilo = k.saturating_sub(ku);
        for i in ilo..k {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let f = aik / s;
            for j in jlo..k {
                if j == i {
                    continue;
                }
                let akj = a.get(k, j);
                if akj != 0.0 {
                    a.add(i, j, f * akj);
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let ilo = k.saturating_sub(ku);
        let inflow: f64 = (ilo..k).map(|i| pi[i] * a.get(i, k)).sum();
        pi[k] = inflow / out_rate[k];
    }
    let total = crate::numeric::compensated_sum(pi.iter().copied());
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}
