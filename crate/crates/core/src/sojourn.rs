//! Expected residual sojourn times seen by an arrival and the resulting
//! equilibrium balking thresholds for the observable queue.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ServerPhase};

/// Time cost of each customer ahead in the orbit, `(λ+θ+μ)/(μθ)`.
pub fn orbit_slope(params: &ModelParams) -> f64 {
    let (l, m, t) = (params.lambda(), params.mu(), params.theta());
    (l + t + m) / (m * t)
}

/// Expected time an arrival that joins at position `n` spends in the system.
///
/// In vacation the formula only holds once the N-policy trigger is met, so
/// `n ≥ N` is required there.
pub fn sojourn_time(params: &ModelParams, phase: ServerPhase, n: usize) -> Result<f64> {
    let s = orbit_slope(params);
    let nf = n as f64;
    match phase {
        ServerPhase::Vacation => {
            let min = params.n_policy();
            if n < min {
                return Err(Error::OutOfDomain { phase: "vacation", n, min });
            }
            Ok(1.0 / params.xi() + nf * s)
        }
        ServerPhase::Busy => Ok(nf * s + 1.0 / params.mu()),
        ServerPhase::Idle => {
            if n < 1 {
                return Err(Error::OutOfDomain { phase: "idle", n, min: 1 });
            }
            Ok(nf * s)
        }
    }
}

/// Tabulated `T(i, n)` for `n ≤ max_orbit`; entries outside a phase's domain are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct SojournTable {
    rows: [Vec<Option<f64>>; 3],
}

impl SojournTable {
    pub fn new(params: &ModelParams, max_orbit: usize) -> Self {
        let row = |phase| (0..=max_orbit).map(|n| sojourn_time(params, phase, n).ok()).collect();
        SojournTable {
            rows: [row(ServerPhase::Vacation), row(ServerPhase::Busy), row(ServerPhase::Idle)],
        }
    }

    pub fn get(&self, phase: ServerPhase, n: usize) -> Option<f64> {
        self.rows[phase.code()].get(n).copied().flatten()
    }

    pub fn max_orbit(&self) -> usize {
        self.rows[0].len() - 1
    }
}

/// Which of the three orderings of `(n0, n1)` relative to `N-1` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    /// `N-1 ≤ n0 ≤ n1`
    Case1,
    /// `N-1 ≤ n1 ≤ n0`
    Case2,
    /// `n1 < N-1 ≤ n0`
    Case3,
    /// Not a threshold strategy: the unobservable chain.
    Unobservable,
}

impl CaseTag {
    pub fn name(self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case3 => "case3",
            CaseTag::Unobservable => "unobservable",
        }
    }

    fn admits(self, n0: usize, n1: usize, n_policy: usize) -> bool {
        let floor = n_policy - 1;
        match self {
            CaseTag::Case1 => floor <= n0 && n0 <= n1,
            CaseTag::Case2 => floor <= n1 && n1 <= n0,
            CaseTag::Case3 => n1 < floor && floor <= n0,
            CaseTag::Unobservable => false,
        }
    }
}

/// Pure threshold strategy: join in vacation iff the orbit holds at most `n0`,
/// join while busy iff it holds at most `n1`. Idle arrivals always join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ThresholdStrategy {
    n0: usize,
    n1: usize,
    n_policy: usize,
    case_tag: CaseTag,
}

impl ThresholdStrategy {
    /// Builds a strategy, picking the case from the ordering. When `n0 = n1`
    /// both Case 1 and Case 2 apply and Case 1 is chosen.
    pub fn new(n0: usize, n1: usize, n_policy: usize) -> Result<Self> {
        let case = if n0 + 1 < n_policy {
            return Err(Error::DegenerateThreshold { n0: n0 as i64, floor: n_policy - 1 });
        } else if n0 <= n1 {
            CaseTag::Case1
        } else if n1 + 1 >= n_policy {
            CaseTag::Case2
        } else {
            CaseTag::Case3
        };
        Ok(ThresholdStrategy { n0, n1, n_policy, case_tag: case })
    }

    /// Builds a strategy with an explicit case, rejecting a mismatched ordering.
    pub fn with_case(n0: usize, n1: usize, n_policy: usize, case: CaseTag) -> Result<Self> {
        if n_policy == 0 || !case.admits(n0, n1, n_policy) {
            return Err(Error::CaseMismatch { n0, n1, n_policy, expected: case.name() });
        }
        Ok(ThresholdStrategy { n0, n1, n_policy, case_tag: case })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n_policy(&self) -> usize {
        self.n_policy
    }
    pub fn case_tag(&self) -> CaseTag {
        self.case_tag
    }

    /// Largest orbit length reachable under the strategy.
    pub fn max_orbit(&self) -> usize {
        self.n0.max(self.n1) + 1
    }

    /// Whether an arrival finding `(phase, n)` joins.
    pub fn joins(&self, phase: ServerPhase, n: usize) -> bool {
        match phase {
            ServerPhase::Vacation => n <= self.n0,
            ServerPhase::Busy => n <= self.n1,
            ServerPhase::Idle => true,
        }
    }
}

/// Floor that tolerates a few ulps of noise when the argument sits on an integer.
fn tie_floor(x: f64) -> i64 {
    (x + 1e-12 * x.abs().max(1.0)).floor() as i64
}

/// Unrounded equilibrium thresholds `(x0, x1)` before taking floors.
pub fn threshold_values(params: &ModelParams) -> (f64, f64) {
    let k = 1.0 / orbit_slope(params);
    let rc = params.reward() / params.wait_cost();
    (k * (rc - 1.0 / params.xi()), k * (rc - 1.0 / params.mu()))
}

/// Individually optimal thresholds: an arrival joins while `R ≥ C·T(i, n)`.
///
/// A vacation threshold below `N-1` would stop the server from ever waking
/// and is reported as [`Error::DegenerateThreshold`].
pub fn equilibrium_thresholds(params: &ModelParams) -> Result<ThresholdStrategy> {
    let (x0, x1) = threshold_values(params);
    let n0 = tie_floor(x0);
    let n1 = tie_floor(x1).max(0);
    let floor = params.n_policy() - 1;
    if n0 < floor as i64 {
        return Err(Error::DegenerateThreshold { n0, floor });
    }
    ThresholdStrategy::new(n0 as usize, n1 as usize, params.n_policy())
}
