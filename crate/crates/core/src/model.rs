//! Instance parameters, server phases and chain states.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven scalars defining one instance.
///
/// Fields are private so that every value in circulation has passed
/// [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    mu: f64,
    theta: f64,
    xi: f64,
    n_policy: usize,
    reward: f64,
    wait_cost: f64,
}

impl ModelParams {
    pub fn new(
        lambda: f64,
        mu: f64,
        theta: f64,
        xi: f64,
        n_policy: i64,
        reward: f64,
        wait_cost: f64,
    ) -> Result<Self> {
        if n_policy < 1 {
            return Err(Error::BadThreshold(n_policy));
        }
        validate(ModelParams {
            lambda,
            mu,
            theta,
            xi,
            n_policy: n_policy as usize,
            reward,
            wait_cost,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn n_policy(&self) -> usize {
        self.n_policy
    }
    pub fn reward(&self) -> f64 {
        self.reward
    }
    pub fn wait_cost(&self) -> f64 {
        self.wait_cost
    }

    /// Returns a copy with one named field replaced, revalidated.
    ///
    /// Recognised names are the config keys (`lambda`, `mu`, `theta`, `xi`,
    /// `n_policy`, `reward`, `wait_cost`).
    pub fn with(&self, field: &str, value: f64) -> Result<Self> {
        let mut p = *self;
        match field {
            "lambda" => p.lambda = value,
            "mu" => p.mu = value,
            "theta" => p.theta = value,
            "xi" => p.xi = value,
            "reward" => p.reward = value,
            "wait_cost" => p.wait_cost = value,
            "n_policy" => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::BadThreshold(value as i64));
                }
                p.n_policy = value as usize;
            }
            other => return Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
        validate(p)
    }

    /// Loads a flat TOML file with all seven keys.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        PartialParams::from_toml_file(path)?.build()
    }
}

/// Checks every invariant and hands the parameters back unchanged.
pub fn validate(params: ModelParams) -> Result<ModelParams> {
    let rates = [
        ("lambda", params.lambda),
        ("mu", params.mu),
        ("theta", params.theta),
        ("xi", params.xi),
        ("reward", params.reward),
        ("wait_cost", params.wait_cost),
    ];
    for (field, value) in rates {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositiveRate { field, value });
        }
    }
    if params.n_policy < 1 {
        return Err(Error::BadThreshold(params.n_policy as i64));
    }
    let bound = params.wait_cost / params.mu;
    if params.reward <= bound {
        return Err(Error::RewardTooSmall { reward: params.reward, bound });
    }
    Ok(params)
}

/// Parameters as read from a config file or command line, possibly incomplete.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub n_policy: Option<i64>,
    pub reward: Option<f64>,
    pub wait_cost: Option<f64>,
}

impl PartialParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: PartialParams) -> PartialParams {
        PartialParams {
            lambda: other.lambda.or(self.lambda),
            mu: other.mu.or(self.mu),
            theta: other.theta.or(self.theta),
            xi: other.xi.or(self.xi),
            n_policy: other.n_policy.or(self.n_policy),
            reward: other.reward.or(self.reward),
            wait_cost: other.wait_cost.or(self.wait_cost),
        }
    }

    pub fn build(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.lambda.ok_or(Error::MissingKey("lambda"))?,
            self.mu.ok_or(Error::MissingKey("mu"))?,
            self.theta.ok_or(Error::MissingKey("theta"))?,
            self.xi.ok_or(Error::MissingKey("xi"))?,
            self.n_policy.ok_or(Error::MissingKey("n_policy"))?,
            self.reward.ok_or(Error::MissingKey("reward"))?,
            self.wait_cost.ok_or(Error::MissingKey("wait_cost"))?,
        )
    }
}

impl From<&ModelParams> for PartialParams {
    fn from(p: &ModelParams) -> Self {
        PartialParams {
            lambda: Some(p.lambda),
            mu: Some(p.mu),
            theta: Some(p.theta),
            xi: Some(p.xi),
            n_policy: Some(p.n_policy as i64),
            reward: Some(p.reward),
            wait_cost: Some(p.wait_cost),
        }
    }
}

/// Server phase with the integer coding 0 = vacation, 1 = busy, 2 = idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerPhase {
    Vacation = 0,
    Busy = 1,
    Idle = 2,
}

impl ServerPhase {
    pub const ALL: [ServerPhase; 3] = [ServerPhase::Vacation, ServerPhase::Busy, ServerPhase::Idle];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ServerPhase::Vacation => "vacation",
            ServerPhase::Busy => "busy",
            ServerPhase::Idle => "idle",
        }
    }
}

impl fmt::Display for ServerPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ServerPhase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" | "vacation" => Ok(ServerPhase::Vacation),
            "1" | "busy" => Ok(ServerPhase::Busy),
            "2" | "idle" => Ok(ServerPhase::Idle),
            _ => Err(Error::InvalidState(format!("unknown phase `{s}`"))),
        }
    }
}

/// A (phase, orbit length) pair. The idle server always has a non-empty orbit.
///
/// States order by orbit first and phase second, which is the level order of
/// the block-structured generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SystemState {
    phase: ServerPhase,
    orbit: usize,
}

impl SystemState {
    pub fn new(phase: ServerPhase, orbit: usize) -> Result<Self> {
        if phase == ServerPhase::Idle && orbit == 0 {
            return Err(Error::InvalidState("(idle, 0) is unreachable".into()));
        }
        Ok(SystemState { phase, orbit })
    }

    pub(crate) const fn raw(phase: ServerPhase, orbit: usize) -> Self {
        SystemState { phase, orbit }
    }

    pub fn phase(&self) -> ServerPhase {
        self.phase
    }

    pub fn orbit(&self) -> usize {
        self.orbit
    }
}

impl Ord for SystemState {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.orbit, self.phase).cmp(&(other.orbit, other.phase))
    }
}

impl PartialOrd for SystemState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.phase.code(), self.orbit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_base_accepted() {
        assert!(ModelParams::new(5.0, 3.0, 5.0, 0.15, 7, 15.0, 1.0).is_ok());
    }

    #[test]
    fn reward_boundary_rejected() {
        let e = ModelParams::new(1.0, 2.0, 1.0, 1.0, 1, 0.5, 1.0).unwrap_err();
        assert!(matches!(e, Error::RewardTooSmall { .. }));
    }

    #[test]
    fn zero_policy_rejected() {
        let e = ModelParams::new(1.0, 2.0, 1.0, 1.0, 0, 5.0, 1.0).unwrap_err();
        assert_eq!(e, Error::BadThreshold(0));
    }

    #[test]
    fn non_positive_rates_rejected() {
        let e = ModelParams::new(1.0, 2.0, -1.0, 1.0, 1, 5.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveRate { field: "theta", .. }));
        let e = ModelParams::new(f64::NAN, 2.0, 1.0, 1.0, 1, 5.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveRate { field: "lambda", .. }));
    }

    #[test]
    fn idle_empty_orbit_rejected() {
        assert!(SystemState::new(ServerPhase::Idle, 0).is_err());
        assert!(SystemState::new(ServerPhase::Idle, 1).is_ok());
        assert!(SystemState::new(ServerPhase::Vacation, 0).is_ok());
    }

    #[test]
    fn states_order_by_orbit_then_phase() {
        let a = SystemState::raw(ServerPhase::Idle, 1);
        let b = SystemState::raw(ServerPhase::Vacation, 2);
        let c = SystemState::raw(ServerPhase::Busy, 2);
        assert!(a < b && b < c);
    }

    #[test]
    fn config_parsing() {
        let text = "lambda = 5\nmu = 3.0\ntheta = 5.0\nxi = 0.15\nn_policy = 7\nreward = 15.0\nwait_cost = 1.0\n";
        let p = PartialParams::from_toml_str(text).unwrap().build().unwrap();
        assert_eq!(p.xi(), 0.15);
        assert_eq!(p.n_policy(), 7);

        let missing = PartialParams::from_toml_str("lambda = 1.0").unwrap().build();
        assert_eq!(missing.unwrap_err(), Error::MissingKey("mu"));

        assert!(PartialParams::from_toml_str("lambda = 1.0\nrho = 2.0").is_err());
    }

    #[test]
    fn merge_prefers_override() {
        let base = PartialParams { lambda: Some(1.0), mu: Some(2.0), ..Default::default() };
        let over = PartialParams { mu: Some(4.0), ..Default::default() };
        let m = base.merge(over);
        assert_eq!(m.lambda, Some(1.0));
        assert_eq!(m.mu, Some(4.0));
    }

    #[test]
    fn with_revalidates() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 1.0, 1, 5.0, 1.0).unwrap();
        assert_eq!(p.with("n_policy", 4.0).unwrap().n_policy(), 4);
        assert!(p.with("reward", 0.1).is_err());
        assert!(p.with("n_policy", 2.5).is_err());
        assert!(p.with("bogus", 1.0).is_err());
    }
}
