use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("`{field}` must be a finite positive number, got {value}")]
    NonPositiveRate { field: &'static str, value: f64 },
    #[error("reward {reward} must exceed wait_cost/mu = {bound}")]
    RewardTooSmall { reward: f64, bound: f64 },
    #[error("n_policy must be at least 1, got {0}")]
    BadThreshold(i64),
    #[error("missing parameter `{0}`")]
    MissingKey(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("n = {n} is below the minimum {min} for phase {phase}")]
    OutOfDomain { phase: &'static str, n: usize, min: usize },
    #[error("equilibrium vacation threshold {n0} is below N-1 = {floor}")]
    DegenerateThreshold { n0: i64, floor: usize },
    #[error("strategy (n0={n0}, n1={n1}) does not satisfy the {expected} ordering for N={n_policy}")]
    CaseMismatch { n0: usize, n1: usize, n_policy: usize, expected: &'static str },
    #[error("F = lambda(lambda+theta)/(theta mu) = {f} is within 1e-9 of 1; perturb mu by about 1e-6 relative")]
    ResonantF { f: f64 },
    #[error("theta mu - (lambda+theta)(lambda+xi) = {denominator} vanishes; perturb mu by about 1e-6 relative")]
    SingularD1 { denominator: f64 },
    #[error("unstable: F-bar = lambda_bar(lambda_bar+theta)/(theta mu) = {f_bar} >= 1")]
    Unstable { f_bar: f64 },
    #[error("effective arrival rate must be positive")]
    ZeroArrival,
    #[error("{field} = {value} outside [{lo}, {hi}]")]
    OutOfRange { field: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("every evaluated position was infeasible")]
    EmptyFeasibleSet,
    #[error("only {got} tagged arrivals observed, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("generator is reducible at state index {0}")]
    Reducible(usize),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
