//! Discrete-event simulation of the queue at customer level.
//!
//! The simulator keeps an explicit FCFS orbit of customers and advances by
//! competing exponential clocks: the time to the next event is exponential
//! in the total rate and the winner is drawn in proportion to the rates.
//! Nothing here reuses the analytic code, so its estimates are an
//! independent check on it.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ServerPhase, SystemState};
use crate::sojourn::ThresholdStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Horizon {
    /// Number of clock events per replication.
    Events(u64),
    /// Simulated time per replication.
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SimRegime {
    /// Arrivals see the state and follow the threshold strategy.
    Observable(ThresholdStrategy),
    /// Each arrival joins with probability `q`, blind to the state.
    Unobservable { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: Horizon,
    /// Leading fraction of the horizon discarded before collecting statistics.
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
    pub regime: SimRegime,
}

impl SimConfig {
    /// 10⁶ events, 10% warmup, seed 0, four replications.
    pub fn new(regime: SimRegime) -> Self {
        SimConfig { horizon: Horizon::Events(1_000_000), warmup: 0.1, seed: 0, replications: 4, regime }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(0.0..=0.5).contains(&self.warmup) {
            return Err(Error::OutOfRange { field: "warmup", value: self.warmup, lo: 0.0, hi: 0.5 });
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        match self.horizon {
            Horizon::Events(0) => return Err(Error::InvalidConfig("event horizon must be positive".into())),
            Horizon::Time(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::InvalidConfig("time horizon must be positive".into()))
            }
            _ => {}
        }
        match self.regime {
            SimRegime::Unobservable { q } if !(0.0..=1.0).contains(&q) => {
                Err(Error::OutOfRange { field: "q", value: q, lo: 0.0, hi: 1.0 })
            }
            SimRegime::Observable(s) if s.n_policy() != params.n_policy() => Err(Error::InvalidConfig(
                format!("strategy built for N={} but params have N={}", s.n_policy(), params.n_policy()),
            )),
            _ => Ok(()),
        }
    }
}

/// Estimates from one replication, over its post-warmup window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationEstimate {
    pub replication: usize,
    pub observed_time: f64,
    pub events: u64,
    #[serde(skip)]
    pub state_freqs: BTreeMap<SystemState, f64>,
    /// Time-average orbit length.
    pub mean_orbit: f64,
    /// Fraction of time the server is busy.
    pub busy_fraction: f64,
    /// Mean time from arrival to departure of joining customers.
    pub mean_sojourn: f64,
    /// Mean time from arrival to start of service of joining customers.
    pub mean_orbit_wait: f64,
    pub completed: u64,
    /// Departures per unit time.
    pub throughput: f64,
    /// Joining arrivals per unit time.
    pub join_rate: f64,
    /// `R·throughput − C·mean_orbit`.
    pub welfare_rate: f64,
    /// `R·throughput − C·(mean_orbit + busy_fraction)`.
    pub welfare_rate_system: f64,
    /// Events that ended an idle period, and how many of those were arrivals.
    pub idle_races: u64,
    pub idle_arrival_wins: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StdErrors {
    pub mean_orbit: f64,
    pub busy_fraction: f64,
    pub mean_sojourn: f64,
    pub mean_orbit_wait: f64,
    pub throughput: f64,
    pub join_rate: f64,
    pub welfare_rate: f64,
    pub welfare_rate_system: f64,
}

/// Estimates averaged over replications; standard errors are across
/// replications (`NaN` with a single replication).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimates {
    #[serde(skip)]
    pub state_freqs: BTreeMap<SystemState, f64>,
    pub mean_orbit: f64,
    pub busy_fraction: f64,
    pub mean_sojourn: f64,
    pub mean_orbit_wait: f64,
    pub throughput: f64,
    pub join_rate: f64,
    pub welfare_rate: f64,
    pub welfare_rate_system: f64,
    pub std_errors: StdErrors,
    pub idle_races: u64,
    pub idle_arrival_wins: u64,
    /// The unobservable regime was run with `F̄ ≥ 1`; no steady state exists.
    pub unstable: bool,
    pub replications: Vec<ReplicationEstimate>,
}

impl SimEstimates {
    /// Writes one row per replication.
    pub fn write_replications_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.replications {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the merged state frequencies as `phase,orbit,frequency`.
    pub fn write_state_freqs_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phase", "orbit", "frequency"])?;
        for (s, f) in &self.state_freqs {
            w.write_record([s.phase().code().to_string(), s.orbit().to_string(), format!("{f:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Customer {
    id: u64,
    arrival: f64,
    /// Times at which the customer entered the tagged (phase, position).
    entries: Vec<f64>,
}

#[derive(Debug, Default)]
struct RunOutput {
    estimate: Option<ReplicationEstimate>,
    tagged_residuals: Vec<f64>,
}

struct Sim<'a> {
    params: &'a ModelParams,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    tag: Option<(ServerPhase, usize)>,
}

impl Sim<'_> {
    fn joins(&mut self, phase: ServerPhase, orbit: usize) -> bool {
        match self.config.regime {
            SimRegime::Observable(s) => s.joins(phase, orbit),
            SimRegime::Unobservable { q } => q >= 1.0 || (q > 0.0 && self.rng.random::<f64>() < q),
        }
    }

    fn run(mut self, replication: usize) -> RunOutput {
        let (lam, mu, theta, xi) = (self.params.lambda(), self.params.mu(), self.params.theta(), self.params.xi());
        let big_n = self.params.n_policy();
        let (max_events, max_time) = match self.config.horizon {
            Horizon::Events(n) => (n, f64::INFINITY),
            Horizon::Time(t) => (u64::MAX, t),
        };
        let warm_events = match self.config.horizon {
            Horizon::Events(n) => (n as f64 * self.config.warmup).round() as u64,
            Horizon::Time(_) => 0,
        };
        let warm_time = match self.config.horizon {
            Horizon::Time(t) => t * self.config.warmup,
            Horizon::Events(_) => 0.0,
        };

        let mut phase = ServerPhase::Vacation;
        let mut orbit: VecDeque<Customer> = VecDeque::new();
        let mut in_service: Option<Customer> = None;
        let mut now = 0.0;
        let mut events = 0u64;
        let mut warm_at: Option<f64> = None;

        let mut occupancy: Vec<[f64; 3]> = Vec::new();
        let mut orbit_area = 0.0;
        let mut busy_time = 0.0;
        let (mut completed, mut joined, mut served) = (0u64, 0u64, 0u64);
        let (mut sojourn_sum, mut wait_sum, mut wait_count) = (0.0, 0.0, 0u64);
        let (mut idle_races, mut idle_wins) = (0u64, 0u64);
        let mut residuals = Vec::new();

        let tag = self.tag;
        let mut next_id = 0u64;
        let tagged_now = |phase: ServerPhase, orbit: &VecDeque<Customer>, svc: &Option<Customer>| -> Option<u64> {
            let (tp, pos) = tag?;
            if phase != tp {
                return None;
            }
            if pos == 0 {
                svc.as_ref().map(|c| c.id)
            } else {
                orbit.get(pos - 1).map(|c| c.id)
            }
        };

        loop {
            if events >= max_events {
                break;
            }
            if warm_at.is_none() && (events >= warm_events && now >= warm_time) {
                warm_at = Some(now);
            }
            let n = orbit.len();
            let other = match phase {
                ServerPhase::Vacation => xi,
                ServerPhase::Busy => mu,
                ServerPhase::Idle => theta,
            };
            let total = lam + other;
            let e: f64 = Exp1.sample(&mut self.rng);
            let mut dt = e / total;
            // Clocks are memoryless, so stopping at a boundary and redrawing is exact.
            let past_end = now + dt >= max_time;
            let at_warmup = warm_at.is_none() && now < warm_time && now + dt >= warm_time;
            if past_end {
                dt = max_time - now;
            } else if at_warmup {
                dt = warm_time - now;
            }
            if warm_at.is_some() {
                if occupancy.len() <= n {
                    occupancy.resize(n + 1, [0.0; 3]);
                }
                occupancy[n][phase.code()] += dt;
                orbit_area += n as f64 * dt;
                if phase == ServerPhase::Busy {
                    busy_time += dt;
                }
            }
            now += dt;
            if past_end {
                break;
            }
            if at_warmup {
                continue;
            }
            events += 1;

            let before = tagged_now(phase, &orbit, &in_service);
            let observing = warm_at.is_some();
            let is_arrival = self.rng.random::<f64>() * total < lam;
            if phase == ServerPhase::Idle && observing {
                idle_races += 1;
                if is_arrival {
                    idle_wins += 1;
                }
            }
            if is_arrival {
                if self.joins(phase, n) {
                    if observing {
                        joined += 1;
                    }
                    next_id += 1;
                    let c = Customer { id: next_id, arrival: now, entries: Vec::new() };
                    match phase {
                        ServerPhase::Idle => {
                            if observing {
                                wait_count += 1;
                            }
                            in_service = Some(c);
                            phase = ServerPhase::Busy;
                        }
                        _ => orbit.push_back(c),
                    }
                }
            } else {
                match phase {
                    ServerPhase::Vacation => {
                        if n >= big_n {
                            phase = ServerPhase::Idle;
                        }
                    }
                    ServerPhase::Busy => {
                        let c = in_service.take().expect("busy server holds a customer");
                        if c.arrival >= warm_at.unwrap_or(f64::INFINITY) {
                            completed += 1;
                            sojourn_sum += now - c.arrival;
                        }
                        if observing {
                            served += 1;
                        }
                        if !c.entries.is_empty() {
                            let lo = warm_at.unwrap_or(f64::INFINITY);
                            residuals.extend(c.entries.iter().filter(|&&t| t >= lo).map(|t| now - t));
                        }
                        phase = if orbit.is_empty() { ServerPhase::Vacation } else { ServerPhase::Idle };
                    }
                    ServerPhase::Idle => {
                        let c = orbit.pop_front().expect("idle server has a non-empty orbit");
                        if c.arrival >= warm_at.unwrap_or(f64::INFINITY) {
                            wait_sum += now - c.arrival;
                            wait_count += 1;
                        }
                        in_service = Some(c);
                        phase = ServerPhase::Busy;
                    }
                }
            }
            if let Some((_, pos)) = tag {
                let after = tagged_now(phase, &orbit, &in_service);
                if let Some(id) = after {
                    if before != Some(id) {
                        let c = if pos == 0 { in_service.as_mut() } else { orbit.get_mut(pos - 1) };
                        if let Some(c) = c {
                            c.entries.push(now);
                        }
                    }
                }
            }
        }

        let Some(start) = warm_at else {
            return RunOutput::default();
        };
        let span = now - start;
        if span <= 0.0 {
            return RunOutput::default();
        }
        let mut freqs = BTreeMap::new();
        for (n, row) in occupancy.iter().enumerate() {
            for phase in ServerPhase::ALL {
                let t = row[phase.code()];
                if t > 0.0 {
                    freqs.insert(SystemState::raw(phase, n), t / span);
                }
            }
        }
        let (r, c) = (self.params.reward(), self.params.wait_cost());
        let throughput = served as f64 / span;
        let mean_orbit = orbit_area / span;
        let busy_fraction = busy_time / span;
        RunOutput {
            estimate: Some(ReplicationEstimate {
                replication,
                observed_time: span,
                events,
                state_freqs: freqs,
                mean_orbit,
                busy_fraction,
                mean_sojourn: if completed > 0 { sojourn_sum / completed as f64 } else { f64::NAN },
                mean_orbit_wait: if wait_count > 0 { wait_sum / wait_count as f64 } else { f64::NAN },
                completed,
                throughput,
                join_rate: joined as f64 / span,
                welfare_rate: r * throughput - c * mean_orbit,
                welfare_rate_system: r * throughput - c * (mean_orbit + busy_fraction),
                idle_races,
                idle_arrival_wins: idle_wins,
            }),
            tagged_residuals: residuals,
        }
    }
}

fn rng_for(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

fn run_all(params: &ModelParams, config: &SimConfig, tag: Option<(ServerPhase, usize)>) -> Vec<RunOutput> {
    (0..config.replications)
        .into_par_iter()
        .map(|i| Sim { params, config, rng: rng_for(config.seed, i), tag }.run(i))
        .collect()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Runs all replications and merges them.
///
/// An unobservable run with `F̄ ≥ 1` still returns estimates, flagged as `unstable`.
pub fn simulate(params: &ModelParams, config: &SimConfig) -> Result<SimEstimates> {
    config.validate(params)?;
    let reps: Vec<ReplicationEstimate> =
        run_all(params, config, None).into_iter().filter_map(|r| r.estimate).collect();
    if reps.is_empty() {
        return Err(Error::InvalidConfig("horizon too short to observe anything after warmup".into()));
    }
    let unstable = match config.regime {
        SimRegime::Unobservable { q } => {
            let l = params.lambda() * q;
            l * (l + params.theta()) / (params.theta() * params.mu()) >= 1.0
        }
        SimRegime::Observable(_) => false,
    };

    let mut state_freqs = BTreeMap::new();
    let k = reps.len() as f64;
    for r in &reps {
        for (s, f) in &r.state_freqs {
            *state_freqs.entry(*s).or_insert(0.0) += f / k;
        }
    }
    let col = |f: fn(&ReplicationEstimate) -> f64| mean_se(&reps.iter().map(f).collect::<Vec<_>>());
    let (mean_orbit, se_orbit) = col(|r| r.mean_orbit);
    let (busy_fraction, se_busy) = col(|r| r.busy_fraction);
    let (mean_sojourn, se_sojourn) = col(|r| r.mean_sojourn);
    let (mean_orbit_wait, se_wait) = col(|r| r.mean_orbit_wait);
    let (throughput, se_thr) = col(|r| r.throughput);
    let (join_rate, se_join) = col(|r| r.join_rate);
    let (welfare_rate, se_w) = col(|r| r.welfare_rate);
    let (welfare_rate_system, se_ws) = col(|r| r.welfare_rate_system);
    Ok(SimEstimates {
        state_freqs,
        mean_orbit,
        busy_fraction,
        mean_sojourn,
        mean_orbit_wait,
        throughput,
        join_rate,
        welfare_rate,
        welfare_rate_system,
        std_errors: StdErrors {
            mean_orbit: se_orbit,
            busy_fraction: se_busy,
            mean_sojourn: se_sojourn,
            mean_orbit_wait: se_wait,
            throughput: se_thr,
            join_rate: se_join,
            welfare_rate: se_w,
            welfare_rate_system: se_ws,
        },
        idle_races: reps.iter().map(|r| r.idle_races).sum(),
        idle_arrival_wins: reps.iter().map(|r| r.idle_arrival_wins).sum(),
        unstable,
        replications: reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SojournEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Mean remaining time in system of a customer from the moment it occupies
/// position `n` while the server is in `phase`.
///
/// Position 0 means the customer is in service; position `n ≥ 1` means it
/// is `n`-th in the orbit. Every entry into the tagged pair contributes a
/// sample.
pub fn estimate_sojourn_by_state(
    params: &ModelParams,
    config: &SimConfig,
    tagged: SystemState,
) -> Result<SojournEstimate> {
    config.validate(params)?;
    if tagged.orbit() == 0 && tagged.phase() != ServerPhase::Busy {
        return Err(Error::InvalidState("position 0 exists only while busy".into()));
    }
    let runs = run_all(params, config, Some((tagged.phase(), tagged.orbit())));
    let per_rep: Vec<Vec<f64>> = runs.into_iter().map(|r| r.tagged_residuals).collect();
    let samples: usize = per_rep.iter().map(Vec::len).sum();
    const NEED: usize = 1000;
    if samples < NEED {
        return Err(Error::InsufficientSamples { got: samples, need: NEED });
    }
    let all: Vec<f64> = per_rep.iter().flatten().copied().collect();
    let mean = all.iter().sum::<f64>() / samples as f64;
    let rep_means: Vec<f64> =
        per_rep.iter().filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let std_error = if rep_means.len() >= 2 {
        mean_se(&rep_means).1
    } else {
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
        (var / samples as f64).sqrt()
    };
    Ok(SojournEstimate { mean, std_error, samples })
}
