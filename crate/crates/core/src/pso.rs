//! Particle swarm maximisation, used for the socially optimal threshold pair.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observable::social_welfare_observable;
use crate::sojourn::ThresholdStrategy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub max_iters: usize,
    /// Stop after this many iterations without a global-best improvement.
    pub stagnation_limit: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl PsoConfig {
    /// Defaults: ω = 0.7, c₁ = c₂ = 1.5, 30 particles, 300 iterations.
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        PsoConfig {
            swarm_size: 30,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            max_iters: 300,
            stagnation_limit: 50,
            seed: 0,
            bounds,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.swarm_size < 2 {
            return bad("swarm_size must be at least 2");
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return bad("inertia must lie in (0, 1]");
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) {
            return bad("learning factors must be positive");
        }
        if self.bounds.is_empty() {
            return bad("bounds must have at least one dimension");
        }
        if self.bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return bad("each bound needs finite lo <= hi");
        }
        Ok(())
    }
}

/// How positions are mapped before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretizer {
    Continuous,
    /// Round each coordinate to the nearest integer.
    Round,
}

impl Discretizer {
    fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            Discretizer::Continuous => x.to_vec(),
            Discretizer::Round => x.iter().map(|v| v.round()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_value: f64,
    pub best_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoResult {
    /// Discretised global best.
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
    pub particles: Vec<ParticleState>,
}

impl PsoResult {
    /// `iteration,best_value,x0,x1,...`
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let dims = self.best_position.len();
        let mut header = vec!["iteration".to_string(), "best_value".to_string()];
        header.extend((0..dims).map(|d| format!("x{d}")));
        w.write_record(&header)?;
        for row in &self.trace {
            let mut rec = vec![row.iteration.to_string(), format!("{:.17e}", row.best_value)];
            rec.extend(row.best_position.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn reflect(x: f64, v: f64, lo: f64, hi: f64) -> (f64, f64) {
    if x < lo {
        ((lo + (lo - x)).min(hi), -v)
    } else if x > hi {
        ((hi - (x - hi)).max(lo), -v)
    } else {
        (x, v)
    }
}

/// Maximises `objective` over the box in `config`.
///
/// Infeasible points should evaluate to `f64::NEG_INFINITY`. Velocity and
/// position updates draw random numbers in a fixed serial order; the
/// evaluations of one iteration run in parallel.
pub fn pso_maximize<F>(objective: F, config: &PsoConfig, discretizer: Discretizer) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = config.bounds.len();
    let widths: Vec<f64> = config.bounds.iter().map(|(lo, hi)| hi - lo).collect();

    let eval = |xs: &[Vec<f64>]| -> Vec<f64> {
        xs.par_iter()
            .map(|x| {
                let v = objective(&discretizer.apply(x));
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect()
    };

    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(config.swarm_size);
    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(config.swarm_size);
    for _ in 0..config.swarm_size {
        let x = config.bounds.iter().map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo)).collect();
        let v = widths.iter().map(|w| (rng.random::<f64>() * 2.0 - 1.0) * 0.1 * w).collect();
        positions.push(x);
        velocities.push(v);
    }
    let values = eval(&positions);
    let mut evaluations = values.len();
    let mut particles: Vec<ParticleState> = positions
        .iter()
        .zip(&velocities)
        .zip(&values)
        .map(|((x, v), &f)| ParticleState {
            position: x.clone(),
            velocity: v.clone(),
            best_position: x.clone(),
            best_value: f,
        })
        .collect();

    let mut g_index = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_value > particles[g_index].best_value {
            g_index = i;
        }
    }
    let mut g_pos = particles[g_index].best_position.clone();
    let mut g_val = particles[g_index].best_value;
    let mut trace = vec![TraceRow { iteration: 0, best_value: g_val, best_position: discretizer.apply(&g_pos) }];

    let mut stagnant = 0;
    for iteration in 1..=config.max_iters {
        for p in particles.iter_mut() {
            for d in 0..dims {
                let (r1, r2) = (rng.random::<f64>(), rng.random::<f64>());
                let (lo, hi) = config.bounds[d];
                let mut v = config.inertia * p.velocity[d]
                    + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + config.social * r2 * (g_pos[d] - p.position[d]);
                v = v.clamp(-widths[d], widths[d]);
                let (x, v) = reflect(p.position[d] + v, v, lo, hi);
                p.position[d] = x;
                p.velocity[d] = v;
            }
        }
        let xs: Vec<Vec<f64>> = particles.iter().map(|p| p.position.clone()).collect();
        let values = eval(&xs);
        evaluations += values.len();

        let mut improved = false;
        for (p, f) in particles.iter_mut().zip(values) {
            if f > p.best_value {
                p.best_value = f;
                p.best_position = p.position.clone();
            }
            if f > g_val {
                g_val = f;
                g_pos = p.position.clone();
                improved = true;
            }
        }
        trace.push(TraceRow { iteration, best_value: g_val, best_position: discretizer.apply(&g_pos) });
        stagnant = if improved { 0 } else { stagnant + 1 };
        if stagnant >= config.stagnation_limit {
            break;
        }
    }
    if g_val == f64::NEG_INFINITY {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(PsoResult { best_position: discretizer.apply(&g_pos), best_value: g_val, trace, evaluations, particles })
}

/// Search box `n0 ∈ [N-1, max(n0_max, N-1)]`, `n1 ∈ [0, n1_max]`.
pub fn threshold_bounds(params: &ModelParams, n0_max: usize, n1_max: usize) -> Vec<(f64, f64)> {
    let floor = params.n_policy() - 1;
    vec![(floor as f64, n0_max.max(floor) as f64), (0.0, n1_max as f64)]
}

/// Default search box: up to 60 in each coordinate, widened when `N` is large.
pub fn default_threshold_bounds(params: &ModelParams) -> Vec<(f64, f64)> {
    let hi = 60.max(params.n_policy() + 20);
    threshold_bounds(params, hi, hi)
}

/// Welfare of integer thresholds, or `−∞` when they do not form a usable strategy.
pub fn threshold_objective(params: &ModelParams, n0: f64, n1: f64) -> f64 {
    if n0 < 0.0 || n1 < 0.0 {
        return f64::NEG_INFINITY;
    }
    ThresholdStrategy::new(n0 as usize, n1 as usize, params.n_policy())
        .and_then(|s| social_welfare_observable(params, &s))
        .unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdOptimum {
    pub strategy: ThresholdStrategy,
    pub welfare: f64,
}

/// PSO over integer threshold pairs.
pub fn optimize_thresholds(params: &ModelParams, config: &PsoConfig) -> Result<(ThresholdOptimum, PsoResult)> {
    if config.bounds.len() != 2 {
        return Err(Error::InvalidConfig("threshold search needs two bounds".into()));
    }
    let res = pso_maximize(|x| threshold_objective(params, x[0], x[1]), config, Discretizer::Round)?;
    let strategy = ThresholdStrategy::new(
        res.best_position[0] as usize,
        res.best_position[1] as usize,
        params.n_policy(),
    )?;
    Ok((ThresholdOptimum { strategy, welfare: res.best_value }, res))
}

/// Exhaustive search over the integer box; ties go to the smallest `(n0, n1)`.
pub fn grid_optimum(params: &ModelParams, bounds: &[(f64, f64)]) -> Result<ThresholdOptimum> {
    let floor = params.n_policy() - 1;
    let n0_lo = (bounds[0].0.ceil().max(0.0) as usize).max(floor);
    let n0_hi = bounds[0].1.floor() as usize;
    let n1_lo = bounds[1].0.ceil().max(0.0) as usize;
    let n1_hi = bounds[1].1.floor() as usize;
    let rows: Vec<(usize, usize, f64)> = (n0_lo..=n0_hi)
        .into_par_iter()
        .map(|n0| {
            let mut best = (n0, n1_lo, f64::NEG_INFINITY);
            for n1 in n1_lo..=n1_hi {
                let v = threshold_objective(params, n0 as f64, n1 as f64);
                if v > best.2 {
                    best = (n0, n1, v);
                }
            }
            best
        })
        .collect();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for r in rows {
        if r.2 > best.2 {
            best = r;
        }
    }
    if best.2 == f64::NEG_INFINITY {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(ThresholdOptimum {
        strategy: ThresholdStrategy::new(best.0, best.1, params.n_policy())?,
        welfare: best.2,
    })
}
