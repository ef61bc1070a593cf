//! Report structures shared by the subcommands.

use serde::Serialize;

use retrial_core::observable::{
    balking_mass, stationary_observable, welfare_from_distribution, CaseCoefficients, CostAccounting,
};
use retrial_core::pso::{default_threshold_bounds, grid_optimum, optimize_thresholds, threshold_bounds, PsoConfig, PsoResult};
use retrial_core::unobservable::{
    equilibrium_arrival_rate, mean_queue_length, mean_sojourn, optimal_arrival_rate, social_welfare_unobservable,
    stability_bound, stationary_unobservable, EquilibriumClass, MixedStrategy,
};
use retrial_core::{equilibrium_thresholds, Error, ModelParams, Result, ServerPhase, ThresholdStrategy};

/// Largest box edge for which the optimum is re-checked by exhaustive search.
pub const GRID_VERIFY_LIMIT: usize = 80;

#[derive(Debug, Clone, Serialize)]
pub struct OptimumReport {
    pub n0: usize,
    pub n1: usize,
    pub case: &'static str,
    pub welfare: f64,
    pub n0_max: usize,
    pub n1_max: usize,
    pub pso_seed: u64,
    pub pso_evaluations: usize,
    /// The grid was searched as well.
    pub grid_verified: bool,
    /// PSO reached the grid optimum; when it did not, the grid result is reported.
    pub pso_matched_grid: Option<bool>,
}

pub fn pso_config(params: &ModelParams, seed: u64, n0_max: Option<usize>, n1_max: Option<usize>) -> PsoConfig {
    let d = default_threshold_bounds(params);
    let bounds = threshold_bounds(
        params,
        n0_max.unwrap_or(d[0].1 as usize),
        n1_max.unwrap_or(d[1].1 as usize),
    );
    PsoConfig::new(bounds).with_seed(seed)
}

pub fn threshold_optimum(params: &ModelParams, cfg: &PsoConfig) -> Result<(OptimumReport, PsoResult)> {
    // Resonance and singularity hold for every strategy, so report them up front.
    CaseCoefficients::new(params)?;
    let (pso, trace) = optimize_thresholds(params, cfg)?;
    let (n0_max, n1_max) = (cfg.bounds[0].1 as usize, cfg.bounds[1].1 as usize);
    let mut report = OptimumReport {
        n0: pso.strategy.n0(),
        n1: pso.strategy.n1(),
        case: pso.strategy.case_tag().name(),
        welfare: pso.welfare,
        n0_max,
        n1_max,
        pso_seed: cfg.seed,
        pso_evaluations: trace.evaluations,
        grid_verified: false,
        pso_matched_grid: None,
    };
    if n0_max <= GRID_VERIFY_LIMIT && n1_max <= GRID_VERIFY_LIMIT {
        let grid = grid_optimum(params, &cfg.bounds)?;
        let matched = grid.strategy == pso.strategy || grid.welfare == pso.welfare;
        report.grid_verified = true;
        report.pso_matched_grid = Some(matched);
        if !matched {
            report.n0 = grid.strategy.n0();
            report.n1 = grid.strategy.n1();
            report.case = grid.strategy.case_tag().name();
            report.welfare = grid.welfare;
        }
    }
    Ok((report, trace))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumThresholdReport {
    pub n0: Option<usize>,
    pub n1: Option<usize>,
    pub case: Option<&'static str>,
    pub welfare: Option<f64>,
    pub note: Option<String>,
}

/// Equilibrium thresholds and their welfare. A degenerate vacation threshold
/// is reported in `note`; resonance and singularity are returned as errors.
pub fn equilibrium_threshold_report(params: &ModelParams, accounting: CostAccounting) -> Result<EquilibriumThresholdReport> {
    match equilibrium_thresholds(params) {
        Ok(s) => {
            let d = stationary_observable(params, &s)?;
            Ok(EquilibriumThresholdReport {
                n0: Some(s.n0()),
                n1: Some(s.n1()),
                case: Some(s.case_tag().name()),
                welfare: Some(welfare_from_distribution(params, &s, &d, accounting)),
                note: None,
            })
        }
        Err(e @ Error::DegenerateThreshold { .. }) => Ok(EquilibriumThresholdReport {
            n0: None,
            n1: None,
            case: None,
            welfare: None,
            note: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrivalReport {
    pub stability_bound: f64,
    pub class: EquilibriumClass,
    pub lambda_min: f64,
    pub min_sojourn: f64,
    pub equilibria: Vec<f64>,
    pub lambda_e: f64,
    pub q_e: f64,
    pub welfare_e: f64,
    pub lambda_star: f64,
    pub q_star: f64,
    pub welfare_star: f64,
    pub at_capacity: bool,
    pub all_balk: bool,
}

pub fn arrival_report(params: &ModelParams) -> ArrivalReport {
    let eq = equilibrium_arrival_rate(params);
    let opt = optimal_arrival_rate(params);
    let welfare_e = if eq.stable > 0.0 { social_welfare_unobservable(params, eq.stable).unwrap_or(f64::NAN) } else { 0.0 };
    ArrivalReport {
        stability_bound: stability_bound(params),
        class: eq.class,
        lambda_min: eq.lambda_min,
        min_sojourn: eq.min_sojourn,
        equilibria: eq.equilibria,
        lambda_e: eq.stable,
        q_e: eq.stable / params.lambda(),
        welfare_e,
        lambda_star: opt.strategy.lambda_bar(),
        q_star: opt.strategy.q(),
        welfare_star: opt.welfare,
        at_capacity: opt.at_capacity,
        all_balk: opt.all_balk,
    }
}

/// Performance of one given strategy.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub kind: &'static str,
    pub n0: Option<usize>,
    pub n1: Option<usize>,
    pub case: Option<&'static str>,
    pub q: Option<f64>,
    /// Rate of arrivals that join.
    pub join_rate: f64,
    pub mean_orbit: f64,
    pub busy_probability: f64,
    /// Mean time from arrival to departure of a joining customer.
    pub mean_sojourn: Option<f64>,
    pub welfare: f64,
}

pub fn threshold_strategy_report(
    params: &ModelParams,
    s: &ThresholdStrategy,
    accounting: CostAccounting,
) -> Result<StrategyReport> {
    let d = stationary_observable(params, s)?;
    let join = params.lambda() * (1.0 - balking_mass(&d, s));
    let busy = d.phase_mass(ServerPhase::Busy);
    Ok(StrategyReport {
        kind: "threshold",
        n0: Some(s.n0()),
        n1: Some(s.n1()),
        case: Some(s.case_tag().name()),
        q: None,
        join_rate: join,
        mean_orbit: d.mean_orbit(),
        busy_probability: busy,
        mean_sojourn: Some((d.mean_orbit() + busy) / join),
        welfare: welfare_from_distribution(params, s, &d, accounting),
    })
}

pub fn mixed_strategy_report(params: &ModelParams, q: f64, accounting: CostAccounting) -> Result<StrategyReport> {
    let m = MixedStrategy::new(params, q)?;
    let lb = m.lambda_bar();
    let el = mean_queue_length(params, lb)?;
    let busy = if lb > 0.0 { stationary_unobservable(params, lb)?.phase_mass(ServerPhase::Busy) } else { 0.0 };
    let mut welfare = social_welfare_unobservable(params, lb)?;
    if accounting == CostAccounting::System {
        welfare -= params.wait_cost() * busy;
    }
    Ok(StrategyReport {
        kind: "mixed",
        n0: None,
        n1: None,
        case: None,
        q: Some(q),
        join_rate: lb,
        mean_orbit: el,
        busy_probability: busy,
        mean_sojourn: mean_sojourn(params, lb).ok().map(|w| w + 1.0 / params.mu()),
        welfare,
    })
}
