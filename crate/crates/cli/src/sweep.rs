//! Parameter sweeps: one row per grid value, failures become NaN with a reason.

use rayon::prelude::*;

use retrial_core::observable::CostAccounting;
use retrial_core::{Error, ModelParams, Result};

use crate::analysis::{
    arrival_report, equilibrium_threshold_report, mixed_strategy_report, pso_config, threshold_optimum, ArrivalReport,
    EquilibriumThresholdReport, OptimumReport,
};

/// Columns available for model-parameter sweeps.
pub const OUTPUTS: &[&str] = &[
    "n_e0",
    "n_e1",
    "welfare_e_obs",
    "n_star0",
    "n_star1",
    "welfare_star_obs",
    "class",
    "lambda_e",
    "q_e",
    "welfare_e_un",
    "lambda_star",
    "q_star",
    "welfare_star_un",
];

/// Columns available when sweeping the joining probability `q`.
pub const Q_OUTPUTS: &[&str] = &["lambda_bar", "mean_orbit_un", "mean_sojourn_un", "welfare_un"];

pub const SWEEPABLE: &[&str] = &["lambda", "mu", "theta", "xi", "n_policy", "reward", "wait_cost", "q"];

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub param: String,
    pub grid: Vec<f64>,
    pub base: ModelParams,
    pub outputs: Vec<String>,
    pub seed: u64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if !SWEEPABLE.contains(&self.param.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "cannot sweep `{}`; choose one of {}",
                self.param,
                SWEEPABLE.join(", ")
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidConfig("grid must be strictly increasing".into()));
        }
        let allowed = if self.param == "q" { Q_OUTPUTS } else { OUTPUTS };
        for o in &self.outputs {
            if !allowed.contains(&o.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown output `{o}` for this sweep; choose from {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Parses `start:stop:step` or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(num).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

#[derive(Default)]
struct RowCache {
    eq: Option<std::result::Result<EquilibriumThresholdReport, Error>>,
    opt: Option<std::result::Result<OptimumReport, Error>>,
    arr: Option<ArrivalReport>,
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

fn row_for(plan: &SweepPlan, value: f64) -> Vec<String> {
    let nan_row = |reason: String| {
        let mut r = vec![cell(value)];
        r.extend(plan.outputs.iter().map(|_| "NaN".to_string()));
        r.push(reason);
        r
    };
    let mut reasons: Vec<String> = Vec::new();
    let mut out = vec![cell(value)];

    if plan.param == "q" {
        let rep = match mixed_strategy_report(&plan.base, value, CostAccounting::Orbit) {
            Ok(r) => r,
            Err(e) => return nan_row(e.to_string()),
        };
        for o in &plan.outputs {
            out.push(cell(match o.as_str() {
                "lambda_bar" => rep.join_rate,
                "mean_orbit_un" => rep.mean_orbit,
                "mean_sojourn_un" => rep.mean_sojourn.unwrap_or(f64::NAN),
                _ => rep.welfare,
            }));
        }
        out.push(String::new());
        return out;
    }

    let params = match plan.base.with(&plan.param, value) {
        Ok(p) => p,
        Err(e) => return nan_row(e.to_string()),
    };
    let mut c = RowCache::default();
    for o in &plan.outputs {
        let v: std::result::Result<String, Error> = match o.as_str() {
            "n_e0" | "n_e1" | "welfare_e_obs" => {
                let r = c.eq.get_or_insert_with(|| equilibrium_threshold_report(&params, CostAccounting::Orbit));
                match r {
                    Ok(r) => {
                        if let Some(note) = &r.note {
                            if !reasons.contains(note) {
                                reasons.push(note.clone());
                            }
                        }
                        Ok(match o.as_str() {
                            "n_e0" => r.n0.map_or("NaN".into(), |v| v.to_string()),
                            "n_e1" => r.n1.map_or("NaN".into(), |v| v.to_string()),
                            _ => r.welfare.map_or("NaN".into(), cell),
                        })
                    }
                    Err(e) => Err(e.clone()),
                }
            }
            "n_star0" | "n_star1" | "welfare_star_obs" => {
                let r = c.opt.get_or_insert_with(|| {
                    threshold_optimum(&params, &pso_config(&params, plan.seed, None, None)).map(|(r, _)| r)
                });
                match r {
                    Ok(r) => Ok(match o.as_str() {
                        "n_star0" => r.n0.to_string(),
                        "n_star1" => r.n1.to_string(),
                        _ => cell(r.welfare),
                    }),
                    Err(e) => Err(e.clone()),
                }
            }
            other => {
                let a = c.arr.get_or_insert_with(|| arrival_report(&params));
                Ok(match other {
                    "class" => serde_json::to_value(a.class)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    "lambda_e" => cell(a.lambda_e),
                    "q_e" => cell(a.q_e),
                    "welfare_e_un" => cell(a.welfare_e),
                    "lambda_star" => cell(a.lambda_star),
                    "q_star" => cell(a.q_star),
                    _ => cell(a.welfare_star),
                })
            }
        };
        match v {
            Ok(s) => out.push(s),
            Err(e) => {
                out.push("NaN".into());
                let msg = e.to_string();
                if !reasons.contains(&msg) {
                    reasons.push(msg);
                }
            }
        }
    }
    out.push(reasons.join("; "));
    out
}

/// Header and rows in grid order; rows are evaluated in parallel.
pub fn run_sweep(plan: &SweepPlan) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    plan.validate()?;
    let mut header = vec![plan.param.clone()];
    header.extend(plan.outputs.iter().cloned());
    header.push("reason".into());
    let rows = plan.grid.par_iter().map(|&v| row_for(plan, v)).collect();
    Ok((header, rows))
}
