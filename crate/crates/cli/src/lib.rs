//! Command-line front end. `run` parses arguments, dispatches and maps
//! errors to exit codes: 2 for invalid input, 3 for an unstable queue,
//! 4 for resonant or singular parameters, 1 for anything else.

pub mod analysis;
pub mod args;
pub mod presets;
pub mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use retrial_core::des::{simulate, Horizon, SimConfig, SimRegime};
use retrial_core::observable::{balking_mass, stationary_observable, CostAccounting};
use retrial_core::unobservable::{f_bar, mean_queue_length, mean_sojourn, optimal_arrival_rate, stationary_unobservable};
use retrial_core::{equilibrium_thresholds, Error, ModelParams, PartialParams, Result, ServerPhase, ThresholdStrategy};

use crate::analysis::{
    arrival_report, equilibrium_threshold_report, mixed_strategy_report, pso_config, threshold_optimum,
    threshold_strategy_report,
};
use crate::args::{Cli, Command, Common, ComputeArgs, FileConfig, Format, OptimizeArgs, SimulateArgs, SweepArgs};
use crate::sweep::{parse_grid, run_sweep, SweepPlan, OUTPUTS, Q_OUTPUTS};

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Unstable { .. } => 3,
        Error::ResonantF { .. } | Error::SingularD1 { .. } => 4,
        Error::Io(_) | Error::Reducible(_) => 1,
        _ => 2,
    }
}

pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> ExitCode {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

struct Context {
    file: FileConfig,
    params: PartialParams,
    seed: u64,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let params = file.params().merge(common.overrides());
        let seed = common.seed.or(file.seed).unwrap_or(0);
        Ok(Context { file, params, seed })
    }

    fn model(&self) -> Result<ModelParams> {
        self.params.build()
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Context::new(&cli.common)?;
    let out = &cli.common;
    match &cli.command {
        Command::Compute(a) => compute(&ctx, a, out),
        Command::Sweep(a) => sweep_cmd(&ctx, a, out),
        Command::Simulate(a) => simulate_cmd(&ctx, a, out),
        Command::Optimize(a) => optimize(&ctx, a, out),
    }
}

// ---------------------------------------------------------------------------
// Output

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flattens nested objects into dotted keys; arrays become `;`-joined cells.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => out.push((prefix.to_string(), items.iter().map(scalar).collect::<Vec<_>>().join(";"))),
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn write_record(value: &Value, common: &Common) -> Result<()> {
    let mut w = sink(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut pairs = Vec::new();
            flatten("", value, &mut pairs);
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(["quantity", "value"])?;
            for (k, v) in pairs {
                c.write_record([k, v])?;
            }
            c.flush()?;
        }
        Format::Text => {
            let mut pairs = Vec::new();
            flatten("", value, &mut pairs);
            let width = pairs.iter().map(|p| p.0.len()).max().unwrap_or(0);
            for (k, v) in pairs {
                let v = if v.is_empty() { "-".to_string() } else { v };
                writeln!(w, "{k:<width$}  {v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_table(header: &[String], rows: &[Vec<String>], meta: Value, common: &Common) -> Result<()> {
    let mut w = sink(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            let objs: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().cloned().zip(r.iter().map(|c| json_cell(c))).collect()))
                .collect();
            let mut doc = meta;
            doc["rows"] = Value::Array(objs);
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r)?;
            }
            c.flush()?;
        }
        Format::Text => {
            let mut pairs = Vec::new();
            flatten("", &meta, &mut pairs);
            for (k, v) in pairs {
                writeln!(w, "# {k}: {v}")?;
            }
            let widths: Vec<usize> = (0..header.len())
                .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            writeln!(w, "{}", line(header).trim_end())?;
            for r in rows {
                writeln!(w, "{}", line(r).trim_end())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn json_cell(c: &str) -> Value {
    match c.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        Ok(_) => Value::Null,
        Err(_) if c.is_empty() => Value::Null,
        Err(_) => Value::String(c.to_string()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report structs serialise")
}

// ---------------------------------------------------------------------------
// compute

fn given_threshold(a: &args::StrategyArgs, file: &FileConfig) -> Option<(usize, usize)> {
    match (a.n0.or(file.n0), a.n1.or(file.n1)) {
        (Some(n0), Some(n1)) if a.q.is_none() => Some((n0, n1)),
        _ => None,
    }
}

fn given_q(a: &args::StrategyArgs, file: &FileConfig) -> Option<f64> {
    if a.n0.is_some() {
        None
    } else {
        a.q.or(file.q)
    }
}

fn compute(ctx: &Context, a: &ComputeArgs, common: &Common) -> Result<()> {
    let params = ctx.model()?;
    let accounting: CostAccounting = a.accounting.into();
    let mut doc = json!({ "params": to_value(&params), "accounting": to_value(&accounting) });

    if let Some(q) = given_q(&a.strategy, &ctx.file) {
        doc["strategy"] = to_value(&mixed_strategy_report(&params, q, accounting)?);
    } else if let Some((n0, n1)) = given_threshold(&a.strategy, &ctx.file) {
        let s = ThresholdStrategy::new(n0, n1, params.n_policy())?;
        doc["strategy"] = to_value(&threshold_strategy_report(&params, &s, accounting)?);
    }

    doc["equilibrium_thresholds"] = to_value(&equilibrium_threshold_report(&params, accounting)?);
    if !a.no_optimum {
        let (opt, _) = threshold_optimum(&params, &pso_config(&params, ctx.seed, None, None))?;
        doc["optimal_thresholds"] = to_value(&opt);
    }
    doc["arrival_rates"] = to_value(&arrival_report(&params));
    write_record(&doc, common)
}

// ---------------------------------------------------------------------------
// optimize

fn optimize(ctx: &Context, a: &OptimizeArgs, common: &Common) -> Result<()> {
    let params = ctx.model()?;
    let mut cfg = pso_config(&params, ctx.seed, a.n0_max, a.n1_max);
    if let Some(s) = a.swarm {
        cfg.swarm_size = s;
    }
    if let Some(i) = a.iters {
        cfg.max_iters = i;
    }
    let (opt, trace) = threshold_optimum(&params, &cfg)?;
    if let Some(path) = &a.trace {
        trace.write_trace_csv(File::create(path)?)?;
    }
    let un = optimal_arrival_rate(&params);
    let doc = json!({
        "params": to_value(&params),
        "pso": {
            "swarm_size": cfg.swarm_size,
            "inertia": cfg.inertia,
            "cognitive": cfg.cognitive,
            "social": cfg.social,
            "max_iters": cfg.max_iters,
            "iterations_run": trace.trace.len(),
        },
        "optimal_thresholds": to_value(&opt),
        "optimal_arrival_rate": {
            "lambda_star": un.strategy.lambda_bar(),
            "q_star": un.strategy.q(),
            "welfare": un.welfare,
            "at_capacity": un.at_capacity,
            "all_balk": un.all_balk,
        },
    });
    write_record(&doc, common)
}

// ---------------------------------------------------------------------------
// sweep

fn sweep_cmd(ctx: &Context, a: &SweepArgs, common: &Common) -> Result<()> {
    if a.list {
        let mut w = sink(common.out.as_deref())?;
        for p in presets::presets() {
            let (l, m, t, x, n, r, c) = p.base;
            writeln!(
                w,
                "{:<4} {:<60} sweep {:<8} lambda={l} mu={m} theta={t} xi={x} N={n} R={r} C={c}",
                p.id, p.title, p.param
            )?;
        }
        return Ok(());
    }
    let (param, grid, base, default_outputs, figure) = match &a.figure {
        Some(id) => {
            let p = presets::find(id)?;
            // Preset values, then the config file, then flags.
            let base = PartialParams::from(&p.base_params()?).merge(ctx.params.clone()).build()?;
            (p.param.to_string(), p.grid.clone(), base, p.outputs.iter().map(|s| s.to_string()).collect(), Some(p.id))
        }
        None => {
            let (Some(param), Some(grid)) = (&a.param, &a.grid) else {
                return Err(Error::InvalidConfig("give --figure, or --param with --grid".into()));
            };
            let all = if param == "q" { Q_OUTPUTS } else { OUTPUTS };
            (param.clone(), parse_grid(grid)?, ctx.model()?, all.iter().map(|s| s.to_string()).collect(), None)
        }
    };
    let outputs = if a.outputs.is_empty() { default_outputs } else { a.outputs.clone() };
    let plan = SweepPlan { param, grid, base, outputs, seed: ctx.seed };
    let (header, rows) = run_sweep(&plan)?;
    let meta = json!({ "figure": figure, "swept": plan.param, "base": to_value(&plan.base), "seed": plan.seed });
    write_table(&header, &rows, meta, common)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize)]
struct Comparison {
    quantity: &'static str,
    analytic: f64,
    simulated: f64,
    std_error: f64,
    z: f64,
}

fn compare(quantity: &'static str, analytic: f64, simulated: f64, std_error: f64) -> Comparison {
    let z = if std_error > 0.0 { (simulated - analytic) / std_error } else { f64::NAN };
    Comparison { quantity, analytic, simulated, std_error, z }
}

fn simulate_cmd(ctx: &Context, a: &SimulateArgs, common: &Common) -> Result<()> {
    let params = ctx.model()?;
    let f = &ctx.file;
    let regime = if let Some(q) = given_q(&a.strategy, f) {
        SimRegime::Unobservable { q }
    } else if let Some((n0, n1)) = given_threshold(&a.strategy, f) {
        SimRegime::Observable(ThresholdStrategy::new(n0, n1, params.n_policy())?)
    } else {
        SimRegime::Observable(equilibrium_thresholds(&params)?)
    };
    let horizon = match (a.time.or(f.time), a.events.or(f.events)) {
        (Some(t), None) => Horizon::Time(t),
        (_, Some(n)) => Horizon::Events(n),
        (None, None) => Horizon::Events(1_000_000),
    };
    let cfg = SimConfig {
        horizon,
        warmup: a.warmup.or(f.warmup).unwrap_or(0.1),
        seed: ctx.seed,
        replications: a.replications.or(f.replications).unwrap_or(4),
        regime,
    };
    let est = simulate(&params, &cfg)?;
    if let Some(path) = &a.replications_csv {
        est.write_replications_csv(File::create(path)?)?;
    }
    if let Some(path) = &a.freqs_csv {
        est.write_state_freqs_csv(File::create(path)?)?;
    }
    if est.unstable {
        eprintln!(
            "warning: queue is unstable (F-bar = {:.6} >= 1); estimates describe a transient",
            match regime {
                SimRegime::Unobservable { q } => f_bar(&params, params.lambda() * q),
                SimRegime::Observable(_) => f64::NAN,
            }
        );
    }

    let se = est.std_errors;
    let mut rows = Vec::new();
    let (regime_desc, strategy) = match regime {
        SimRegime::Observable(s) => {
            let d = stationary_observable(&params, &s)?;
            let join = params.lambda() * (1.0 - balking_mass(&d, &s));
            let busy = d.phase_mass(ServerPhase::Busy);
            let (r, c) = (params.reward(), params.wait_cost());
            rows.push(compare("tv_distance", 0.0, d.tv_distance(&est.state_freqs), f64::NAN));
            rows.push(compare("mean_orbit", d.mean_orbit(), est.mean_orbit, se.mean_orbit));
            rows.push(compare("busy_probability", busy, est.busy_fraction, se.busy_fraction));
            rows.push(compare("mean_sojourn", (d.mean_orbit() + busy) / join, est.mean_sojourn, se.mean_sojourn));
            rows.push(compare("throughput", join, est.throughput, se.throughput));
            rows.push(compare("welfare", join * r - c * d.mean_orbit(), est.welfare_rate, se.welfare_rate));
            rows.push(compare(
                "welfare_system",
                join * r - c * (d.mean_orbit() + busy),
                est.welfare_rate_system,
                se.welfare_rate_system,
            ));
            ("observable", json!({ "n0": s.n0(), "n1": s.n1(), "case": s.case_tag().name() }))
        }
        SimRegime::Unobservable { q } => {
            let lb = params.lambda() * q;
            if !est.unstable && lb > 0.0 {
                let d = stationary_unobservable(&params, lb)?;
                let el = mean_queue_length(&params, lb)?;
                let ew = mean_sojourn(&params, lb)?;
                let busy = d.phase_mass(ServerPhase::Busy);
                let (r, c) = (params.reward(), params.wait_cost());
                rows.push(compare("tv_distance", 0.0, d.tv_distance(&est.state_freqs), f64::NAN));
                rows.push(compare("mean_orbit", el, est.mean_orbit, se.mean_orbit));
                rows.push(compare("busy_probability", busy, est.busy_fraction, se.busy_fraction));
                rows.push(compare("mean_orbit_wait", ew, est.mean_orbit_wait, se.mean_orbit_wait));
                rows.push(compare("mean_sojourn", ew + 1.0 / params.mu(), est.mean_sojourn, se.mean_sojourn));
                rows.push(compare("throughput", lb, est.throughput, se.throughput));
                rows.push(compare("welfare", lb * r - c * el, est.welfare_rate, se.welfare_rate));
                rows.push(compare("welfare_system", lb * r - c * (el + busy), est.welfare_rate_system, se.welfare_rate_system));
            } else {
                let nan = f64::NAN;
                rows.push(compare("mean_orbit", nan, est.mean_orbit, se.mean_orbit));
                rows.push(compare("mean_sojourn", nan, est.mean_sojourn, se.mean_sojourn));
                rows.push(compare("throughput", nan, est.throughput, se.throughput));
                rows.push(compare("welfare", nan, est.welfare_rate, se.welfare_rate));
            }
            ("unobservable", json!({ "q": q, "lambda_bar": lb }))
        }
    };

    let header: Vec<String> = ["quantity", "analytic", "simulated", "std_error", "z"].map(String::from).to_vec();
    let fmt = |v: f64| if v.is_nan() { "NaN".to_string() } else { v.to_string() };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|c| vec![c.quantity.to_string(), fmt(c.analytic), fmt(c.simulated), fmt(c.std_error), fmt(c.z)])
        .collect();
    let meta = json!({
        "regime": regime_desc,
        "strategy": strategy,
        "params": to_value(&params),
        "seed": cfg.seed,
        "replications": cfg.replications,
        "horizon": to_value(&cfg.horizon),
        "warmup": cfg.warmup,
        "unstable": est.unstable,
        "idle_races": est.idle_races,
        "idle_arrival_wins": est.idle_arrival_wins,
    });
    write_table(&header, &table, meta, common)
}
