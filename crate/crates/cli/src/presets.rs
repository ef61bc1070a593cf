//! Named sweeps for `sweep --figure`.

use retrial_core::{Error, ModelParams, Result};

#[derive(Debug, Clone)]
pub struct Preset {
    pub id: &'static str,
    pub title: &'static str,
    pub param: &'static str,
    pub grid: Vec<f64>,
    /// Fixed parameters `(λ, μ, θ, ξ, N, R, C)`; the swept one is overwritten per row.
    pub base: (f64, f64, f64, f64, i64, f64, f64),
    pub outputs: &'static [&'static str],
}

impl Preset {
    pub fn base_params(&self) -> Result<ModelParams> {
        let (l, m, t, x, n, r, c) = self.base;
        ModelParams::new(l, m, t, x, n, r, c)
    }
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).map(|v| (v * 1e9).round() / 1e9).collect()
}

const THRESH: &[&str] = &["n_star0", "n_star1", "welfare_star_obs"];
const BOTH_THRESH: &[&str] = &["n_e0", "n_e1", "n_star0", "n_star1"];
const RATES: &[&str] = &["lambda_e", "lambda_star", "class"];

/// All presets. The arrival rate is not fixed by the optimal-welfare panels
/// (10 and 13); those use λ = 3.
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            id: "6",
            title: "optimal thresholds vs N",
            param: "n_policy",
            grid: range(1.0, 25.0, 1.0),
            base: (5.0, 3.0, 5.0, 0.15, 7, 15.0, 1.0),
            outputs: THRESH,
        },
        Preset {
            id: "7",
            title: "optimal thresholds vs xi",
            param: "xi",
            grid: range(0.1, 3.0, 0.1),
            base: (5.0, 3.0, 5.0, 0.15, 7, 15.0, 1.0),
            outputs: THRESH,
        },
        Preset {
            id: "8",
            title: "equilibrium and optimal thresholds vs theta",
            param: "theta",
            grid: range(1.0, 10.0, 1.0),
            base: (3.0, 5.0, 5.0, 0.2, 3, 15.0, 1.0),
            outputs: BOTH_THRESH,
        },
        Preset {
            id: "9",
            title: "equilibrium and optimal thresholds vs mu",
            param: "mu",
            grid: range(1.0, 10.0, 1.0),
            base: (3.0, 3.0, 6.0, 1.0, 12, 23.0, 1.0),
            outputs: BOTH_THRESH,
        },
        Preset {
            id: "10a",
            title: "optimal observable welfare vs N",
            param: "n_policy",
            grid: range(1.0, 20.0, 1.0),
            base: (3.0, 3.0, 5.0, 0.1, 6, 20.0, 1.0),
            outputs: &["welfare_star_obs"],
        },
        Preset {
            id: "10b",
            title: "optimal observable welfare vs xi",
            param: "xi",
            grid: range(0.1, 3.0, 0.1),
            base: (3.0, 3.0, 5.0, 0.1, 6, 20.0, 1.0),
            outputs: &["welfare_star_obs"],
        },
        Preset {
            id: "11a",
            title: "equilibrium and optimal arrival rates vs N",
            param: "n_policy",
            grid: range(1.0, 20.0, 1.0),
            base: (3.0, 3.0, 5.0, 0.5, 3, 10.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "11b",
            title: "equilibrium and optimal arrival rates vs xi",
            param: "xi",
            grid: range(0.25, 5.0, 0.25),
            base: (5.0, 5.0, 3.0, 0.5, 6, 20.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "11c",
            title: "equilibrium and optimal arrival rates vs theta",
            param: "theta",
            grid: range(0.5, 10.0, 0.5),
            base: (5.0, 5.0, 5.0, 3.0, 6, 10.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "11d",
            title: "equilibrium and optimal arrival rates vs mu",
            param: "mu",
            grid: range(0.5, 10.0, 0.5),
            base: (3.0, 3.0, 5.0, 3.0, 3, 10.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "12a",
            title: "equilibrium and optimal arrival rates vs lambda, N = 3",
            param: "lambda",
            grid: range(0.25, 6.0, 0.25),
            base: (3.0, 3.0, 5.0, 2.0, 3, 10.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "12b",
            title: "equilibrium and optimal arrival rates vs lambda, N = 25",
            param: "lambda",
            grid: range(0.25, 6.0, 0.25),
            base: (3.0, 3.0, 5.0, 2.0, 25, 10.0, 1.0),
            outputs: RATES,
        },
        Preset {
            id: "13a",
            title: "optimal unobservable welfare vs N",
            param: "n_policy",
            grid: range(1.0, 20.0, 1.0),
            base: (3.0, 3.0, 5.0, 0.1, 6, 20.0, 1.0),
            outputs: &["welfare_star_un"],
        },
        Preset {
            id: "13b",
            title: "optimal unobservable welfare vs xi",
            param: "xi",
            grid: range(0.1, 3.0, 0.1),
            base: (3.0, 3.0, 5.0, 0.1, 6, 20.0, 1.0),
            outputs: &["welfare_star_un"],
        },
        Preset {
            id: "14a",
            title: "equilibrium welfare under both information levels vs lambda",
            param: "lambda",
            grid: range(0.05, 6.0, 0.05),
            base: (1.0, 3.0, 5.0, 0.2, 6, 20.0, 1.0),
            outputs: &["welfare_e_obs", "welfare_e_un"],
        },
        Preset {
            id: "14b",
            title: "optimal welfare under both information levels vs lambda",
            param: "lambda",
            grid: range(0.05, 6.0, 0.05),
            base: (1.0, 3.0, 5.0, 0.2, 6, 20.0, 1.0),
            outputs: &["welfare_star_obs", "welfare_star_un"],
        },
    ]
}

/// Looks up a preset; a bare panel number such as `10` means its panel `a`.
pub fn find(id: &str) -> Result<Preset> {
    let all = presets();
    let want = id.trim().to_ascii_lowercase();
    all.iter()
        .find(|p| p.id == want)
        .or_else(|| all.iter().find(|p| p.id == format!("{want}a")))
        .cloned()
        .ok_or_else(|| {
            let ids: Vec<&str> = all.iter().map(|p| p.id).collect();
            Error::InvalidConfig(format!("unknown preset `{id}`; choose one of {}", ids.join(", ")))
        })
}
