//! Unobservable queue: arrivals join with probability `q`, so the chain is a
//! QBD with levels given by the orbit length and a matrix-geometric tail
//! from level `N` on.
//!
//! Within a level the phase order is (vacation, busy, idle). Level 0 has no
//! idle state.

use serde::Serialize;

use crate::distribution::StationaryDistribution;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{bisect, golden_min, power_difference, KahanSum};

pub type Mat3 = [[f64; 3]; 3];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] += b[i][j];
        }
    }
    c
}

pub fn identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Inverse by cofactors; `None` when singular.
pub fn mat_inverse(m: &Mat3) -> Option<Mat3> {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / det;
        }
    }
    Some(inv)
}

fn row_times(v: &[f64; 3], m: &Mat3) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = (0..3).map(|i| v[i] * m[i][j]).sum();
    }
    out
}

/// Joining probability and the induced effective arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedStrategy {
    q: f64,
    lambda_bar: f64,
}

impl MixedStrategy {
    pub fn new(params: &ModelParams, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange { field: "q", value: q, lo: 0.0, hi: 1.0 });
        }
        Ok(MixedStrategy { q, lambda_bar: params.lambda() * q })
    }

    /// Strategy inducing the effective rate `lambda_bar ∈ [0, λ]`.
    pub fn from_rate(params: &ModelParams, lambda_bar: f64) -> Result<Self> {
        let l = params.lambda();
        if !(0.0..=l).contains(&lambda_bar) {
            return Err(Error::OutOfRange { field: "lambda_bar", value: lambda_bar, lo: 0.0, hi: l });
        }
        Ok(MixedStrategy { q: lambda_bar / l, lambda_bar })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }
}

/// `F̄ = λ̄(λ̄+θ)/(θμ)`, the dominant eigenvalue of the rate matrix.
pub fn f_bar(params: &ModelParams, lambda_bar: f64) -> f64 {
    lambda_bar * (lambda_bar + params.theta()) / (params.theta() * params.mu())
}

/// Largest effective arrival rate keeping `F̄ < 1`, backed off by `1e-9`.
pub fn stability_bound(params: &ModelParams) -> f64 {
    let (t, m) = (params.theta(), params.mu());
    let root = 0.5 * (-t + (t * t + 4.0 * t * m).sqrt());
    root - 1e-9
}

fn check_stable(params: &ModelParams, lambda_bar: f64) -> Result<f64> {
    if !(lambda_bar.is_finite() && lambda_bar >= 0.0) {
        return Err(Error::NonPositiveRate { field: "lambda_bar", value: lambda_bar });
    }
    let f = f_bar(params, lambda_bar);
    if f >= 1.0 {
        return Err(Error::Unstable { f_bar: f });
    }
    Ok(f)
}

/// Generator blocks: `A0` (level up), `A1` (within a level below `N`),
/// `A2` (level down), `B1` (within a level at or above `N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbdBlocks {
    pub a0: Mat3,
    pub a1: Mat3,
    pub a2: Mat3,
    pub b1: Mat3,
}

pub fn blocks(params: &ModelParams, lambda_bar: f64) -> QbdBlocks {
    let (l, m, t, x) = (lambda_bar, params.mu(), params.theta(), params.xi());
    QbdBlocks {
        a0: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, 0.0]],
        a1: [[-l, 0.0, 0.0], [0.0, -(l + m), m], [0.0, l, -(l + t)]],
        a2: [[0.0; 3], [0.0; 3], [0.0, t, 0.0]],
        b1: [[-(l + x), 0.0, x], [0.0, -(l + m), m], [0.0, l, -(l + t)]],
    }
}

/// Minimal nonnegative solution of `R²A₂ + R B₁ + A₀ = 0`, in closed form.
pub fn rate_matrix(params: &ModelParams, lambda_bar: f64) -> Result<Mat3> {
    let f = check_stable(params, lambda_bar)?;
    let (l, m, t, x) = (lambda_bar, params.mu(), params.theta(), params.xi());
    let a = l / (l + x);
    let r12 = l * l * (l + t + x) / (t * m * (l + x));
    Ok([[a, r12, l / t], [0.0, f, l / t], [0.0, 0.0, 0.0]])
}

/// Largest absolute entry of `R²A₂ + R B₁ + A₀`.
pub fn quadratic_residual(r: &Mat3, b: &QbdBlocks) -> f64 {
    let lhs = mat_add(&mat_add(&mat_mul(&mat_mul(r, r), &b.a2), &mat_mul(r, &b.b1)), &b.a0);
    lhs.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Geometric tail `π_{N+k} = π_N R^k` of the unobservable distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdTail {
    level: usize,
    start: [f64; 3],
    rate: Mat3,
    lambda_bar: f64,
    mu: f64,
    theta: f64,
    xi: f64,
}

impl QbdTail {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn start(&self) -> [f64; 3] {
        self.start
    }

    pub fn rate_matrix(&self) -> &Mat3 {
        &self.rate
    }

    /// `(r11, r12, r13, r22, r23)` at offset `k ≥ 0`, such that
    /// `π_{N+k} = (π₀r₁₁, π₀r₁₂ + π₁r₂₂, π₀r₁₃ + π₁r₂₃)` with `π = π_N`.
    ///
    /// The idle coefficients fold in the idle balance of level `N+k`, so
    /// they are also valid at `k = 0`.
    pub fn r_entries(&self, k: usize) -> [f64; 5] {
        let (l, m, t, x) = (self.lambda_bar, self.mu, self.theta, self.xi);
        let a = self.rate[0][0];
        let f = self.rate[1][1];
        let kk = k as u32;
        let r11 = a.powi(kk as i32);
        let r22 = f.powi(kk as i32);
        let r12 = self.rate[0][1] * power_difference(f, a, kk);
        let r13 = (x * r11 + m * r12) / (l + t);
        let r23 = m * r22 / (l + t);
        [r11, r12, r13, r22, r23]
    }

    /// Probabilities of level `N+k`, phase by phase.
    pub fn level_probs(&self, k: usize) -> [f64; 3] {
        if k == 0 {
            return self.start;
        }
        let [r11, r12, r13, r22, r23] = self.r_entries(k);
        let [p0, p1, _] = self.start;
        [p0 * r11, p0 * r12 + p1 * r22, p0 * r13 + p1 * r23]
    }

    fn resolvent(&self) -> Mat3 {
        let mut i_minus_r = identity();
        for i in 0..3 {
            for j in 0..3 {
                i_minus_r[i][j] -= self.rate[i][j];
            }
        }
        mat_inverse(&i_minus_r).expect("I - R is invertible for a stable rate matrix")
    }

    /// `Σ_{k≥1} π_{N+k}` per phase.
    pub fn phase_mass_beyond_level(&self) -> [f64; 3] {
        let rr = mat_mul(&self.rate, &self.resolvent());
        row_times(&self.start, &rr)
    }

    /// `Σ_{k≥1} π_{N+k} e`.
    pub fn mass_beyond_level(&self) -> f64 {
        self.phase_mass_beyond_level().iter().sum()
    }

    /// `Σ_{k≥1} (N+k) π_{N+k} e`, from `π_N [N R(I-R)⁻¹ + R(I-R)⁻²] e`.
    pub fn orbit_moment_beyond_level(&self) -> f64 {
        let inv = self.resolvent();
        let r_inv = mat_mul(&self.rate, &inv);
        let r_inv2 = mat_mul(&r_inv, &inv);
        let n = self.level as f64;
        let a: f64 = row_times(&self.start, &r_inv).iter().sum();
        let b: f64 = row_times(&self.start, &r_inv2).iter().sum();
        n * a + b
    }

    /// Spectral radius of the rate matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.rate[0][0].max(self.rate[1][1])
    }

    /// Number of levels past `N` after which the bound `sp^k · mass(π_N)`
    /// drops below `eps`, at most 10⁴.
    pub fn levels_for_mass(&self, eps: f64) -> usize {
        let mass: f64 = self.start.iter().sum();
        let sp = self.spectral_radius();
        if mass < eps || sp == 0.0 {
            return 1;
        }
        let k = ((eps / mass).ln() / sp.ln()).ceil();
        (k.max(1.0) as usize).min(10_000)
    }
}

/// Closed-form solution of the unobservable chain at one arrival rate.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdSolution {
    lambda_bar: f64,
    rate_matrix: Mat3,
    /// Levels `0..=N`, each `[π₀,n, π₁,n, π₂,n]`.
    boundary: Vec<[f64; 3]>,
    pivot: f64,
    spectral_radius: f64,
    a1_bar: f64,
    a2_bar: f64,
    f_bar: f64,
    rho_bar: f64,
    tail: QbdTail,
}

impl QbdSolution {
    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }
    pub fn rate_matrix(&self) -> &Mat3 {
        &self.rate_matrix
    }
    pub fn boundary(&self) -> &[[f64; 3]] {
        &self.boundary
    }
    /// `π₁,₀`.
    pub fn pivot(&self) -> f64 {
        self.pivot
    }
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }
    /// Coefficients of `π₁,n = (Ā₁ + Ā₂F̄ⁿ)π₁,₀` below `N`, scaled by `π₁,₀`.
    pub fn a_coefficients(&self) -> (f64, f64) {
        (self.a1_bar, self.a2_bar)
    }
    pub fn f_bar(&self) -> f64 {
        self.f_bar
    }
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    pub fn tail(&self) -> &QbdTail {
        &self.tail
    }
    pub fn r_entries(&self, k: usize) -> [f64; 5] {
        self.tail.r_entries(k)
    }

    /// Probabilities of level `n`.
    pub fn level(&self, n: usize) -> [f64; 3] {
        if n < self.boundary.len() {
            self.boundary[n]
        } else {
            self.tail.level_probs(n - self.tail.level)
        }
    }

    /// `Σ n π_n e` from the boundary levels and the matrix tail sums.
    pub fn mean_orbit_series(&self) -> f64 {
        let mut s = KahanSum::new();
        for (n, lv) in self.boundary.iter().enumerate() {
            s.add(n as f64 * lv.iter().sum::<f64>());
        }
        s.add(self.tail.orbit_moment_beyond_level());
        s.value()
    }

    pub fn distribution(&self) -> StationaryDistribution {
        let mut rows: [Vec<f64>; 3] = Default::default();
        for lv in &self.boundary {
            for (row, &p) in rows.iter_mut().zip(lv) {
                row.push(p);
            }
        }
        StationaryDistribution::with_tail(rows, self.pivot, self.tail.clone())
    }
}

/// `π₁,₀` in closed form.
pub fn pivot_closed_form(params: &ModelParams, lambda_bar: f64) -> f64 {
    let (l, m, t, x) = (lambda_bar, params.mu(), params.theta(), params.xi());
    let n = params.n_policy() as f64;
    l * x * (t * m - l * l - l * t) / (m * m * (l + t) * (l + n * x))
}

/// Solves the unobservable chain at effective arrival rate `lambda_bar > 0`.
pub fn solve_qbd(params: &ModelParams, lambda_bar: f64) -> Result<QbdSolution> {
    let r = rate_matrix(params, lambda_bar)?;
    if lambda_bar == 0.0 {
        return Err(Error::ZeroArrival);
    }
    let (l, m, t, x) = (lambda_bar, params.mu(), params.theta(), params.xi());
    let big_n = params.n_policy();
    let f = r[1][1];
    let a1 = m * f / (l * (1.0 - f));
    let a2 = 1.0 - a1;

    // Unnormalised with π₁,₀ = 1.
    let mut boundary = Vec::with_capacity(big_n + 1);
    for n in 0..big_n {
        let busy = a1 + a2 * f.powi(n as i32);
        let idle = if n == 0 { 0.0 } else { m * busy / (l + t) };
        boundary.push([m / l, busy, idle]);
    }
    let vac_n = m / (l + x);
    let busy_n = f * boundary[big_n - 1][1] + l * (l + t + x) / (t * (l + x));
    boundary.push([vac_n, busy_n, (x * vac_n + m * busy_n) / (l + t)]);

    let mut tail = QbdTail {
        level: big_n,
        start: boundary[big_n],
        rate: r,
        lambda_bar: l,
        mu: m,
        theta: t,
        xi: x,
    };
    let mut total = KahanSum::new();
    for lv in &boundary {
        total.extend(lv.iter().copied());
    }
    total.add(tail.mass_beyond_level());
    let pivot = 1.0 / total.value();
    for lv in &mut boundary {
        for p in lv.iter_mut() {
            *p *= pivot;
        }
    }
    tail.start = boundary[big_n];
    Ok(QbdSolution {
        lambda_bar: l,
        rate_matrix: r,
        boundary,
        pivot,
        spectral_radius: tail.spectral_radius(),
        a1_bar: a1,
        a2_bar: a2,
        f_bar: f,
        rho_bar: l / m,
        tail,
    })
}

pub fn stationary_unobservable(params: &ModelParams, lambda_bar: f64) -> Result<StationaryDistribution> {
    Ok(solve_qbd(params, lambda_bar)?.distribution())
}

/// Orbit length at which the truncated oracle chain is cut: the tail bound
/// `sp(R)^(m-N) · mass(π_N)` falls below `1e-12`, at most 10⁴.
pub fn truncation_cap(params: &ModelParams, lambda_bar: f64) -> Result<usize> {
    let sol = solve_qbd(params, lambda_bar)?;
    Ok((params.n_policy() + sol.tail.levels_for_mass(1e-12)).min(10_000))
}

/// Mean orbit length `E[L]`.
pub fn mean_queue_length(params: &ModelParams, lambda_bar: f64) -> Result<f64> {
    let f = check_stable(params, lambda_bar)?;
    if lambda_bar == 0.0 {
        return Ok(0.0);
    }
    let (l, m, t, x) = (lambda_bar, params.mu(), params.theta(), params.xi());
    let n = params.n_policy() as f64;
    Ok(l / x - l / m + l / (l + t) + f / (1.0 - f) + n * (n - 1.0) * x / (2.0 * (l + n * x)))
}

/// Terms of `E[W] = E[L]/λ̄`, with first and second derivatives in `λ̄`.
fn sojourn_terms(params: &ModelParams, l: f64) -> [f64; 3] {
    let (m, t, x) = (params.mu(), params.theta(), params.xi());
    let n = params.n_policy() as f64;
    let k = 0.5 * n * (n - 1.0) * x;

    let u = l + t;
    let w0 = 1.0 / x - 1.0 / m + 1.0 / u;
    let w1 = -1.0 / (u * u);
    let w2 = 2.0 / (u * u * u);

    // (λ̄+θ)/(θμ − λ̄(λ̄+θ))
    let v = t * m - l * u;
    let dv = -(2.0 * l + t);
    let s0 = u / v;
    let num = v - u * dv;
    let s1 = num / (v * v);
    let s2 = 2.0 * (u * v - num * dv) / (v * v * v);

    // K/(λ̄(λ̄+Nξ))
    let (h0, h1, h2) = if k == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        let h = l * (l + n * x);
        let dh = 2.0 * l + n * x;
        (k / h, -k * dh / (h * h), k * (2.0 * dh * dh - 2.0 * h) / (h * h * h))
    };
    [w0 + s0 + h0, w1 + s1 + h1, w2 + s2 + h2]
}

/// Mean time in orbit `E[W] = E[L]/λ̄` of a joining customer.
pub fn mean_sojourn(params: &ModelParams, lambda_bar: f64) -> Result<f64> {
    check_stable(params, lambda_bar)?;
    if lambda_bar == 0.0 {
        return Err(Error::ZeroArrival);
    }
    Ok(sojourn_terms(params, lambda_bar)[0])
}

/// `(E[W], E[W]', E[W]'')` in `λ̄`.
pub fn mean_sojourn_derivatives(params: &ModelParams, lambda_bar: f64) -> Result<(f64, f64, f64)> {
    check_stable(params, lambda_bar)?;
    if lambda_bar == 0.0 {
        return Err(Error::ZeroArrival);
    }
    let [w, w1, w2] = sojourn_terms(params, lambda_bar);
    Ok((w, w1, w2))
}

/// Social welfare rate `U_s(λ̄) = λ̄R − C·E[L]`.
pub fn social_welfare_unobservable(params: &ModelParams, lambda_bar: f64) -> Result<f64> {
    let el = mean_queue_length(params, lambda_bar)?;
    Ok(lambda_bar * params.reward() - params.wait_cost() * el)
}

/// `(U_s, U_s', U_s'')` in `λ̄ > 0`.
pub fn welfare_derivatives(params: &ModelParams, lambda_bar: f64) -> Result<(f64, f64, f64)> {
    let (w, w1, w2) = mean_sojourn_derivatives(params, lambda_bar)?;
    let (r, c, l) = (params.reward(), params.wait_cost(), lambda_bar);
    Ok((l * (r - c * w), r - c * (w + l * w1), -c * (2.0 * w1 + l * w2)))
}

/// Net benefit `R − C·E[W]` of an arrival that joins; `−∞` when undefined.
fn net_benefit(params: &ModelParams, lambda_bar: f64) -> f64 {
    match mean_sojourn(params, lambda_bar) {
        Ok(w) => params.reward() - params.wait_cost() * w,
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumClass {
    /// `R < C·min E[W]`: joining never pays.
    NoPositive,
    /// `R = C·min E[W]`: the benefit curve touches zero at its maximum.
    Tangent,
    /// `R > C·min E[W]`: the benefit curve crosses zero on both sides of its maximum
    /// (only on the right when it is already positive near `λ̄ = 0`).
    Crossing,
}

/// Equilibrium joining rates of the unobservable game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalEquilibrium {
    pub class: EquilibriumClass,
    /// Minimiser of `E[W]` on the stable interval.
    pub lambda_min: f64,
    pub min_sojourn: f64,
    /// Lower root of `R = C·E[W]`, if any.
    pub lambda_low: Option<f64>,
    /// Upper root of `R = C·E[W]`, if any.
    pub lambda_high: Option<f64>,
    /// All positive equilibrium rates, ascending.
    pub equilibria: Vec<f64>,
    /// The stable equilibrium rate, or 0 when every customer balks.
    pub stable: f64,
}

/// Whether the benefit curve is falling at `lambda_bar`, which makes a root
/// there stable: more joiners make joining worse.
pub fn is_stable_root(params: &ModelParams, lambda_bar: f64) -> bool {
    mean_sojourn_derivatives(params, lambda_bar).map(|(_, d, _)| d > 0.0).unwrap_or(false)
}

pub fn equilibrium_arrival_rate(params: &ModelParams) -> ArrivalEquilibrium {
    let bound = stability_bound(params);
    let ew = |l: f64| mean_sojourn(params, l).unwrap_or(f64::INFINITY);
    let lambda_min = golden_min(ew, 0.0, bound, 1e-10);
    let min_sojourn = ew(lambda_min);
    let (r, c, lam) = (params.reward(), params.wait_cost(), params.lambda());
    let gap = r - c * min_sojourn;
    let g = |l: f64| net_benefit(params, l);

    let mut eq = ArrivalEquilibrium {
        class: EquilibriumClass::NoPositive,
        lambda_min,
        min_sojourn,
        lambda_low: None,
        lambda_high: None,
        equilibria: Vec::new(),
        stable: 0.0,
    };
    if gap.abs() <= 1e-9 * r {
        eq.class = EquilibriumClass::Tangent;
        if lambda_min <= lam {
            eq.equilibria.push(lambda_min);
            eq.stable = lambda_min;
        }
        return eq;
    }
    if gap < 0.0 {
        return eq;
    }
    eq.class = EquilibriumClass::Crossing;
    // With N = 1 the benefit at λ̄ → 0 is finite and may already be positive.
    let low = if g(0.0) < 0.0 || params.n_policy() > 1 {
        bisect(g, 0.0, lambda_min, 0.0)
    } else {
        None
    };
    let high = bisect(g, lambda_min, bound, 0.0);
    eq.lambda_low = low;
    eq.lambda_high = high;
    let low_v = low.unwrap_or(0.0);
    match high {
        Some(h) if h <= lam => {
            eq.equilibria.extend(low);
            eq.equilibria.push(h);
            eq.stable = h;
        }
        _ if low_v < lam => {
            eq.equilibria.extend(low);
            eq.equilibria.push(lam);
            eq.stable = lam;
        }
        _ if low_v == lam => {
            eq.equilibria.push(lam);
            eq.stable = lam;
        }
        _ => {}
    }
    eq
}

/// Socially optimal joining rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalArrival {
    pub strategy: MixedStrategy,
    /// Maximiser of `U_s` over the whole stable interval, ignoring `λ̄ ≤ λ`.
    pub unconstrained: f64,
    pub welfare: f64,
    /// The optimum sits at `λ̄ = λ` (everyone joins).
    pub at_capacity: bool,
    /// No positive rate beats the empty system, so everyone balks.
    pub all_balk: bool,
}

/// Maximiser of `U_s` on `(0, hi]` by a dense scan refined with golden section.
///
/// The scan guards against the welfare curve failing to be concave near
/// `λ̄ = 0`, where the N-policy term makes it rise steeply from below.
fn maximise_welfare(params: &ModelParams, hi: f64) -> (f64, f64) {
    const GRID: usize = 2000;
    let us = |l: f64| social_welfare_unobservable(params, l).unwrap_or(f64::NEG_INFINITY);
    let step = hi / GRID as f64;
    let (mut best_i, mut best_v) = (GRID, us(hi));
    for i in (1..GRID).rev() {
        let v = us(i as f64 * step);
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let lo = (best_i as f64 - 1.0) * step;
    let up = ((best_i + 1) as f64 * step).min(hi);
    let x = golden_min(|l| -us(l), lo, up, 1e-10);
    let (x, v) = if us(x) >= best_v { (x, us(x)) } else { (best_i as f64 * step, best_v) };
    if us(hi) >= v {
        (hi, us(hi))
    } else {
        (x, v)
    }
}

pub fn optimal_arrival_rate(params: &ModelParams) -> OptimalArrival {
    let bound = stability_bound(params);
    let (unconstrained, _) = maximise_welfare(params, bound);
    let cap = params.lambda().min(bound);
    let (x, v) = maximise_welfare(params, cap);
    let at_capacity = params.lambda() <= bound && (x - params.lambda()).abs() <= 1e-9;
    let (x, v, all_balk) = if v < 0.0 { (0.0, 0.0, true) } else { (x, v, false) };
    OptimalArrival {
        strategy: MixedStrategy::from_rate(params, x.min(params.lambda()))
            .expect("rate within [0, λ]"),
        unconstrained,
        welfare: v,
        at_capacity: at_capacity && !all_balk,
        all_balk,
    }
}
