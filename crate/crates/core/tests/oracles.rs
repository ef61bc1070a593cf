//! Closed forms against independent numerical solutions, plus frozen values.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use retrial_core::observable::{
    social_welfare_observable, stationary_case1, stationary_case2, stationary_case3, stationary_observable,
    CaseCoefficients,
};
use retrial_core::unobservable::{
    equilibrium_arrival_rate, mean_queue_length, optimal_arrival_rate, stationary_unobservable, truncation_cap,
    EquilibriumClass,
};
use retrial_core::{
    build_generator, equilibrium_thresholds, sojourn_time, CaseTag, Error, ModelParams, Regime, ServerPhase,
    SystemState, ThresholdStrategy, TruncatedGenerator,
};

fn p(l: f64, m: f64, t: f64, x: f64, n: i64, r: f64) -> ModelParams {
    ModelParams::new(l, m, t, x, n, r, 1.0).unwrap()
}

/// Dense LU solve of `πQ = 0, Σπ = 1` with the last balance equation replaced by normalisation.
fn dense_stationary(g: &TruncatedGenerator) -> Vec<f64> {
    let n = g.len();
    let states = g.states();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, &from) in states.iter().enumerate() {
        for (j, &to) in states.iter().enumerate() {
            if i != j {
                let r = g.rate(from, to);
                a[(j, i)] += r;
                a[(i, i)] -= r;
            }
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("nonsingular").iter().copied().collect()
}

fn check_against_dense(params: &ModelParams, s: ThresholdStrategy) {
    let d = stationary_observable(params, &s).unwrap();
    let g = build_generator(params, Regime::Observable { case: s.case_tag(), strategy: s }).unwrap();
    let pi = dense_stationary(&g);
    for (st, v) in g.states().iter().zip(pi) {
        assert!((d.prob_state(*st) - v).abs() < 1e-10, "{st}: {} vs {v}", d.prob_state(*st));
    }
}

#[test]
fn case1_matches_dense_solve() {
    let params = p(5.0, 3.0, 5.0, 0.15, 7, 15.0);
    let s = ThresholdStrategy::new(8, 10, 7).unwrap();
    assert_eq!(s.case_tag(), CaseTag::Case1);
    check_against_dense(&params, s);
}

#[test]
fn case2_matches_dense_solve() {
    let params = p(3.0, 5.0, 6.0, 1.0, 3, 15.0);
    let s = ThresholdStrategy::new(7, 4, 3).unwrap();
    assert_eq!(s.case_tag(), CaseTag::Case2);
    check_against_dense(&params, s);
}

#[test]
fn case3_matches_dense_solve() {
    let params = p(3.0, 3.0, 5.0, 0.5, 6, 15.0);
    let s = ThresholdStrategy::new(9, 2, 6).unwrap();
    assert_eq!(s.case_tag(), CaseTag::Case3);
    check_against_dense(&params, s);
}

#[test]
fn case_specific_entry_points_reject_wrong_ordering() {
    let params = p(3.0, 5.0, 6.0, 1.0, 3, 15.0);
    let s = ThresholdStrategy::new(7, 4, 3).unwrap();
    assert!(stationary_case2(&params, &s).is_ok());
    assert!(matches!(stationary_case1(&params, &s), Err(Error::CaseMismatch { .. })));
    assert!(matches!(stationary_case3(&params, &s), Err(Error::CaseMismatch { .. })));
}

#[test]
fn case2_generator_slice_around_trigger() {
    // Rows of the five states (0,N-1), (0,N), (1,N), (2,N), (1,N+1) written out by hand.
    let params = p(3.0, 5.0, 6.0, 1.0, 3, 15.0);
    let s = ThresholdStrategy::new(7, 4, 3).unwrap();
    let g = build_generator(&params, Regime::Observable { case: CaseTag::Case2, strategy: s }).unwrap();
    let st = |ph, n| SystemState::new(ph, n).unwrap();
    let (v, b, i) = (ServerPhase::Vacation, ServerPhase::Busy, ServerPhase::Idle);
    let (l, m, t, x) = (3.0, 5.0, 6.0, 1.0);
    let expected = [
        (st(v, 2), vec![(st(v, 3), l)]),
        (st(v, 3), vec![(st(v, 4), l), (st(i, 3), x)]),
        (st(b, 3), vec![(st(b, 4), l), (st(i, 3), m)]),
        (st(i, 3), vec![(st(b, 3), l), (st(b, 2), t)]),
        (st(b, 4), vec![(st(b, 5), l), (st(i, 4), m)]),
    ];
    for (from, outs) in expected {
        let mut total = 0.0;
        for &to in g.states() {
            if to == from {
                continue;
            }
            let want = outs.iter().find(|o| o.0 == to).map_or(0.0, |o| o.1);
            assert_eq!(g.rate(from, to), want, "{from} -> {to}");
            total += want;
        }
        assert_relative_eq!(g.rate(from, from), -total, epsilon = 1e-12);
    }
    // Busy at n1 + 1 = 5 no longer admits arrivals.
    assert_eq!(g.rate(st(b, 5), st(b, 6)), 0.0);
}

#[test]
fn unobservable_matches_truncated_generator() {
    let params = p(1.0, 2.0, 1.0, 1.0, 3, 5.0);
    let lb = 0.6;
    let cap = truncation_cap(&params, lb).unwrap();
    let g = build_generator(&params, Regime::Unobservable { lambda_bar: lb, cap }).unwrap();
    let pi = g.stationary().unwrap();
    let d = stationary_unobservable(&params, lb).unwrap();
    for (st, v) in g.states().iter().zip(pi) {
        assert!((d.prob_state(*st) - v).abs() < 1e-10, "{st}");
    }
}

#[test]
fn frozen_values() {
    // Equilibrium thresholds under the N-policy example set.
    let threshold_base = p(5.0, 3.0, 5.0, 0.15, 7, 15.0);
    let s = equilibrium_thresholds(&threshold_base).unwrap();
    assert_eq!((s.n0(), s.n1()), (9, 16));
    assert_relative_eq!(sojourn_time(&threshold_base, ServerPhase::Idle, 3).unwrap(), 3.0 * 13.0 / 15.0, epsilon = 1e-12);

    // Mean orbit length at the baseline unobservable instance.
    let base = p(0.5, 2.0, 1.0, 1.0, 1, 5.0);
    assert_relative_eq!(mean_queue_length(&base, 0.5).unwrap(), 71.0 / 60.0, epsilon = 1e-12);
    let two = p(1.0, 2.0, 1.0, 1.0, 1, 5.0);
    assert_relative_eq!(mean_queue_length(&two, 0.5).unwrap(), 71.0 / 60.0, epsilon = 1e-12);

    // Welfare of the Case 1 example at its own thresholds.
    let w = social_welfare_observable(&threshold_base, &s).unwrap();
    assert!(w > 0.0 && w < threshold_base.lambda() * threshold_base.reward());
}

#[test]
fn coefficient_errors() {
    // F = λ(λ+θ)/(θμ) = 1 exactly.
    let resonant = p(3.0, 4.5, 6.0, 1.0, 2, 15.0);
    assert!(matches!(CaseCoefficients::new(&resonant), Err(Error::ResonantF { .. })));
    // θμ = (λ+θ)(λ+ξ).
    let singular = p(1.0, 6.0, 2.0, 3.0, 2, 15.0);
    assert!(matches!(CaseCoefficients::new(&singular), Err(Error::SingularD1 { .. })));
}

#[test]
fn equilibrium_rate_falls_with_trigger() {
    let rates: Vec<f64> = (3..=8)
        .map(|n| {
            let eq = equilibrium_arrival_rate(&p(3.0, 3.0, 5.0, 0.5, n, 10.0));
            assert_eq!(eq.class, EquilibriumClass::Crossing);
            assert!(eq.stable > 0.0);
            eq.stable
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn optimum_never_exceeds_equilibrium() {
    for n in 1..=10 {
        let params = p(3.0, 3.0, 5.0, 0.5, n, 10.0);
        let e = equilibrium_arrival_rate(&params).stable;
        let o = optimal_arrival_rate(&params).strategy.lambda_bar();
        assert!(o <= e, "N={n}: {o} > {e}");
    }
}
