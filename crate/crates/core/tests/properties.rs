use proptest::prelude::*;

use retrial_core::numeric::power_difference;
use retrial_core::observable::{balance_residual, social_welfare_observable, stationary_observable};
use retrial_core::pso::{pso_maximize, Discretizer, PsoConfig};
use retrial_core::unobservable::{
    blocks, mean_queue_length, quadratic_residual, rate_matrix, stability_bound, stationary_unobservable,
};
use retrial_core::{CaseTag, ModelParams, ServerPhase, ThresholdStrategy};

fn rates() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.3f64..6.0, 0.3f64..6.0, 0.3f64..6.0, 0.05f64..4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn observable_distribution_is_a_balanced_probability(
        (l, m, t, x) in rates(),
        n in 1usize..10,
        d0 in 0usize..10,
        n1 in 0usize..20,
    ) {
        let params = ModelParams::new(l, m, t, x, n as i64, 50.0, 1.0).unwrap();
        let s = ThresholdStrategy::new(n - 1 + d0, n1, n).unwrap();
        // Parameter sets on the resonance or singular surfaces are skipped.
        if let Ok(d) = stationary_observable(&params, &s) {
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-12);
            for (_, p) in d.states_upto(s.max_orbit()) {
                prop_assert!(p >= -1e-15);
            }
            prop_assert!(balance_residual(&params, &s, &d) < 1e-10);
            prop_assert_eq!(d.max_orbit(), Some(s.max_orbit()));
        }
    }

    #[test]
    fn welfare_is_bounded_by_full_reward((l, m, t, x) in rates(), n in 1usize..8, n0 in 0usize..15, n1 in 0usize..15) {
        let params = ModelParams::new(l, m, t, x, n as i64, 20.0, 1.0).unwrap();
        if let Ok(s) = ThresholdStrategy::new(n0.max(n - 1), n1, n) {
            if let Ok(w) = social_welfare_observable(&params, &s) {
                prop_assert!(w <= l * 20.0 + 1e-9);
            }
        }
    }

    #[test]
    fn case_follows_threshold_order(n in 1usize..10, n0 in 0usize..30, n1 in 0usize..30) {
        match ThresholdStrategy::new(n0, n1, n) {
            Err(_) => prop_assert!(n0 + 1 < n),
            Ok(s) => {
                let want = if n0 <= n1 {
                    CaseTag::Case1
                } else if n1 + 1 >= n {
                    CaseTag::Case2
                } else {
                    CaseTag::Case3
                };
                prop_assert_eq!(s.case_tag(), want);
                prop_assert!(s.joins(ServerPhase::Idle, n0 + n1 + 5));
                prop_assert!(!s.joins(ServerPhase::Vacation, n0 + 1));
            }
        }
    }

    #[test]
    fn rate_matrix_solves_the_quadratic((_, m, t, x) in rates(), n in 1usize..10, u in 0.01f64..0.99) {
        let params = ModelParams::new(1.0, m, t, x, n as i64, 50.0, 1.0).unwrap();
        let lb = u * stability_bound(&params);
        let r = rate_matrix(&params, lb).unwrap();
        prop_assert!(quadratic_residual(&r, &blocks(&params, lb)) < 1e-12);
    }

    #[test]
    fn unobservable_mass_and_mean((_, m, t, x) in rates(), n in 1usize..10, u in 0.01f64..0.95) {
        let params = ModelParams::new(1.0, m, t, x, n as i64, 50.0, 1.0).unwrap();
        let lb = u * stability_bound(&params);
        let d = stationary_unobservable(&params, lb).unwrap();
        prop_assert!((d.total_mass() - 1.0).abs() < 1e-10);
        let el = mean_queue_length(&params, lb).unwrap();
        prop_assert!((d.mean_orbit() - el).abs() <= 1e-8 * el.max(1.0));
    }

    #[test]
    fn power_difference_matches_direct_form(x in 0.0f64..2.0, y in 0.0f64..2.0, k in 0u32..40) {
        prop_assume!((x - y).abs() > 1e-3);
        let direct = (x.powi(k as i32) - y.powi(k as i32)) / (x - y);
        let got = power_difference(x, y, k);
        prop_assert!((got - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn pso_best_never_decreases(seed in 0u64..1000) {
        let mut cfg = PsoConfig::new(vec![(-3.0, 3.0), (-3.0, 3.0)]).with_seed(seed);
        cfg.max_iters = 40;
        let res = pso_maximize(|v| -(v[0] - 1.0).powi(2) - (v[1] + 0.5).powi(2), &cfg, Discretizer::Continuous).unwrap();
        prop_assert!(res.trace.windows(2).all(|w| w[1].best_value >= w[0].best_value));
        for p in &res.particles {
            for (v, (lo, hi)) in p.velocity.iter().zip(&cfg.bounds) {
                prop_assert!(v.abs() <= hi - lo + 1e-12);
            }
        }
    }
}
