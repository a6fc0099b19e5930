use emech_bell::pulse::{
    classical_transfer_sim, optimal_shapes, solve_m, transfer_fidelity, Profile, PulseSchedule,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn levels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..3.0f64, 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fidelity_obeys_cauchy_schwarz(g in levels(), k in levels(), tau in 0.5..20.0f64) {
        let s = PulseSchedule::new(
            tau,
            Profile::Piecewise { span: tau, levels: g },
            Profile::Piecewise { span: tau, levels: k },
        )
        .unwrap();
        let i = transfer_fidelity(&s).unwrap();
        prop_assert!(i >= 0.0);
        prop_assert!(i <= s.fidelity_bound() * (1.0 + 1e-9) + 1e-14, "I = {} bound = {}", i, s.fidelity_bound());
        let xi = classical_transfer_sim(&s, Complex64::new(1.0, 0.0)).unwrap().xi;
        prop_assert!((xi.norm_sqr() - i).abs() < 1e-8);
    }

    #[test]
    fn logistic_schedule_saturates(mt in 1.0..20.0f64, tau in 0.5..50.0f64) {
        let s = optimal_shapes(tau, mt / tau).unwrap();
        let i = transfer_fidelity(&s).unwrap();
        prop_assert!((s.k_v - s.k_w).abs() < 1e-12 * s.k_v.max(1.0));
        prop_assert!((i - (1.0 - (-s.k_v).exp()).powi(2)).abs() < 1e-8);
        let xi = classical_transfer_sim(&s, Complex64::new(0.3, -0.4)).unwrap().xi;
        prop_assert!((xi.norm_sqr() / 0.25 - i).abs() < 1e-8);
    }

    #[test]
    fn shape_rate_gap_shrinks_with_duration(gmax in 0.01..10.0f64, t1 in 0.1..10.0f64, stretch in 1.01..4.0f64) {
        let gap = |t: f64| solve_m(gmax, t).unwrap() - gmax;
        prop_assert!(gap(stretch * t1) <= gap(t1));
    }

    #[test]
    fn logistic_profiles_are_monotone(mt in 0.1..30.0f64, tau in 0.5..20.0f64) {
        let s = optimal_shapes(tau, mt / tau).unwrap();
        let ts: Vec<f64> = (0..=64).map(|k| tau * k as f64 / 64.0).collect();
        for w in ts.windows(2) {
            prop_assert!(s.gamma_bs(w[1]) >= s.gamma_bs(w[0]));
            prop_assert!(s.kappa_c(w[1]) <= s.kappa_c(w[0]));
        }
    }
}
