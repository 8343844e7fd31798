use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use schrscale::cli::output::compact_json;
use schrscale::diagnostics::quotient_residual;
use schrscale::evolution::evolve;
use schrscale::trajectories::ks_distance;
use schrscale::{
    classify, normalize, scale_norm, spectral_window, CoefficientSpec, NormResult, PhaseRule, PowerTail, ScaleIndex,
    SpectrumModel, StateVector, DEFAULT_TOL,
};

fn model(length: f64, shift: f64) -> Arc<SpectrumModel> {
    Arc::new(SpectrumModel::particle_in_box(length, shift).unwrap())
}

prop_compose! {
    fn finite_state()(
        length in 0.5f64..6.0,
        shift in 0.0f64..3.0,
        coeffs in prop::collection::btree_map(1u64..40, (-1.0f64..1.0, -1.0f64..1.0), 1..10),
    ) -> StateVector {
        let mut head: Vec<_> = coeffs.into_iter().map(|(n, (re, im))| (n, Complex64::new(re, im))).collect();
        if head.iter().all(|e| e.1.norm() < 1e-6) {
            head[0].1 = Complex64::new(1.0, 0.0);
        }
        normalize(&CoefficientSpec { head, tail: None }, model(length, shift), DEFAULT_TOL).unwrap()
    }
}

prop_compose! {
    fn tail_state()(
        s in 0.55f64..4.0,
        start in 1u64..6,
        alt in any::<bool>(),
    ) -> StateVector {
        let phase = if alt { PhaseRule::Alternating } else { PhaseRule::Zero };
        normalize(&CoefficientSpec::power_law(s, start, phase), model(PI, 0.0), DEFAULT_TOL).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_chain_is_monotone(f in finite_state()) {
        let b: Vec<_> = ScaleIndex::ALL.iter().map(|&k| scale_norm(&f, k, DEFAULT_TOL).bracket().unwrap()).collect();
        for w in b.windows(2) {
            prop_assert!(w[0].hi >= w[1].lo);
        }
    }

    #[test]
    fn membership_is_monotone(f in tail_state()) {
        let k_star = classify(&f).k_star;
        for k in ScaleIndex::ALL {
            let finite = scale_norm(&f, k, 1e-6).is_finite();
            prop_assert_eq!(finite, k.get() <= k_star, "k = {}", k.get());
        }
    }

    #[test]
    fn box_tail_classification_follows_exponent(s in 0.55f64..5.0) {
        // in H_k iff s > k + 1/2 for E_n ∝ n²
        prop_assume!((s - s.round() - 0.5).abs() > 1e-9);
        let f = normalize(&CoefficientSpec::power_law(s, 1, PhaseRule::Zero), model(PI, 0.0), DEFAULT_TOL).unwrap();
        let expected = [2, 1].into_iter().find(|&k| s > k as f64 + 0.5).unwrap_or(0);
        prop_assert_eq!(classify(&f).k_star, expected);
    }

    #[test]
    fn evolution_is_unitary_and_composes(f in finite_state(), t1 in -50.0f64..50.0, t2 in -50.0f64..50.0) {
        let a = evolve(&evolve(&f, t1), t2);
        let b = evolve(&f, t1 + t2);
        let norm = scale_norm(&a, ScaleIndex::new(0).unwrap(), DEFAULT_TOL).bracket().unwrap().mid();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        for (&(_, x), &(_, y)) in a.head().iter().zip(b.head()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn tail_evolution_preserves_every_scale_norm(f in tail_state(), t in -10.0f64..10.0) {
        let g = evolve(&f, t);
        for k in ScaleIndex::ALL {
            prop_assert_eq!(scale_norm(&f, k, 1e-6), scale_norm(&g, k, 1e-6));
        }
    }

    #[test]
    fn windows_land_in_the_domain(f in tail_state(), b in 2.0f64..2000.0) {
        let w = spectral_window(&f, 0.0, b).unwrap();
        prop_assert!(w.is_finite_support());
        if !w.head().is_empty() {
            prop_assert_eq!(classify(&w).k_star, 2);
            prop_assert!(quotient_residual(&w, 0.0, 1e-3).unwrap().is_finite());
        }
    }

    #[test]
    fn quotient_residual_diverges_exactly_outside_domain(f in tail_state(), h in 1e-4f64..1.0) {
        let divergent = matches!(quotient_residual(&f, 0.0, h).unwrap(), NormResult::Divergent { .. });
        prop_assert_eq!(divergent, !classify(&f).in_domain);
    }

    #[test]
    fn state_grammar_round_trips(
        coeffs in prop::collection::btree_map(1u64..30, (-10.0f64..10.0, -10.0f64..10.0), 0..5),
        s in 0.6f64..5.0,
        with_tail in any::<bool>(),
    ) {
        let head: Vec<_> = coeffs.into_iter().map(|(n, (re, im))| (n, Complex64::new(re, im))).collect();
        let start = head.last().map_or(1, |e| e.0 + 1);
        let tail = with_tail.then(|| PowerTail { amplitude: 0.75, ..PowerTail::new(s, start, PhaseRule::Alternating) });
        prop_assume!(!head.is_empty() || tail.is_some());
        let spec = CoefficientSpec { head, tail };
        let back: CoefficientSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn json_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = compact_json(&[x]);
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back[0].to_bits(), x.to_bits());
    }

    #[test]
    fn ks_distance_is_a_probability(xs in prop::collection::vec(-2.0f64..2.0, 1..200)) {
        let d = ks_distance(&xs, |x| ((x + 1.0) / 2.0).clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
