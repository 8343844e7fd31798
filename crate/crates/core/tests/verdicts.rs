use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use schrscale::diagnostics::{default_steps, strong_diff_verdict, weak_residual, Verdict};
use schrscale::{classify, normalize, CoefficientSpec, PhaseRule, SpectrumModel, StateVector, DEFAULT_TOL};

fn boxed(spec: CoefficientSpec) -> StateVector {
    normalize(&spec, Arc::new(SpectrumModel::particle_in_box(PI, 0.0).unwrap()), DEFAULT_TOL).unwrap()
}

#[test]
fn verdict_agrees_with_classification() {
    let mut family: Vec<StateVector> =
        [1.0, 2.0, 2.6, 3.0].into_iter().map(|s| boxed(CoefficientSpec::power_law(s, 1, PhaseRule::Zero))).collect();
    family.push(boxed(CoefficientSpec {
        head: vec![(1, Complex64::new(0.6, 0.0)), (4, Complex64::new(0.0, 0.8))],
        tail: None,
    }));
    for f in &family {
        for t in [0.0, 0.7] {
            let v = strong_diff_verdict(f, t, &default_steps()).unwrap();
            assert!(v.agrees_with_classification, "{v:?}");
            assert_eq!(v.verdict == Verdict::Converges, classify(f).k_star == 2, "{v:?}");
        }
    }
}

#[test]
fn weak_residual_is_second_order_on_low_modes() {
    // second order holds while E_n h stays small
    let f = boxed(CoefficientSpec::power_law(2.0, 1, PhaseRule::Zero));
    for n in 1..=5 {
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| weak_residual(&f, n, 0.7, h).unwrap()).collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1] / 4.0 - 1.0).abs() < 0.1, "n = {n}: {r:?}");
        }
    }
}
