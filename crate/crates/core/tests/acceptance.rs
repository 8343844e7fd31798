//! Acceptance criteria, one line per criterion. Run with
//! `cargo test --test acceptance`; exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schrscale::diagnostics::{quotient_residual, strong_diff_verdict, weak_residual, Verdict};
use schrscale::evolution::{apply_extension, evolve, extension_bound_check, MultiplierSpec};
use schrscale::state_space::apply_hamiltonian;
use schrscale::trajectories::{equivariance_statistic, integrate_bohmian, sample_nelson, sample_positions, TimeGrid};
use schrscale::{
    classify, inverse_energy_mean, mean_energy, normalize, scale_norm, CoefficientSpec, NormResult, PhaseRule,
    ScaleIndex, SpectrumModel, StateVector, DEFAULT_TOL,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed: ok, detail: detail.into() }
}

fn unit_box() -> Arc<SpectrumModel> {
    Arc::new(SpectrumModel::particle_in_box(PI, 0.0).unwrap())
}

fn tail(s: f64) -> StateVector {
    normalize(&CoefficientSpec::power_law(s, 1, PhaseRule::Zero), unit_box(), DEFAULT_TOL).unwrap()
}

fn modes(pairs: &[(u64, f64)]) -> StateVector {
    normalize(&CoefficientSpec::modes(pairs.iter().copied()), unit_box(), DEFAULT_TOL).unwrap()
}

fn two_mode() -> StateVector {
    modes(&[(1, FRAC_1_SQRT_2), (2, FRAC_1_SQRT_2)])
}

/// Random normalized finite-support state on a box of random length or on
/// the oscillator.
fn random_finite(rng: &mut ChaCha8Rng) -> StateVector {
    let model = if rng.random_bool(0.75) {
        Arc::new(SpectrumModel::particle_in_box(rng.random_range(2.0..5.0), rng.random_range(0.0..2.0)).unwrap())
    } else {
        Arc::new(SpectrumModel::oscillator(None).unwrap())
    };
    let first = model.first_mode();
    let count = rng.random_range(1..=8);
    let mut head: Vec<(u64, Complex64)> = Vec::new();
    while head.len() < count {
        let n = rng.random_range(first..first + 16);
        if head.iter().all(|e| e.0 != n) {
            head.push((n, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
        }
    }
    head.sort_by_key(|e| e.0);
    normalize(&CoefficientSpec { head, tail: None }, model, DEFAULT_TOL).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> StateVector {
    if rng.random_bool(0.5) {
        return random_finite(rng);
    }
    let s = rng.random_range(0.6..4.0);
    let phase = if rng.random_bool(0.5) { PhaseRule::Zero } else { PhaseRule::Alternating };
    let spec = CoefficientSpec::power_law(s, rng.random_range(1..4), phase);
    normalize(&spec, unit_box(), DEFAULT_TOL).unwrap()
}

/// 1. Hilbert-scale classification of box tails.
fn criterion_1() -> Outcome {
    let ks: Vec<i32> = [1.0, 2.0, 3.0].iter().map(|&s| classify(&tail(s)).k_star).collect();
    let energy = mean_energy(&tail(2.0), DEFAULT_TOL);
    let expected = 15.0 / (PI * PI);
    let bracket_ok = energy.bracket().is_some_and(|b| b.contains(expected) && b.width() <= DEFAULT_TOL);
    let s1_divergent = !mean_energy(&tail(1.0), DEFAULT_TOL).is_finite();
    check(
        ks == [0, 1, 2] && bracket_ok && s1_divergent,
        format!("k* = {ks:?} for s = 1, 2, 3; mean energy at s = 2 brackets 15/π²: {bracket_ok}; s = 1 divergent: {s1_divergent}"),
    )
}

/// 2. Weak/strong separation.
fn criterion_2() -> Outcome {
    let f2 = tail(2.0);
    let steps = [1e-2, 5e-3, 2.5e-3];
    let mut worst: (u64, f64, f64) = (0, 0.0, 0.0);
    let mut bad_modes = Vec::new();
    for &t in &[0.0, 0.7] {
        for n in 1..=50u64 {
            let r: Vec<f64> = steps.iter().map(|&h| weak_residual(&f2, n, t, h).unwrap()).collect();
            for w in r.windows(2) {
                let dev = (w[0] / w[1] / 4.0 - 1.0).abs();
                if dev > worst.2 {
                    worst = (n, t, dev);
                }
                if dev > 0.1 && !bad_modes.contains(&n) {
                    bad_modes.push(n);
                }
            }
        }
    }
    let weak_ok = bad_modes.is_empty();
    let strong2 = strong_diff_verdict(&f2, 0.0, &schrscale::diagnostics::default_steps()).unwrap();
    let s2_ok = strong2.verdict == Verdict::Diverges;

    let default = schrscale::diagnostics::default_steps();
    let strong3 = strong_diff_verdict(&tail(3.0), 0.0, &default).unwrap();
    let s3_slope = strong3.slope.unwrap_or(f64::NAN);
    let s3_ok = strong3.verdict == Verdict::Converges && (s3_slope - 1.0).abs() <= 0.15;

    let heads = [
        modes(&[(1, 1.0)]),
        modes(&[(1, 1.0), (2, 1.0)]),
        modes(&[(1, 0.3), (2, -0.5), (3, 0.8)]),
        modes(&[(2, 1.0), (4, 0.5)]),
    ];
    let mut head_slopes = Vec::new();
    let mut heads_ok = true;
    for h in &heads {
        let v = strong_diff_verdict(h, 0.0, &default).unwrap();
        let slope = v.slope.unwrap_or(f64::NAN);
        heads_ok &= v.verdict == Verdict::Converges && (slope - 1.0).abs() <= 0.15;
        head_slopes.push(format!("{slope:.3}"));
    }
    let first_bad = bad_modes.iter().min().copied();
    check(
        weak_ok && s2_ok && s3_ok && heads_ok,
        format!(
            "weak O(h²) for n ≤ 50: {weak_ok} (first failing mode {first_bad:?}, worst n = {} at t = {} off by {:.0}%); \
             s = 2 strong {:?}; s = 3 strong {:?} with slope {s3_slope:.3} (need 1 ± 0.15); finite heads slopes [{}]",
            worst.0,
            worst.1,
            100.0 * worst.2,
            strong2.verdict,
            strong3.verdict,
            head_slopes.join(", ")
        ),
    )
}

/// 3. Extension operator.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut zero_ok = 0;
    for _ in 0..100 {
        let f = random_state(&mut rng);
        let t = rng.random_range(-10.0..10.0);
        if apply_extension(&f, &MultiplierSpec::Zero, t).unwrap().is_exactly_zero() {
            zero_ok += 1;
        }
    }
    let mut bound_ok = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let t = rng.random_range(-10.0..10.0);
        let (f, u) = if i % 2 == 0 {
            (random_state(&mut rng), MultiplierSpec::Sine { amplitude: rng.random_range(0.0..3.0) })
        } else {
            (random_finite(&mut rng), MultiplierSpec::Clamp { cap: rng.random_range(0.5..50.0) })
        };
        let (lhs, rhs) = extension_bound_check(&f, &u, t).unwrap();
        worst = worst.max(lhs - rhs);
        if lhs <= rhs + 1e-12 {
            bound_ok += 1;
        }
    }
    check(
        zero_ok == 100 && bound_ok == 100,
        format!("u(λ) = λ exactly zero on {zero_ok}/100; bound holds on {bound_ok}/100 (max lhs − rhs = {worst:.3e})"),
    )
}

/// 4. Norm chain.
fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = 0;
    for _ in 0..1000 {
        let f = random_finite(&mut rng);
        let b: Vec<_> = ScaleIndex::ALL.iter().map(|&k| scale_norm(&f, k, DEFAULT_TOL).bracket().unwrap()).collect();
        // ALL runs from k = 2 down to k = −2
        if b.windows(2).all(|w| w[0].hi >= w[1].lo) {
            ok += 1;
        }
    }
    check(ok == 1000, format!("‖f‖₂ ≥ ‖f‖₁ ≥ ‖f‖₀ ≥ ‖f‖₋₁ ≥ ‖f‖₋₂ on {ok}/1000 states"))
}

/// 5. Mean-energy identity through the inverse.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let psi = random_finite(&mut rng);
        let h_psi = apply_hamiltonian(&psi).unwrap();
        let lhs = inverse_energy_mean(&h_psi, DEFAULT_TOL).bracket().unwrap().mid();
        let rhs = mean_energy(&psi, DEFAULT_TOL).bracket().unwrap().mid();
        worst = worst.max((lhs - rhs).abs());
    }
    check(worst < 1e-12, format!("max |(Ĥψ, Ĥ⁻¹Ĥψ) − (ψ, Ĥψ)| = {worst:.3e} over 1000 states"))
}

/// 6. Unitarity, group law and revival.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut unit, mut group) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let f = random_state(&mut rng);
        let (t1, t2) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let g = evolve(&f, t1);
        let norm = scale_norm(&g, ScaleIndex::new(0).unwrap(), 1e-13).bracket().unwrap().mid().sqrt();
        unit = unit.max((norm - 1.0).abs());
        let a = evolve(&g, t2);
        let b = evolve(&f, t1 + t2);
        let top = f.max_head_mode().unwrap_or(0).max(f.tail().map_or(0, |t| t.start + 200));
        for n in f.model().first_mode()..=top {
            group = group.max((a.coefficient(n) - b.coefficient(n)).norm());
        }
    }
    let mut revival: f64 = 0.0;
    for _ in 0..100 {
        let head: Vec<(u64, f64)> = (1..=12).map(|n| (n, rng.random_range(-1.0..1.0))).collect();
        let f = modes(&head);
        let g = evolve(&f, 2.0 * PI);
        for n in 1..=12 {
            revival = revival.max((g.coefficient(n) - f.coefficient(n)).norm());
        }
    }
    check(
        unit < 1e-12 && group < 1e-12 && revival < 1e-12,
        format!("max |‖U(t)f‖ − 1| = {unit:.2e}; group law {group:.2e}; revival at 2π {revival:.2e}"),
    )
}

/// 7. Certified brackets against brute-force partial sums.
fn criterion_7() -> Outcome {
    const N: u64 = 100_000;
    let mut failures = Vec::new();
    let mut checked = 0;
    for &s in &[1.0, 2.0, 3.0] {
        let f = tail(s);
        let a2 = f.tail().unwrap().amplitude.powi(2);
        for k in -2..=2 {
            checked += 1;
            // box with L = π: E_n = n², so the terms are A² n^{2k − 2s}
            let q = 2.0 * k as f64 - 2.0 * s;
            let partial = |m: u64| -> f64 { (1..=m).rev().map(|n| a2 * (n as f64).powf(q)).sum() };
            let got = scale_norm(&f, ScaleIndex::new(k).unwrap(), DEFAULT_TOL);
            let ok = match got {
                NormResult::Finite(b) => {
                    let sn = partial(N);
                    let p = -q - 1.0;
                    let (lo, hi) = (sn + a2 * ((N + 1) as f64).powf(-p) / p, sn + a2 * (N as f64).powf(-p) / p);
                    q < -1.0 && b.lo <= hi + 1e-12 && b.hi >= lo - 1e-12 && b.hi >= sn
                }
                NormResult::Divergent { .. } => q >= -1.0 && partial(N) - partial(N / 2) > 0.5 * a2 * 2f64.ln(),
            };
            if !ok {
                failures.push(format!("s={s},k={k}"));
            }
        }
        for &h in &[1e-1, 1e-2] {
            checked += 1;
            let g = |e: f64| ((Complex64::from_polar(1.0, -e * h) - 1.0) / h + Complex64::new(0.0, e)).norm_sqr();
            let partial =
                |m: u64| -> f64 { (1..=m).rev().map(|n| a2 * (n as f64).powf(-2.0 * s) * g((n * n) as f64)).sum() };
            let ok = match quotient_residual(&f, 0.0, h).unwrap() {
                NormResult::Finite(b) => {
                    let sn = partial(N);
                    // remainder ≤ A² ∫_N^∞ x^{−2s} (x² + 2/h)² dx, here with 2s = 6
                    let x = N as f64;
                    let c = 2.0 / h;
                    let rem = a2 * (1.0 / x + 2.0 * c / (3.0 * x.powi(3)) + c * c / (5.0 * x.powi(5)));
                    let (lo, hi) = (b.lo * b.lo, b.hi * b.hi);
                    s == 3.0 && lo <= sn + rem + 1e-12 && hi >= sn - 1e-12
                }
                NormResult::Divergent { .. } => s < 2.5 && partial(N) - partial(N / 2) > 1.0,
            };
            if !ok {
                failures.push(format!("residual s={s},h={h}"));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} of {checked} brackets consistent with N = 1e5 partial sums; failures: {failures:?}",
            checked - failures.len()
        ),
    )
}

/// 8. Trajectory ensembles.
fn criterion_8() -> Outcome {
    let ground = modes(&[(1, 1.0)]);
    let x0: Vec<f64> = (1..100).map(|i| i as f64 * PI / 100.0).collect();
    let still = integrate_bohmian(&ground, &x0, TimeGrid::covering(0.0, 1.0, 1e-3, 100).unwrap()).unwrap();
    let drift =
        still.positions.iter().flat_map(|slice| slice.iter().zip(&x0).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);

    let f = two_mode();
    let nelson_grid = TimeGrid::covering(0.0, 0.3, 1e-4, 1000).unwrap();
    let nelson = sample_nelson(&f, 100_000, nelson_grid, 2024).unwrap();
    let ks_nelson = equivariance_statistic(&nelson, &f, 0.3).unwrap();
    let breach = nelson.breach_fraction();

    let starts = sample_positions(&f, 0.0, 10_000, 7).unwrap();
    let bohm = integrate_bohmian(&f, &starts, TimeGrid::covering(0.0, 0.3, 1e-3, 30).unwrap()).unwrap();
    let ks_bohm = equivariance_statistic(&bohm, &f, 0.3).unwrap();

    let small = TimeGrid::covering(0.0, 0.3, 1e-4, 1000).unwrap();
    let a = sample_nelson(&f, 10_000, small, 99).unwrap();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = serial.install(|| sample_nelson(&f, 10_000, small, 99)).unwrap();
    let identical = a == b;

    check(
        drift < 1e-12 && ks_nelson < 0.02 && ks_bohm < 0.02 && breach < 1e-3 && identical && bohm.crossings == 0,
        format!(
            "ground-state drift {drift:.1e}; KS Nelson {ks_nelson:.4} (N = 1e5), Bohmian {ks_bohm:.4} (N = 1e4); \
             breach fraction {breach:.1e}; Bohmian crossings {}; reruns identical: {identical}",
            bohm.crossings
        ),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_schrscale")).args(args).output().expect("binary runs")
}

/// 9. Replaying embedded configurations.
fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("classify.json", vec!["classify", "--state", "powerlaw:s=2,n0=1,phase=zero"]),
        (
            "norms.json",
            vec!["norms", "--model", "oscillator", "--state", "modes:0=1,3=0.5-0.2i+powerlaw:s=1.7,n0=4,phase=alt"],
        ),
        (
            "evolve.csv",
            vec![
                "evolve",
                "--state",
                "powerlaw:s=1.5,n0=1,phase=zero",
                "--t",
                "0.37",
                "--truncation",
                "200",
                "--points",
                "257",
            ],
        ),
        ("weak.json", vec!["weak-check", "--state", "powerlaw:s=2,n0=1,phase=zero", "--max-mode", "10"]),
        ("strong.json", vec!["strong-check", "--state", "powerlaw:s=3,n0=1,phase=zero"]),
        (
            "extension.json",
            vec!["extension", "--state", "modes:1=0.7071067811865476,3=0.7071067811865476", "--multiplier", "clamp:2"],
        ),
        (
            "traj.csv",
            vec![
                "trajectories",
                "--state",
                "modes:1=1,2=1",
                "--paths",
                "200",
                "--t-end",
                "0.05",
                "--dt",
                "1e-3",
                "--seed",
                "11",
            ],
        ),
        (
            "fractal.json",
            vec![
                "fractal",
                "--state",
                "powerlaw:s=1,n0=1,phase=zero",
                "--truncation",
                "500",
                "--points",
                "8193",
                "--levels",
                "10",
            ],
        ),
    ];
    let mut failures = Vec::new();
    let mut replayed = 0;
    for (name, mut args) in runs {
        let out = p(name);
        args.extend(["--output", out.as_str()]);
        let first = cli(&args);
        if !first.status.success() {
            failures.push(format!("{name}: {}", String::from_utf8_lossy(&first.stderr).trim()));
            continue;
        }
        let mut files = vec![out.clone()];
        if name == "traj.csv" {
            files.push(format!("{out}.summary.json"));
        }
        for source in &files {
            let copy = p(&format!("replay-{}", Path::new(source).file_name().unwrap().to_string_lossy()));
            let again = cli(&["replay", source, "--output", &copy]);
            let same = again.status.success() && std::fs::read(&out).ok() == std::fs::read(&copy).ok();
            if same {
                replayed += 1;
            } else {
                failures.push(format!("{source} replay differs"));
            }
        }
    }
    check(failures.is_empty(), format!("{replayed} outputs replayed bit-exactly; failures: {failures:?}"))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 Hilbert-scale classification", criterion_1, Duration::from_secs(1)),
        ("2 weak/strong separation", criterion_2, Duration::from_secs(10)),
        ("3 extension operator", criterion_3, Duration::from_secs(5)),
        ("4 norm chain", criterion_4, Duration::from_secs(5)),
        ("5 mean-energy identity", criterion_5, Duration::from_secs(5)),
        ("6 unitarity and group law", criterion_6, Duration::from_secs(5)),
        ("7 oracle equivalence", criterion_7, Duration::from_secs(30)),
        ("8 trajectories", criterion_8, Duration::from_secs(300)),
        ("9 provenance replay", criterion_9, Duration::from_secs(120)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = outcome.passed && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
