//! Weak versus strong Schrödinger dynamics.
//!
//! The weak form is the scalar ODE `E_n c_n(t) = i ċ_n(t)` per mode. The
//! strong form asks for `‖[ψ(t+h) − ψ(t)]/h + iĤψ(t)‖₀ → 0`, which is
//! evaluated through the exact spectral identity
//! `Σ |c_n|² |(e^{−iE_n h} − 1)/h + iE_n|²` with certified tails.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, WaveSamples};
use crate::series::{certified_tail_sum, Bracket, CompensatedSum, PowerCombo, MAX_CUTOFF};
use crate::spectral_model::Mode;
use crate::state_space::{classify, NormResult, StateVector, DEFAULT_TOL};

/// `|i[c_n(t+h) − c_n(t−h)]/(2h) − E_n c_n(t)|`.
pub fn weak_residual(f: &StateVector, n: Mode, t: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BadStep(h));
    }
    f.model().check_mode(n)?;
    let e = f.model().energy_unchecked(n);
    let c = evolve(f, t).coefficient(n);
    let cp = evolve(f, t + h).coefficient(n);
    let cm = evolve(f, t - h).coefficient(n);
    let i = Complex64::new(0.0, 1.0);
    Ok((i * (cp - cm) / (2.0 * h) - c * e).norm())
}

/// `x − sin x` without cancellation for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.25 {
        let x2 = x * x;
        // x³/6 − x⁵/120 + x⁷/5040 − x⁹/362880 + x¹¹/39916800
        x * x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362_880.0 - x2 / 39_916_800.0))))
    } else {
        x - x.sin()
    }
}

/// `|(e^{−iEh} − 1)/h + iE|²`.
pub fn quotient_factor(energy: f64, h: f64) -> f64 {
    let x = energy * h;
    let re = -2.0 * (0.5 * x).sin().powi(2) / h;
    let im = x_minus_sin(x) / h;
    re * re + im * im
}

/// `‖[ψ(t+h) − ψ(t)]/h + iĤψ(t)‖₀`, divergent exactly when `f ∉ D(Ĥ)`.
pub fn quotient_residual(f: &StateVector, t: f64, h: f64) -> Result<NormResult> {
    quotient_residual_with_tol(f, t, h, DEFAULT_TOL)
}

/// As [`quotient_residual`], with `tol` bounding the width of the bracket on
/// the squared residual.
pub fn quotient_residual_with_tol(f: &StateVector, _t: f64, h: f64, tol: f64) -> Result<NormResult> {
    // |c_n(t)| does not depend on t, so neither does the identity.
    if !(h.is_finite() && h != 0.0) {
        return Err(Error::BadStep(h));
    }
    let model = f.model();
    let head: CompensatedSum =
        f.head().iter().map(|&(n, c)| c.norm_sqr() * quotient_factor(model.energy_unchecked(n), h)).collect();
    let mut total = head.bracket();
    if let Some(tail) = f.tail() {
        let law = model.energy_law().expect("tails require an analytic spectrum");
        let two_s = 2.0 * tail.exponent;
        let witness = 2.0 * law.power - two_s;
        if witness >= -1.0 {
            return Ok(NormResult::Divergent { witness });
        }
        let weight = tail.amplitude * tail.amplitude;
        let reach = 2.0 / h.abs();
        // (E ∓ 2/|h|)² enclose the factor once E ≥ 2/|h|
        let combo = |d: f64| {
            PowerCombo::new()
                .term(weight * law.coef * law.coef, 2.0 * law.power - two_s)
                .term(weight * 2.0 * law.coef * d, law.power - two_s)
                .term(weight * d * d, -two_s)
        };
        let lower = combo(law.offset - reach);
        let upper = combo(law.offset + reach);
        let min_cutoff = law.first_at_least(reach, tail.start);
        let b = certified_tail_sum(
            tail.start,
            min_cutoff,
            MAX_CUTOFF,
            tol,
            |n| weight * (n as f64).powf(-two_s) * quotient_factor(law.at(n), h),
            |n| {
                let lo = lower.sum_from(n).expect("tail in D(H)").lo.max(0.0);
                let hi = upper.sum_from(n).expect("tail in D(H)").hi;
                Bracket::new(lo, hi)
            },
        );
        total = total.add(&b);
    }
    Ok(NormResult::Finite(total.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongVerdict {
    pub verdict: Verdict,
    /// Least-squares slope of `ln residual` against `ln h`; absent when the
    /// residuals are infinite.
    pub slope: Option<f64>,
    /// p-series exponent certifying divergence of the residual series.
    pub witness: Option<f64>,
    pub residuals: Vec<(f64, NormResult)>,
    /// Classification of the same state, for the cross-check.
    pub k_star: i32,
    /// `verdict == Converges` exactly when `k_star == 2`.
    pub agrees_with_classification: bool,
}

/// Log-spaced steps `1e-1 … 1e-4`.
pub fn default_steps() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect()
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms residual)`.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Decide strong differentiability from the residual sequence.
///
/// A finite residual at any fixed `h` already certifies `f ∈ D(Ĥ)`, and
/// dominated convergence then sends the residual to zero; the verdict is
/// `Converges` when every residual is finite and they decrease along the
/// sequence. A divergent residual series gives `Diverges`.
pub fn strong_diff_verdict(f: &StateVector, t: f64, steps: &[f64]) -> Result<StrongVerdict> {
    if steps.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 steps, got {}", steps.len())));
    }
    if steps.windows(2).any(|w| !(w[1] < w[0])) || steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("steps must be positive and strictly decreasing".into()));
    }
    let residuals = steps.iter().map(|&h| Ok((h, quotient_residual(f, t, h)?))).collect::<Result<Vec<_>>>()?;
    let k_star = classify(f).k_star;
    let witness = residuals.iter().find_map(|(_, r)| match r {
        NormResult::Divergent { witness } => Some(*witness),
        NormResult::Finite(_) => None,
    });
    let (verdict, slope) = if witness.is_some() {
        (Verdict::Diverges, None)
    } else {
        let values: Vec<f64> = residuals.iter().map(|(_, r)| r.bracket().unwrap().mid()).collect();
        let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        let (slope, _, _) = fit_line(&xs, &ys);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let verdict = if decreasing && slope > 0.0 {
            Verdict::Converges
        } else if increasing && slope <= -0.5 {
            Verdict::Diverges
        } else {
            Verdict::Inconclusive
        };
        (verdict, Some(slope))
    };
    Ok(StrongVerdict {
        verdict,
        slope,
        witness,
        residuals,
        k_star,
        agrees_with_classification: (verdict == Verdict::Converges) == (k_star == 2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountEstimate {
    pub dimension: f64,
    /// RMS deviation of `ln N(ε)` from the fitted line.
    pub fit_residual: f64,
    /// `(ε, N(ε))` in units of the normalized graph box.
    pub counts: Vec<(f64, u64)>,
}

/// Box-counting dimension of the graph `x ↦ Re ψ(x)`.
///
/// The graph is mapped into the unit square and covered by an `ε`-grid;
/// within each column the samples together with the neighbouring ones
/// define the vertical range hit by the (piecewise linear) graph. `scales`
/// are box sizes in those unit coordinates.
pub fn box_count_dimension(samples: &WaveSamples, scales: &[f64]) -> Result<BoxCountEstimate> {
    if scales.len() < 3 {
        return Err(Error::InvalidArgument("need at least three box sizes".into()));
    }
    if scales.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidArgument("box sizes must lie in (0, 1]".into()));
    }
    let smallest = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = scales.iter().copied().fold(0.0, f64::max);
    if largest / smallest < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument("box sizes must span at least two decades".into()));
    }
    let n = samples.grid.len();
    if n < 2 {
        return Err(Error::ResolutionError("fewer than two samples".into()));
    }
    let per_box = smallest * (n - 1) as f64;
    if per_box < 4.0 {
        return Err(Error::ResolutionError(format!("{per_box:.2} samples per smallest box; need at least 4")));
    }
    let x0 = samples.grid[0];
    let span = samples.grid[n - 1] - x0;
    let ys: Vec<f64> = samples.values.iter().map(|v| v.re).collect();
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let yspan = if ymax > ymin { ymax - ymin } else { 1.0 };
    let xs: Vec<f64> = samples.grid.iter().map(|x| ((x - x0) / span).clamp(0.0, 1.0)).collect();
    let ys: Vec<f64> = ys.iter().map(|y| (y - ymin) / yspan).collect();

    let mut counts = Vec::with_capacity(scales.len());
    for &eps in scales {
        let columns = (1.0 / eps).ceil() as usize;
        let mut lo = vec![f64::INFINITY; columns];
        let mut hi = vec![f64::NEG_INFINITY; columns];
        for i in 0..n - 1 {
            let c0 = ((xs[i] / eps) as usize).min(columns - 1);
            let c1 = ((xs[i + 1] / eps) as usize).min(columns - 1);
            let (a, b) = (ys[i].min(ys[i + 1]), ys[i].max(ys[i + 1]));
            for c in c0..=c1 {
                lo[c] = lo[c].min(a);
                hi[c] = hi[c].max(b);
            }
        }
        let count: u64 = lo
            .iter()
            .zip(&hi)
            .filter(|(l, _)| l.is_finite())
            .map(|(l, h)| ((h / eps).floor() - (l / eps).floor()) as u64 + 1)
            .sum();
        counts.push((eps, count));
    }
    let lx: Vec<f64> = counts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let (dimension, _, fit_residual) = fit_line(&lx, &ly);
    Ok(BoxCountEstimate { dimension, fit_residual, counts })
}

/// Dyadic box sizes `2^{-1} … 2^{-levels}`.
pub fn dyadic_scales(levels: u32) -> Vec<f64> {
    (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect()
}
