//! Exact unitary evolution, position-space synthesis and the extension of
//! `Ĥ − i d/dt` to multiplier evolutions `ψᵘ(t) = exp(−i u(Ĥ) t) ψ`.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{certified_tail_sum, Bracket, CompensatedSum, PowerCombo};
use crate::spectral_model::{hermite_derivative, hermite_functions, Mode, ModelKind, SpectrumModel};
use crate::state_space::{tail_moment, NormResult, PowerTail, StateVector};

/// Remainder cutoff cap for oscillatory tail sums, where only a one-sided
/// bound on the remainder is available.
const OSCILLATORY_CUTOFF: u64 = 1 << 20;

fn phase(energy: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -energy * t)
}

/// `|ψ, t⟩ = Σ c_n e^{−iE_n t} |n⟩`. Head coefficients are rotated in
/// place; the tail keeps its law and accumulates the time symbolically.
pub fn evolve(f: &StateVector, t: f64) -> StateVector {
    let mut out = f.clone();
    for (n, c) in out.head.iter_mut() {
        *c *= phase(f.model.energy_unchecked(*n), t);
    }
    if out.tail.is_some() {
        out.tail_time += t;
    }
    out
}

/// Sampled `ψ(x, t)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSamples {
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub t: f64,
    /// Largest mode included in the sum.
    pub truncation: Mode,
    /// Upper bound on `‖f − f_{≤N}‖₀`.
    pub truncation_error: f64,
}

impl WaveSamples {
    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.norm_sqr())
    }

    /// Trapezoid integral of `|ψ|²` over the sampled grid.
    pub fn total_probability(&self) -> f64 {
        let rho: Vec<f64> = self.density().collect();
        self.grid
            .windows(2)
            .zip(rho.windows(2))
            .map(|(x, r)| 0.5 * (x[1] - x[0]) * (r[0] + r[1]))
            .collect::<CompensatedSum>()
            .value()
    }

    /// CSV with columns `x,re,im,density`; floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,re,im,density")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", x, v.re, v.im, v.norm_sqr())?;
        }
        Ok(())
    }
}

/// Dense amplitudes `a_n` for modes `first..first + len` together with the
/// basis they expand in.
#[derive(Debug, Clone)]
pub struct Expansion {
    model: Arc<SpectrumModel>,
    first: Mode,
    amps: Vec<Complex64>,
}

impl Expansion {
    /// Amplitudes `c_n e^{−iE_n t}` of `f` for all modes up to `max_mode`.
    pub fn at_time(f: &StateVector, t: f64, max_mode: Mode) -> Result<Self> {
        if let ModelKind::Table(_) = f.model.kind() {
            return Err(Error::UnsupportedOperation("table models carry no eigenfunctions".into()));
        }
        let first = f.model.first_mode();
        let len = (max_mode + 1).saturating_sub(first) as usize;
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        let evolved = evolve(f, t);
        for (n, c) in evolved.coefficients_upto(max_mode) {
            amps[(n - first) as usize] = c;
        }
        Ok(Self { model: f.model_arc(), first, amps })
    }

    pub fn model(&self) -> &SpectrumModel {
        &self.model
    }

    /// `(ψ(x), ψ'(x))`.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        match *self.model.kind() {
            ModelKind::Box { length } => {
                let k0 = PI / length;
                let norm = (2.0 / length).sqrt();
                let theta = k0 * x;
                let z = Complex64::from_polar(1.0, theta);
                let mut w = Complex64::from_polar(1.0, theta * self.first as f64);
                let (mut psi, mut dpsi) = (zero, zero);
                for (i, a) in self.amps.iter().enumerate() {
                    let n = (self.first + i as Mode) as f64;
                    psi += a * w.im;
                    dpsi += a * (n * w.re);
                    w *= z;
                }
                (psi * norm, dpsi * (norm * k0))
            }
            ModelKind::Oscillator => {
                let top = self.first as usize + self.amps.len();
                let mut h = vec![0.0; top + 1];
                hermite_functions(x, &mut h);
                let (mut psi, mut dpsi) = (zero, zero);
                for (i, a) in self.amps.iter().enumerate() {
                    let n = self.first as usize + i;
                    psi += a * h[n];
                    dpsi += a * hermite_derivative(&h, n);
                }
                (psi, dpsi)
            }
            ModelKind::Table(_) => unreachable!("checked at construction"),
        }
    }
}

/// `ψ(x,t) = Σ_{n≤N} c_n e^{−iE_n t} φ_n(x)` on `grid`, plus an `L²` bound
/// on what the truncation leaves out.
pub fn synthesize(f: &StateVector, t: f64, grid: &[f64], truncation: Mode) -> Result<WaveSamples> {
    if let Some(max) = f.max_head_mode() {
        if truncation < max {
            return Err(Error::InvalidArgument(format!(
                "truncation N = {truncation} is below the largest head mode {max}"
            )));
        }
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    if let Some((lo, hi)) = f.model.interval() {
        if let Some(&x) = grid.iter().find(|&&x| !(lo..=hi).contains(&x)) {
            return Err(Error::DomainError { x, lo, hi });
        }
    }
    let expansion = Expansion::at_time(f, t, truncation)?;
    let values = grid.par_iter().map(|&x| expansion.eval(x).0).collect();
    let truncation_error = match f.tail() {
        Some(tail) => match tail_moment(&f.model, tail, 0, (truncation + 1).max(tail.start), 1e-12) {
            NormResult::Finite(b) => b.hi.max(0.0).sqrt(),
            NormResult::Divergent { .. } => f64::INFINITY,
        },
        None => 0.0,
    };
    Ok(WaveSamples { grid: grid.to_vec(), values, t, truncation, truncation_error })
}

/// Uniform grid of `points` positions spanning the model's default interval.
pub fn uniform_grid(model: &SpectrumModel, max_mode: Mode, points: usize) -> Vec<f64> {
    let (a, b) = model.default_interval(max_mode);
    let step = (b - a) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { b } else { a + i as f64 * step }).collect()
}

/// One piece of a tabulated multiplier: `u(λ) = value` for `lo ≤ λ < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSegment {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Multiplier `u` with `λ − u(λ)` bounded on the spectrum in use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MultiplierSpec {
    /// `u(λ) = λ`.
    Zero,
    /// `u(λ) = λ + α sin λ`.
    Sine { amplitude: f64 },
    /// `u(λ) = min(λ, C)`.
    Clamp { cap: f64 },
    /// Piecewise constant `u` on the listed segments, `u(λ) = λ` elsewhere.
    Table(Vec<TableSegment>),
}

impl MultiplierSpec {
    pub fn u(&self, lambda: f64) -> f64 {
        match self {
            MultiplierSpec::Zero => lambda,
            MultiplierSpec::Sine { amplitude } => lambda + amplitude * lambda.sin(),
            MultiplierSpec::Clamp { cap } => lambda.min(*cap),
            MultiplierSpec::Table(segs) => {
                segs.iter().find(|s| s.lo <= lambda && lambda < s.hi).map_or(lambda, |s| s.value)
            }
        }
    }

    /// `λ − u(λ)`.
    pub fn offset(&self, lambda: f64) -> f64 {
        match self {
            MultiplierSpec::Zero => 0.0,
            MultiplierSpec::Sine { amplitude } => -amplitude * lambda.sin(),
            _ => lambda - self.u(lambda),
        }
    }

    /// `M = sup |λ − u(λ)|²` over the modes `f` occupies. Fails when the
    /// supremum is infinite there.
    pub fn bound_over(&self, f: &StateVector) -> Result<f64> {
        let model = f.model();
        let head_sup =
            f.head().iter().map(|&(n, _)| self.offset(model.energy_unchecked(n)).powi(2)).fold(0.0, f64::max);
        let Some(tail) = f.tail() else {
            return Ok(match self {
                MultiplierSpec::Sine { amplitude } => amplitude * amplitude,
                _ => head_sup,
            });
        };
        let floor = model.energy_unchecked(tail.start);
        match self {
            MultiplierSpec::Zero => Ok(0.0),
            MultiplierSpec::Sine { amplitude } => Ok(amplitude * amplitude),
            MultiplierSpec::Clamp { cap } => {
                Err(Error::NotInExtensionFamily(format!("λ − min(λ, {cap}) grows without bound on the power-law tail")))
            }
            MultiplierSpec::Table(segs) => {
                let mut sup = head_sup;
                for s in segs.iter().filter(|s| s.hi > floor) {
                    if s.hi.is_infinite() {
                        return Err(Error::NotInExtensionFamily(format!(
                            "table segment [{}, ∞) leaves λ − u(λ) unbounded on the tail",
                            s.lo
                        )));
                    }
                    let lo = s.lo.max(floor);
                    sup = sup.max((lo - s.value).powi(2)).max((s.hi - s.value).powi(2));
                }
                Ok(sup)
            }
        }
    }
}

/// Coefficients `[λ_n − u(λ_n)] e^{−iu(λ_n)t} c_n` of `Ŝψᵘ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSequence {
    pub head: Vec<(Mode, Complex64)>,
    /// Tail of the source state, still under the multiplier.
    pub tail: Option<PowerTail>,
    pub multiplier: MultiplierSpec,
    pub t: f64,
    /// Bracket on `‖Ŝψᵘ(t)‖₀²`.
    pub norm_sq: Bracket,
    /// `M` over the spectrum in use.
    pub bound: f64,
    source: StateVector,
}

impl ExtendedSequence {
    pub fn coefficient(&self, n: Mode) -> Complex64 {
        if let Ok(i) = self.head.binary_search_by_key(&n, |e| e.0) {
            return self.head[i].1;
        }
        match &self.tail {
            Some(tail) if n >= tail.start => {
                let lambda = self.source.model().energy_unchecked(n);
                extension_factor(&self.multiplier, lambda, self.t) * self.source.coefficient(n)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_exactly_zero(&self) -> bool {
        self.tail.is_none() && self.head.iter().all(|e| e.1 == Complex64::new(0.0, 0.0))
    }
}

fn extension_factor(u: &MultiplierSpec, lambda: f64, t: f64) -> Complex64 {
    if let MultiplierSpec::Zero = u {
        return Complex64::new(0.0, 0.0);
    }
    phase(u.u(lambda), t) * u.offset(lambda)
}

/// `Ŝψᵘ(t)` for `ψ = f`.
pub fn apply_extension(f: &StateVector, u: &MultiplierSpec, t: f64) -> Result<ExtendedSequence> {
    let bound = u.bound_over(f)?;
    let model = f.model();
    let mut head: Vec<(Mode, Complex64)> =
        f.head().iter().map(|&(n, c)| (n, extension_factor(u, model.energy_unchecked(n), t) * c)).collect();
    let head_sq: CompensatedSum = head.iter().map(|e| e.1.norm_sqr()).collect();
    let mut norm_sq = head_sq.bracket();
    let mut tail = None;
    if let (Some(src_tail), false) = (f.tail(), matches!(u, MultiplierSpec::Zero)) {
        match u {
            MultiplierSpec::Table(segs) => {
                // the offset vanishes above the last finite segment
                let top = segs.iter().map(|s| s.hi).fold(f64::NEG_INFINITY, f64::max);
                let law = model.energy_law().expect("tails require an analytic spectrum");
                let mut n = src_tail.start;
                let mut sum = CompensatedSum::new();
                while law.at(n) < top {
                    let c = extension_factor(u, law.at(n), t) * f.coefficient(n);
                    if c != Complex64::new(0.0, 0.0) {
                        head.push((n, c));
                        sum.add(c.norm_sqr());
                    }
                    n += 1;
                }
                norm_sq = norm_sq.add(&sum.bracket());
            }
            MultiplierSpec::Sine { amplitude } => {
                let weight = src_tail.amplitude * src_tail.amplitude;
                let two_s = 2.0 * src_tail.exponent;
                let a2 = amplitude * amplitude;
                let cap = PowerCombo::new().term(a2 * weight, -two_s);
                let b = certified_tail_sum(
                    src_tail.start,
                    src_tail.start,
                    OSCILLATORY_CUTOFF,
                    crate::state_space::DEFAULT_TOL,
                    |n| a2 * model.energy_unchecked(n).sin().powi(2) * weight * (n as f64).powf(-two_s),
                    |n| Bracket::new(0.0, cap.sum_from(n).expect("normalizable tail").hi),
                );
                norm_sq = norm_sq.add(&b);
                tail = Some(*src_tail);
            }
            MultiplierSpec::Zero | MultiplierSpec::Clamp { .. } => unreachable!("rejected by bound_over"),
        }
    }
    head.sort_by_key(|e| e.0);
    Ok(ExtendedSequence { head, tail, multiplier: u.clone(), t, norm_sq, bound, source: f.clone() })
}

/// `(‖Ŝψᵘ(t)‖₀², M‖f‖₀²)` using the upper end of both brackets.
pub fn extension_bound_check(f: &StateVector, u: &MultiplierSpec, t: f64) -> Result<(f64, f64)> {
    let ext = apply_extension(f, u, t)?;
    Ok((ext.norm_sq.hi.max(0.0), ext.bound * f.norm_sq().hi))
}

/// `‖Ĥf(t) − i[f(t+h) − f(t−h)]/(2h)‖₀` evaluated literally on a
/// finite-support state.
pub fn windowed_strong_residual(f: &StateVector, t: f64, h: f64) -> Result<f64> {
    if !f.is_finite_support() {
        return Err(Error::DomainRequired("the literal strong residual needs a windowed state".into()));
    }
    if !(h.is_finite() && h != 0.0) {
        return Err(Error::BadStep(h));
    }
    let now = evolve(f, t);
    let ahead = evolve(f, t + h);
    let behind = evolve(f, t - h);
    let i = Complex64::new(0.0, 1.0);
    let sum: CompensatedSum = now
        .head()
        .iter()
        .zip(ahead.head().iter().zip(behind.head()))
        .map(|(&(n, c), (&(_, cp), &(_, cm)))| {
            let e = f.model().energy_unchecked(n);
            (c * e - i * (cp - cm) / (2.0 * h)).norm_sqr()
        })
        .collect();
    Ok(sum.value().sqrt())
}
