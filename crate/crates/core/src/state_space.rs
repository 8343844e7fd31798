//! States as coefficient sequences over the eigenbasis and the Hilbert
//! scale `H₂ ⊂ H₁ ⊂ H₀ ⊂ H₋₁ ⊂ H₋₂` built from `‖f‖_k² = Σ E_n^k |c_n|²`.
//!
//! Infinite sequences are closed-form power-law tails `c_n = A n^{-s}`, so
//! membership in `H_k` is decided by the p-series test and every finite
//! value comes with a certified bracket.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{certified_tail_sum, Bracket, CompensatedSum, PowerCombo, MAX_CUTOFF};
use crate::spectral_model::{EnergyLaw, Mode, SpectrumModel};

/// Default width for every certified bracket.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Bracket width used for the normalizing sum.
pub const NORMALIZE_TOL: f64 = 1e-12;

/// Largest number of modes a spectral window may pull out of a tail.
const MAX_WINDOW_MODES: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseRule {
    /// All tail coefficients positive.
    Zero,
    /// `(−1)ⁿ`.
    Alternating,
}

impl PhaseRule {
    pub fn sign(&self, n: Mode) -> f64 {
        match self {
            PhaseRule::Zero => 1.0,
            PhaseRule::Alternating => {
                if n.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `c_n = amplitude · n^{-exponent} · phase(n)` for `n ≥ start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub exponent: f64,
    pub start: Mode,
    pub amplitude: f64,
    pub phase: PhaseRule,
}

impl PowerTail {
    pub fn new(exponent: f64, start: Mode, phase: PhaseRule) -> Self {
        Self { exponent, start, amplitude: 1.0, phase }
    }

    /// Coefficient at time zero.
    pub fn coefficient(&self, n: Mode) -> f64 {
        self.amplitude * (n as f64).powf(-self.exponent) * self.phase.sign(n)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientSpec {
    pub head: Vec<(Mode, Complex64)>,
    pub tail: Option<PowerTail>,
}

impl CoefficientSpec {
    pub fn modes<I: IntoIterator<Item = (Mode, f64)>>(modes: I) -> Self {
        Self { head: modes.into_iter().map(|(n, c)| (n, Complex64::new(c, 0.0))).collect(), tail: None }
    }

    pub fn power_law(exponent: f64, start: Mode, phase: PhaseRule) -> Self {
        Self { head: Vec::new(), tail: Some(PowerTail::new(exponent, start, phase)) }
    }

    pub fn with_tail(mut self, tail: PowerTail) -> Self {
        self.tail = Some(tail);
        self
    }

    fn validate(&self, model: &SpectrumModel) -> Result<()> {
        for w in self.head.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSpec("head mode indices must be strictly increasing".into()));
            }
        }
        for &(n, c) in &self.head {
            model.check_mode(n)?;
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidSpec(format!("coefficient of mode {n} is not finite")));
            }
        }
        if let Some(tail) = &self.tail {
            if model.energy_law().is_none() {
                return Err(Error::UnsupportedOperation("power-law tails need an analytic spectrum".into()));
            }
            if tail.start == 0 {
                return Err(Error::InvalidSpec("tail must start at n0 ≥ 1".into()));
            }
            if !(tail.amplitude.is_finite() && tail.amplitude >= 0.0) {
                return Err(Error::InvalidSpec("tail amplitude must be nonnegative".into()));
            }
            if !(tail.exponent > 0.5) {
                return Err(Error::NotNormalizable(tail.exponent));
            }
            if let Some(&(last, _)) = self.head.last() {
                if last >= tail.start {
                    return Err(Error::InvalidSpec("head indices overlap the tail range".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parses the state grammar used on the command line, e.g.
/// `modes:1=0.70710678,2=0.70710678`, `powerlaw:s=2,n0=1,phase=zero`, or
/// both joined with `+`. Amplitudes may be complex (`0.5-0.25i`).
impl FromStr for CoefficientSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = Vec::new();
        let mut rest = s;
        loop {
            let next = ["+modes:", "+powerlaw:"].iter().filter_map(|p| rest.find(p)).min();
            match next {
                Some(i) => {
                    parts.push(&rest[..i]);
                    rest = &rest[i + 1..];
                }
                None => {
                    parts.push(rest);
                    break;
                }
            }
        }
        let mut spec = CoefficientSpec::default();
        for part in parts {
            if let Some(body) = part.strip_prefix("modes:") {
                for item in body.split(',').filter(|t| !t.trim().is_empty()) {
                    let (n, c) = item
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidSpec(format!("expected n=amplitude, got '{item}'")))?;
                    let n: Mode = n.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad mode index '{n}'")))?;
                    spec.head.push((n, parse_complex(c.trim())?));
                }
            } else if let Some(body) = part.strip_prefix("powerlaw:") {
                if spec.tail.is_some() {
                    return Err(Error::InvalidSpec("only one power-law tail is allowed".into()));
                }
                let mut tail = PowerTail::new(f64::NAN, 1, PhaseRule::Zero);
                for item in body.split(',').filter(|t| !t.trim().is_empty()) {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got '{item}'")))?;
                    let bad = || Error::InvalidSpec(format!("bad value for {k}: '{v}'"));
                    match k.trim() {
                        "s" => tail.exponent = v.trim().parse().map_err(|_| bad())?,
                        "n0" => tail.start = v.trim().parse().map_err(|_| bad())?,
                        "amp" => tail.amplitude = v.trim().parse().map_err(|_| bad())?,
                        "phase" => {
                            tail.phase = match v.trim() {
                                "zero" => PhaseRule::Zero,
                                "alternating" | "alt" => PhaseRule::Alternating,
                                _ => return Err(bad()),
                            }
                        }
                        other => return Err(Error::InvalidSpec(format!("unknown power-law key '{other}'"))),
                    }
                }
                if tail.exponent.is_nan() {
                    return Err(Error::InvalidSpec("power-law tail needs s=".into()));
                }
                spec.tail = Some(tail);
            } else {
                return Err(Error::InvalidSpec(format!("expected 'modes:' or 'powerlaw:', got '{part}'")));
            }
        }
        spec.head.sort_by_key(|e| e.0);
        Ok(spec)
    }
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || Error::InvalidSpec(format!("bad amplitude '{s}'"));
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not an exponent sign or the leading sign
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        return match split {
            Some(i) => {
                let re: f64 = body[..i].parse().map_err(|_| bad())?;
                let im: f64 = body[i..].parse().map_err(|_| bad())?;
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => body.parse().map_err(|_| bad())?,
                };
                Ok(Complex64::new(0.0, im))
            }
        };
    }
    s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
}

impl fmt::Display for CoefficientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if !self.head.is_empty() {
            write!(f, "modes:")?;
            for (i, (n, c)) in self.head.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                if c.im == 0.0 {
                    write!(f, "{n}={:?}", c.re)?;
                } else {
                    write!(f, "{n}={:?}{:+?}i", c.re, c.im)?;
                }
            }
            first = false;
        }
        if let Some(t) = &self.tail {
            if !first {
                write!(f, "+")?;
            }
            let phase = match t.phase {
                PhaseRule::Zero => "zero",
                PhaseRule::Alternating => "alternating",
            };
            write!(f, "powerlaw:s={:?},n0={},phase={},amp={:?}", t.exponent, t.start, phase, t.amplitude)?;
        }
        Ok(())
    }
}

/// Either a certified finite value or a p-series divergence certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormResult {
    Finite(Bracket),
    /// `witness` is the exponent `e ≥ −1` of the dominating `Σ n^e`.
    Divergent {
        witness: f64,
    },
}

impl NormResult {
    pub fn is_finite(&self) -> bool {
        matches!(self, NormResult::Finite(_))
    }

    pub fn bracket(&self) -> Option<Bracket> {
        match self {
            NormResult::Finite(b) => Some(*b),
            NormResult::Divergent { .. } => None,
        }
    }

    pub fn map_bracket(self, f: impl FnOnce(Bracket) -> Bracket) -> Self {
        match self {
            NormResult::Finite(b) => NormResult::Finite(f(b)),
            d => d,
        }
    }
}

/// Level of the Hilbert scale, restricted to `k ∈ {−2, …, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScaleIndex(i32);

impl ScaleIndex {
    pub const ALL: [ScaleIndex; 5] = [ScaleIndex(2), ScaleIndex(1), ScaleIndex(0), ScaleIndex(-1), ScaleIndex(-2)];

    pub fn new(k: i32) -> Result<Self> {
        if (-2..=2).contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::InvalidArgument(format!("scale index must lie in -2..=2, got {k}")))
        }
    }

    pub fn get(&self) -> i32 {
        self.0
    }
}

/// Coefficient sequence bound to a model. Head coefficients are stored
/// explicitly; a tail carries its time-zero law plus the symbolic phase
/// `exp(−i E_n t)` accumulated by evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub(crate) model: Arc<SpectrumModel>,
    pub(crate) head: Vec<(Mode, Complex64)>,
    pub(crate) tail: Option<PowerTail>,
    pub(crate) tail_time: f64,
    pub(crate) norm_sq: Bracket,
}

impl StateVector {
    /// Finite-support state with coefficients taken as given.
    pub fn from_modes(model: Arc<SpectrumModel>, head: Vec<(Mode, Complex64)>) -> Result<Self> {
        let spec = CoefficientSpec { head, tail: None };
        spec.validate(&model)?;
        let norm_sq = head_moment(&model, &spec.head, 0);
        Ok(Self { model, head: spec.head, tail: None, tail_time: 0.0, norm_sq })
    }

    pub fn model(&self) -> &SpectrumModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<SpectrumModel> {
        Arc::clone(&self.model)
    }

    pub fn head(&self) -> &[(Mode, Complex64)] {
        &self.head
    }

    pub fn tail(&self) -> Option<&PowerTail> {
        self.tail.as_ref()
    }

    /// Evolution time carried symbolically by the tail.
    pub fn tail_time(&self) -> f64 {
        self.tail_time
    }

    /// Certified bracket on `Σ |c_n|²`.
    pub fn norm_sq(&self) -> Bracket {
        self.norm_sq
    }

    pub fn is_finite_support(&self) -> bool {
        self.tail.is_none()
    }

    /// Largest explicitly stored mode.
    pub fn max_head_mode(&self) -> Option<Mode> {
        self.head.last().map(|e| e.0)
    }

    /// `c_n` at the state's current time; zero for absent modes.
    pub fn coefficient(&self, n: Mode) -> Complex64 {
        if let Ok(i) = self.head.binary_search_by_key(&n, |e| e.0) {
            return self.head[i].1;
        }
        match &self.tail {
            Some(t) if n >= t.start => {
                let e = self.model.energy_unchecked(n);
                Complex64::from_polar(1.0, -e * self.tail_time) * t.coefficient(n)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// All nonzero-by-construction modes `≤ max_mode` with their coefficients.
    pub fn coefficients_upto(&self, max_mode: Mode) -> Vec<(Mode, Complex64)> {
        let mut out: Vec<_> = self.head.iter().copied().filter(|e| e.0 <= max_mode).collect();
        if let Some(t) = &self.tail {
            out.extend((t.start..=max_mode).map(|n| (n, self.coefficient(n))));
        }
        out
    }

    /// Finite state rescaled to unit norm.
    pub fn renormalized(&self) -> Result<Self> {
        if !self.is_finite_support() {
            return Err(Error::UnsupportedOperation("renormalize tails through normalize()".into()));
        }
        let total = self.norm_sq.mid();
        if total <= 0.0 {
            return Err(Error::EmptyState);
        }
        let scale = total.sqrt().recip();
        let head = self.head.iter().map(|&(n, c)| (n, c * scale)).collect();
        Self::from_modes(self.model_arc(), head)
    }

    /// The spec this state was built from, rescaled, at time zero for the tail.
    pub fn to_spec(&self) -> CoefficientSpec {
        CoefficientSpec { head: self.head.clone(), tail: self.tail }
    }
}

fn head_moment(model: &SpectrumModel, head: &[(Mode, Complex64)], k: i32) -> Bracket {
    let sum: CompensatedSum = head.iter().map(|&(n, c)| model.energy_unchecked(n).powi(k) * c.norm_sqr()).collect();
    sum.bracket()
}

fn binomial(k: i32, j: i32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * f64::from(k - i) / f64::from(i + 1))
}

/// Enclosure of `n^{-2s} E_n^k` by power combinations for large `n`.
fn moment_bounds(law: &EnergyLaw, two_s: f64, k: i32, weight: f64) -> (PowerCombo, PowerCombo) {
    let p = law.power;
    if k >= 0 {
        let mut combo = PowerCombo::new();
        for j in 0..=k {
            let coef = weight * binomial(k, j) * law.coef.powi(j) * law.offset.powi(k - j);
            combo = combo.term(coef, p * f64::from(j) - two_s);
        }
        (combo.clone(), combo)
    } else {
        // (αn^p)^k (1 + kβ/(αn^p)) ≤ (αn^p + β)^k ≤ (αn^p)^k  for k < 0, β ≥ 0
        let lead = weight * law.coef.powi(k);
        let upper = PowerCombo::new().term(lead, p * f64::from(k) - two_s);
        let lower =
            upper.clone().term(weight * f64::from(k) * law.offset * law.coef.powi(k - 1), p * f64::from(k - 1) - two_s);
        (lower, upper)
    }
}

/// `Σ_{n≥from} |c_n|² E_n^k` over a power-law tail.
pub(crate) fn tail_moment(model: &SpectrumModel, tail: &PowerTail, k: i32, from: Mode, tol: f64) -> NormResult {
    let law = model.energy_law().expect("tails require an analytic spectrum");
    let from = from.max(tail.start);
    let two_s = 2.0 * tail.exponent;
    let witness = law.power * f64::from(k.max(0)) - two_s;
    if witness >= -1.0 {
        return NormResult::Divergent { witness };
    }
    let weight = tail.amplitude * tail.amplitude;
    if weight == 0.0 {
        return NormResult::Finite(Bracket::exact(0.0));
    }
    let (lower, upper) = moment_bounds(&law, two_s, k, weight);
    let bracket = certified_tail_sum(
        from,
        from,
        MAX_CUTOFF,
        tol,
        |n| weight * (n as f64).powf(-two_s) * law.at(n).powi(k),
        |n| {
            let lo = lower.sum_from(n).expect("convergent lower bound");
            let hi = upper.sum_from(n).expect("convergent upper bound");
            Bracket::new(lo.lo.max(0.0), hi.hi)
        },
    );
    NormResult::Finite(bracket)
}

/// Rescale a coefficient spec to unit norm. The relative width of the
/// norm bracket is at most [`NORMALIZE_TOL`] whatever `tol` asks for.
pub fn normalize(spec: &CoefficientSpec, model: Arc<SpectrumModel>, tol: f64) -> Result<StateVector> {
    spec.validate(&model)?;
    let head_sq = head_moment(&model, &spec.head, 0);
    let tail_sq = match &spec.tail {
        Some(t) => {
            // relative to a lower bound on the total
            let scale = head_sq.lo.max(0.0) + t.coefficient(t.start).powi(2);
            match tail_moment(&model, t, 0, t.start, tol.min(NORMALIZE_TOL) * scale) {
                NormResult::Finite(b) => b,
                NormResult::Divergent { .. } => return Err(Error::NotNormalizable(t.exponent)),
            }
        }
        None => Bracket::exact(0.0),
    };
    let total = head_sq.add(&tail_sq);
    if total.hi <= 0.0 {
        return Err(Error::EmptyState);
    }
    let mid = total.mid();
    let scale = mid.sqrt().recip();
    let head = spec.head.iter().map(|&(n, c)| (n, c * scale)).collect();
    let tail = spec.tail.map(|t| PowerTail { amplitude: t.amplitude * scale, ..t });
    Ok(StateVector { model, head, tail, tail_time: 0.0, norm_sq: Bracket::new(total.lo / mid, total.hi / mid) })
}

/// `‖f‖_k² = Σ E_n^k |c_n|²`.
pub fn scale_norm(f: &StateVector, k: ScaleIndex, tol: f64) -> NormResult {
    moment(f, k.get(), tol)
}

fn moment(f: &StateVector, k: i32, tol: f64) -> NormResult {
    let head = head_moment(&f.model, &f.head, k);
    match &f.tail {
        None => NormResult::Finite(head),
        Some(t) => tail_moment(&f.model, t, k, t.start, tol).map_bracket(|b| b.add(&head)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// Largest `k ∈ {2, 1, 0}` with `f ∈ H_k`.
    pub k_star: i32,
    /// `f ∈ D(Ĥ) = H₂`.
    pub in_domain: bool,
    /// `f ∈ H₁ = D(Ĥ^{1/2})`.
    pub finite_mean_energy: bool,
}

pub fn classify(f: &StateVector) -> Classification {
    // Membership does not depend on the requested width; use a loose one.
    let k_star = [2, 1].into_iter().find(|&k| moment(f, k, 1e-3).is_finite()).unwrap_or(0);
    Classification { k_star, in_domain: k_star == 2, finite_mean_energy: k_star >= 1 }
}

/// `‖f‖₁²`: the mean energy inside `D(Ĥ)`, the generalized
/// `(Ĥ^{1/2}f, Ĥ^{1/2}f)` on `H₁ \ D(Ĥ)`, divergent outside `H₁`.
pub fn mean_energy(f: &StateVector, tol: f64) -> NormResult {
    moment(f, 1, tol)
}

/// `(f, Ĥ⁻¹f)`; finite for every state because `E_n ≥ 1`.
pub fn inverse_energy_mean(f: &StateVector, tol: f64) -> NormResult {
    moment(f, -1, tol)
}

/// `Ĥψ` for a finite-support state (unnormalized).
pub fn apply_hamiltonian(psi: &StateVector) -> Result<StateVector> {
    if !psi.is_finite_support() {
        return Err(Error::UnsupportedOperation(
            "Ĥ is applied to finite-support states only; window the state first".into(),
        ));
    }
    let head = psi.head.iter().map(|&(n, c)| (n, c * psi.model.energy_unchecked(n))).collect();
    StateVector::from_modes(psi.model_arc(), head)
}

/// Projection `[E_b − E_a] f` onto modes with `a < E_n ≤ b`. The result is
/// unnormalized; its norm is available through [`StateVector::norm_sq`].
pub fn spectral_window(f: &StateVector, a: f64, b: f64) -> Result<StateVector> {
    if !(a < b) {
        return Err(Error::BadWindow { a, b });
    }
    let inside = |e: f64| a < e && e <= b;
    let mut head: Vec<_> = f.head.iter().copied().filter(|&(n, _)| inside(f.model.energy_unchecked(n))).collect();
    if let Some(t) = &f.tail {
        let law = f.model.energy_law().expect("tails require an analytic spectrum");
        let first = if a.is_finite() { law.first_at_least(a, t.start) } else { t.start };
        let mut n = first;
        while law.at(n) <= b {
            if n - first > MAX_WINDOW_MODES {
                return Err(Error::InvalidArgument(format!(
                    "window (a, b] = ({a}, {b}] selects more than {MAX_WINDOW_MODES} tail modes"
                )));
            }
            if inside(law.at(n)) {
                head.push((n, f.coefficient(n)));
            }
            n += 1;
        }
    }
    StateVector::from_modes(f.model_arc(), head)
}

/// `‖f − [E_b − E_a] f‖₀²`, the weight left outside the window.
pub fn window_remainder(f: &StateVector, a: f64, b: f64, tol: f64) -> Result<NormResult> {
    if !(a < b) {
        return Err(Error::BadWindow { a, b });
    }
    let outside = |e: f64| !(a < e && e <= b);
    let mut sum: CompensatedSum =
        f.head.iter().filter(|&&(n, _)| outside(f.model.energy_unchecked(n))).map(|&(_, c)| c.norm_sqr()).collect();
    let mut total = Bracket::exact(0.0);
    if let Some(t) = &f.tail {
        let law = f.model.energy_law().expect("tails require an analytic spectrum");
        // modes below the window
        let mut n = t.start;
        while n < t.start + MAX_WINDOW_MODES && law.at(n) <= a {
            sum.add(f.coefficient(n).norm_sqr());
            n += 1;
        }
        let above =
            if b.is_finite() { law.first_at_least(b, t.start) } else { return Ok(NormResult::Finite(sum.bracket())) };
        let above = if law.at(above) <= b { above + 1 } else { above };
        match tail_moment(&f.model, t, 0, above.max(n), tol) {
            NormResult::Finite(r) => total = r,
            d => return Ok(d),
        }
    }
    Ok(NormResult::Finite(sum.bracket().add(&total)))
}
