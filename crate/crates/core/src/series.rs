//! Certified summation of positive series.
//!
//! A series is split into an explicitly summed prefix and a remainder
//! `Σ_{n≥N}` that is enclosed between two finite combinations of power
//! sums `Σ_{n≥N} n^e`. Each power sum is bracketed with the Euler–Maclaurin
//! formula truncated after the `B₂` term; for `x^{-q}` every derivative has
//! a fixed sign, so the remainder lies between zero and the first omitted
//! (`B₄`) term.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` known to contain a real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted bracket [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn exact(value: f64) -> Self {
        Self { lo: value, hi: value }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn scale(&self, factor: f64) -> Self {
        if factor >= 0.0 {
            Self::new(self.lo * factor, self.hi * factor)
        } else {
            Self::new(self.hi * factor, self.lo * factor)
        }
    }

    pub fn add(&self, other: &Bracket) -> Self {
        Self::new(self.lo + other.lo, self.hi + other.hi)
    }

    /// Bracket of the square root of a nonnegative quantity.
    pub fn sqrt(&self) -> Self {
        Self::new(self.lo.max(0.0).sqrt(), self.hi.max(0.0).sqrt())
    }

    /// Widen outward by an absolute amount.
    pub fn widen(&self, slack: f64) -> Self {
        Self::new(self.lo - slack, self.hi + slack)
    }
}

/// Neumaier-compensated running sum. Terms are added in call order, so the
/// result is reproducible for a fixed sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    magnitude: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += term.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of absolute values of the added terms, used for rounding slack.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Bracket around the value allowing a few ulps per unit of magnitude
    /// for rounding in the terms themselves.
    pub fn bracket(&self) -> Bracket {
        let v = self.value();
        Bracket::new(v, v).widen(8.0 * f64::EPSILON * self.magnitude)
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for t in iter {
            s.add(t);
        }
        s
    }
}

/// Bracket for `Σ_{n≥start} n^{-q}` with `q > 1` and `start ≥ 1`.
pub fn power_sum_from(start: u64, q: f64) -> Bracket {
    assert!(q > 1.0, "power sum with q = {q} diverges");
    assert!(start >= 1);
    let n = start as f64;
    let integral = n.powf(1.0 - q) / (q - 1.0);
    let f = n.powf(-q);
    let upper = integral + 0.5 * f + q * n.powf(-q - 1.0) / 12.0;
    let b4 = q * (q + 1.0) * (q + 2.0) * n.powf(-q - 3.0) / 720.0;
    Bracket::new(upper - b4, upper).widen(4.0 * f64::EPSILON * upper)
}

/// A finite linear combination `Σ coef · n^exponent`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerCombo {
    terms: Vec<(f64, f64)>,
}

impl PowerCombo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, coef: f64, exponent: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((coef, exponent));
        }
        self
    }

    /// Largest exponent carrying a nonzero coefficient.
    pub fn leading_exponent(&self) -> Option<f64> {
        self.terms.iter().map(|&(_, e)| e).reduce(f64::max)
    }

    pub fn converges(&self) -> bool {
        self.terms.iter().all(|&(_, e)| e < -1.0)
    }

    /// Bracket for `Σ_{n≥start}` of the combination; `None` when some power
    /// sum diverges.
    pub fn sum_from(&self, start: u64) -> Option<Bracket> {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for &(coef, e) in &self.terms {
            if e >= -1.0 {
                return None;
            }
            let b = power_sum_from(start, -e).scale(coef);
            lo += b.lo;
            hi += b.hi;
        }
        Some(Bracket::new(lo, hi))
    }
}

/// Largest cutoff tried before giving up on the requested width.
pub const MAX_CUTOFF: u64 = 1 << 26;

/// Certified sum of `Σ_{n≥start} term(n)`.
///
/// `bounds(N)` must enclose the remainder from any cutoff `N ≥ min_cutoff`.
/// The explicit prefix grows by doubling until the remainder bracket is
/// narrower than `tol / 2` or the cutoff reaches `max_cutoff`; the returned
/// bracket reports whatever width was achieved.
pub fn certified_tail_sum<T, B>(start: u64, min_cutoff: u64, max_cutoff: u64, tol: f64, term: T, bounds: B) -> Bracket
where
    T: Fn(u64) -> f64,
    B: Fn(u64) -> Bracket,
{
    let mut cutoff = start.max(min_cutoff).max(start + 32);
    let mut prefix = CompensatedSum::new();
    let mut next = start;
    loop {
        while next < cutoff {
            prefix.add(term(next));
            next += 1;
        }
        let rem = bounds(cutoff);
        if rem.width() <= 0.5 * tol || cutoff >= max_cutoff {
            return prefix.bracket().add(&rem);
        }
        cutoff = (cutoff * 2).min(max_cutoff);
    }
}
