//! Strictly positive model Hamiltonians with pure point spectrum.
//!
//! Units are `ℏ = 1`. The box uses `2m = 1`, so `Ĥ = −d²/dx² + σ` on
//! `[0, L]` with Dirichlet walls. The oscillator is `Ĥ = (−d²/dx² + x²)/2 + σ`
//! with Hermite-function eigenstates. Every model is shifted at
//! construction so that its lowest eigenvalue is at least 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an eigenmode.
pub type Mode = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Box {
        length: f64,
    },
    Oscillator,
    /// Explicit `(n, E_n)` pairs; no eigenfunctions.
    Table(Vec<(Mode, f64)>),
}

/// `E_n = coef · n^power + offset` for the analytic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLaw {
    pub coef: f64,
    pub power: f64,
    pub offset: f64,
}

impl EnergyLaw {
    pub fn at(&self, n: Mode) -> f64 {
        self.coef * (n as f64).powf(self.power) + self.offset
    }

    /// Smallest `n ≥ from` with `E_n ≥ threshold`.
    pub fn first_at_least(&self, threshold: f64, from: Mode) -> Mode {
        if self.at(from) >= threshold {
            return from;
        }
        let guess = ((threshold - self.offset) / self.coef).max(0.0).powf(1.0 / self.power);
        let mut n = (guess.floor() as Mode).max(from);
        while self.at(n) < threshold {
            n += 1;
        }
        while n > from && self.at(n - 1) >= threshold {
            n -= 1;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    kind: ModelKind,
    requested_shift: f64,
    shift: f64,
}

impl SpectrumModel {
    /// Particle in a box on `[0, length]`.
    pub fn particle_in_box(length: f64, shift: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidModel(format!("box length must be positive, got {length}")));
        }
        Self::build(ModelKind::Box { length }, shift)
    }

    /// Harmonic oscillator. `None` uses the default shift of ½, which puts
    /// the ground state at exactly 1.
    pub fn oscillator(shift: Option<f64>) -> Result<Self> {
        Self::build(ModelKind::Oscillator, shift.unwrap_or(0.5))
    }

    pub fn table(entries: Vec<(Mode, f64)>, shift: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidModel("energy table is empty".into()));
        }
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidModel("table mode indices must be strictly increasing".into()));
            }
            if w[1].1 <= w[0].1 {
                return Err(Error::InvalidModel("table energies must be strictly increasing".into()));
            }
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::InvalidModel("table energies must be finite".into()));
        }
        Self::build(ModelKind::Table(entries), shift)
    }

    fn build(kind: ModelKind, shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::InvalidModel(format!("shift must be nonnegative, got {shift}")));
        }
        let mut model = Self { kind, requested_shift: shift, shift };
        let lowest = model.raw_energy(model.first_mode());
        if lowest + shift < 1.0 {
            model.shift = 1.0 - lowest;
        }
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Box { .. } => "box",
            ModelKind::Oscillator => "oscillator",
            ModelKind::Table(_) => "table",
        }
    }

    /// Effective shift σ added to every eigenvalue.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn requested_shift(&self) -> f64 {
        self.requested_shift
    }

    /// Extra shift applied on top of the requested one to reach `E ≥ 1`.
    pub fn applied_shift(&self) -> f64 {
        self.shift - self.requested_shift
    }

    pub fn first_mode(&self) -> Mode {
        match &self.kind {
            ModelKind::Box { .. } => 1,
            ModelKind::Oscillator => 0,
            ModelKind::Table(t) => t[0].0,
        }
    }

    /// Configuration space interval, when bounded.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::Box { length } => Some((0.0, length)),
            _ => None,
        }
    }

    /// Coefficient `D` in `Ĥ = −D d²/dx² + V`; equals `ℏ/2m`.
    pub fn kinetic_coefficient(&self) -> f64 {
        match self.kind {
            ModelKind::Oscillator => 0.5,
            _ => 1.0,
        }
    }

    pub fn energy_law(&self) -> Option<EnergyLaw> {
        match self.kind {
            ModelKind::Box { length } => {
                Some(EnergyLaw { coef: (PI / length).powi(2), power: 2.0, offset: self.shift })
            }
            ModelKind::Oscillator => Some(EnergyLaw { coef: 1.0, power: 1.0, offset: 0.5 + self.shift }),
            ModelKind::Table(_) => None,
        }
    }

    fn raw_energy(&self, n: Mode) -> f64 {
        match &self.kind {
            ModelKind::Box { length } => (n as f64 * PI / length).powi(2),
            ModelKind::Oscillator => n as f64 + 0.5,
            ModelKind::Table(t) => t.iter().find(|e| e.0 == n).map(|e| e.1).unwrap_or(f64::NAN),
        }
    }

    pub fn is_valid_mode(&self, n: Mode) -> bool {
        match &self.kind {
            ModelKind::Box { .. } => n >= 1,
            ModelKind::Oscillator => true,
            ModelKind::Table(t) => t.binary_search_by_key(&n, |e| e.0).is_ok(),
        }
    }

    pub fn check_mode(&self, n: Mode) -> Result<()> {
        if self.is_valid_mode(n) {
            Ok(())
        } else {
            let reason = match self.kind {
                ModelKind::Box { .. } => "box modes start at n = 1".to_string(),
                ModelKind::Table(_) => "mode is not in the energy table".to_string(),
                ModelKind::Oscillator => unreachable!(),
            };
            Err(Error::IndexError { index: n, reason })
        }
    }

    /// Eigenvalue `E_n` including the shift.
    pub fn energy(&self, n: Mode) -> Result<f64> {
        self.check_mode(n)?;
        Ok(self.energy_unchecked(n))
    }

    /// Eigenvalue for an index already known to be valid.
    pub fn energy_unchecked(&self, n: Mode) -> f64 {
        match self.energy_law() {
            Some(law) => law.at(n),
            None => self.raw_energy(n) + self.shift,
        }
    }

    /// Largest mode present in a table model; `None` for unbounded spectra.
    pub fn last_mode(&self) -> Option<Mode> {
        match &self.kind {
            ModelKind::Table(t) => t.last().map(|e| e.0),
            _ => None,
        }
    }

    fn require_functions(&self) -> Result<()> {
        if let ModelKind::Table(_) = self.kind {
            return Err(Error::UnsupportedOperation("table models carry no eigenfunctions".into()));
        }
        Ok(())
    }

    fn check_position(&self, x: f64) -> Result<()> {
        if let ModelKind::Box { length } = self.kind {
            if !(0.0..=length).contains(&x) {
                return Err(Error::DomainError { x, lo: 0.0, hi: length });
            }
        }
        if !x.is_finite() {
            return Err(Error::DomainError { x, lo: f64::NEG_INFINITY, hi: f64::INFINITY });
        }
        Ok(())
    }

    /// Normalized eigenfunction `φ_n(x)`.
    pub fn eigenfunction(&self, n: Mode, x: f64) -> Result<f64> {
        Ok(self.eigenfunction_with_derivative(n, x)?.0)
    }

    /// `(φ_n(x), φ_n'(x))`.
    pub fn eigenfunction_with_derivative(&self, n: Mode, x: f64) -> Result<(f64, f64)> {
        self.require_functions()?;
        self.check_mode(n)?;
        self.check_position(x)?;
        match self.kind {
            ModelKind::Box { length } => {
                let k = n as f64 * PI / length;
                let norm = (2.0 / length).sqrt();
                let (s, c) = (k * x).sin_cos();
                Ok((norm * s, norm * k * c))
            }
            ModelKind::Oscillator => {
                let mut values = vec![0.0; n as usize + 2];
                hermite_functions(x, &mut values);
                let n = n as usize;
                Ok((values[n], hermite_derivative(&values, n)))
            }
            ModelKind::Table(_) => unreachable!(),
        }
    }

    /// `|∫ φ_n φ_m − δ_nm|` evaluated on `grid`.
    pub fn orthonormality_defect(&self, n: Mode, m: Mode, grid: &QuadratureGrid) -> Result<f64> {
        self.require_functions()?;
        let values = grid
            .points()
            .map(|x| Ok(self.eigenfunction(n, x)? * self.eigenfunction(m, x)?))
            .collect::<Result<Vec<f64>>>()?;
        let integral = grid.integrate(&values);
        let delta = if n == m { 1.0 } else { 0.0 };
        Ok((integral - delta).abs())
    }

    /// Default quadrature interval: the box itself, or a window around the
    /// classically allowed region of the highest oscillator mode in use.
    pub fn default_interval(&self, max_mode: Mode) -> (f64, f64) {
        match self.kind {
            ModelKind::Box { length } => (0.0, length),
            _ => {
                let r = (2.0 * max_mode as f64 + 1.0).sqrt() + 8.0;
                (-r, r)
            }
        }
    }
}

/// Fill `out[k] = ψ_k(x)` for the Hermite functions
/// `ψ_k(x) = (2^k k! √π)^{-1/2} H_k(x) e^{−x²/2}` using the normalized
/// three-term recurrence.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = x * (2.0 / (nf + 1.0)).sqrt() * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `ψ_n' = √(n/2) ψ_{n−1} − √((n+1)/2) ψ_{n+1}`; `values` must hold index `n + 1`.
pub fn hermite_derivative(values: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    let down = if n == 0 { 0.0 } else { (nf / 2.0).sqrt() * values[n - 1] };
    down - ((nf + 1.0) / 2.0).sqrt() * values[n + 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    Trapezoid,
    Simpson,
}

/// Uniform grid on `[a, b]` with `points ≥ 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub a: f64,
    pub b: f64,
    pub points: usize,
    pub rule: QuadratureRule,
}

impl QuadratureGrid {
    pub fn trapezoid(a: f64, b: f64, points: usize) -> Self {
        assert!(points >= 2 && b > a);
        Self { a, b, points, rule: QuadratureRule::Trapezoid }
    }

    pub fn simpson(a: f64, b: f64, points: usize) -> Self {
        assert!(points >= 3 && points % 2 == 1 && b > a, "Simpson needs an odd point count");
        Self { a, b, points, rule: QuadratureRule::Simpson }
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.point(i))
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.points);
        let h = self.step();
        let last = self.points - 1;
        match self.rule {
            QuadratureRule::Trapezoid => {
                let inner: f64 = values[1..last].iter().sum();
                h * (inner + 0.5 * (values[0] + values[last]))
            }
            QuadratureRule::Simpson => {
                let mut s = values[0] + values[last];
                for (i, v) in values.iter().enumerate().take(last).skip(1) {
                    s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                s * h / 3.0
            }
        }
    }
}
