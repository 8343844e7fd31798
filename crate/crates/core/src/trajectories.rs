//! Bohmian and Nelson trajectory ensembles for states in `D(Ĥ)`.
//!
//! With `Ĥ = −D ∂² + V` and `D = ℏ/2m`, the current velocity is
//! `v = 2D·Im(ψ'/ψ)` and the osmotic velocity is `u = D·ρ'/ρ`; Nelson paths
//! diffuse with `ν = D` around the forward drift `b = v + u`. On the box
//! `D = 1`; on the oscillator `D = ½`.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{synthesize, uniform_grid};
use crate::spectral_model::{hermite_derivative, hermite_functions, Mode, ModelKind, SpectrumModel};
use crate::state_space::{classify, StateVector};

/// Densities at or below this are treated as nodes.
pub const NODE_GUARD: f64 = 1e-10;

/// Points in the grid used for inverse-CDF sampling and reference CDFs.
pub const DENSITY_GRID: usize = 1 << 14;

/// RK4 substeps taken when a path comes close to a node.
const SUBSTEPS: usize = 10;

fn require_trajectory_state(f: &StateVector) -> Result<()> {
    if let ModelKind::Table(_) = f.model().kind() {
        return Err(Error::UnsupportedOperation("table models carry no eigenfunctions".into()));
    }
    if !classify(f).in_domain {
        return Err(Error::DomainRequired("window it first".into()));
    }
    if !f.is_finite_support() {
        return Err(Error::UnsupportedOperation("trajectories need a finite-support state; window it first".into()));
    }
    if f.head().is_empty() {
        return Err(Error::EmptyState);
    }
    Ok(())
}

/// Velocity fields of a finite-support state at any time.
#[derive(Debug, Clone)]
pub struct VelocityField {
    model: Arc<SpectrumModel>,
    modes: Vec<(Mode, Complex64, f64)>,
    diffusion: f64,
}

/// Value of the fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub rho: f64,
    pub velocity: f64,
    pub osmotic: f64,
}

impl VelocityField {
    pub fn new(f: &StateVector) -> Result<Self> {
        require_trajectory_state(f)?;
        let model = f.model_arc();
        let modes = f.head().iter().map(|&(n, c)| (n, c, model.energy_unchecked(n))).collect();
        let diffusion = model.kinetic_coefficient();
        Ok(Self { model, modes, diffusion })
    }

    pub fn model(&self) -> &SpectrumModel {
        &self.model
    }

    /// `ν = ℏ/2m` in model units.
    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    /// Coefficients `c_n e^{−iE_n t}` in mode order.
    pub fn amplitudes(&self, t: f64) -> Vec<Complex64> {
        self.modes.iter().map(|&(_, c, e)| c * Complex64::from_polar(1.0, -e * t)).collect()
    }

    /// `(ψ(x), ψ'(x))` for amplitudes from [`Self::amplitudes`].
    pub fn wave(&self, amps: &[Complex64], x: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut psi, mut dpsi) = (zero, zero);
        match *self.model.kind() {
            ModelKind::Box { length } => {
                let k0 = std::f64::consts::PI / length;
                let norm = (2.0 / length).sqrt();
                for (&(n, _, _), a) in self.modes.iter().zip(amps) {
                    let k = k0 * n as f64;
                    let (s, c) = (k * x).sin_cos();
                    psi += a * (norm * s);
                    dpsi += a * (norm * k * c);
                }
            }
            ModelKind::Oscillator => {
                let top = self.modes.last().map(|m| m.0 as usize).unwrap_or(0);
                let mut h = vec![0.0; top + 2];
                hermite_functions(x, &mut h);
                for (&(n, _, _), a) in self.modes.iter().zip(amps) {
                    psi += a * h[n as usize];
                    dpsi += a * hermite_derivative(&h, n as usize);
                }
            }
            ModelKind::Table(_) => unreachable!("rejected at construction"),
        }
        (psi, dpsi)
    }

    /// Density and both velocities; the velocities are not guarded.
    pub fn point(&self, amps: &[Complex64], x: f64) -> FieldPoint {
        let (psi, dpsi) = self.wave(amps, x);
        let rho = psi.norm_sqr();
        let cross = psi.conj() * dpsi;
        FieldPoint {
            rho,
            velocity: 2.0 * self.diffusion * cross.im / rho,
            osmotic: 2.0 * self.diffusion * cross.re / rho,
        }
    }

    fn guarded(&self, t: f64, x: f64) -> Result<FieldPoint> {
        let p = self.point(&self.amplitudes(t), x);
        if p.rho <= NODE_GUARD {
            return Err(Error::NodeProximity { x, rho: p.rho });
        }
        Ok(p)
    }

    pub fn velocity(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.guarded(t, x)?.velocity)
    }

    pub fn osmotic(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.guarded(t, x)?.osmotic)
    }

    /// Forward drift `b = v + u`.
    pub fn drift(&self, t: f64, x: f64) -> Result<f64> {
        let p = self.guarded(t, x)?;
        Ok(p.velocity + p.osmotic)
    }

    fn reflect(&self, mut x: f64) -> f64 {
        if let Some((lo, hi)) = self.model.interval() {
            let width = hi - lo;
            // fold into one period of the reflected line
            let period = 2.0 * width;
            let mut r = (x - lo).rem_euclid(period);
            if r > width {
                r = period - r;
            }
            x = lo + r;
        }
        x
    }
}

/// Bohmian velocity `2D·Im(ψ'/ψ)` of `f` at `(t, x)`.
pub fn velocity(f: &StateVector, t: f64, x: f64) -> Result<f64> {
    VelocityField::new(f)?.velocity(t, x)
}

/// Tabulated `ρ(·, t)` with its cumulative distribution.
#[derive(Debug, Clone)]
pub struct DensityTable {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl DensityTable {
    pub fn new(f: &StateVector, t: f64, points: usize) -> Result<Self> {
        require_trajectory_state(f)?;
        let top = f.max_head_mode().unwrap_or(0);
        let grid = uniform_grid(f.model(), top, points);
        let samples = synthesize(f, t, &grid, top)?;
        let rho: Vec<f64> = samples.density().collect();
        let mut cdf = Vec::with_capacity(points);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..points {
            acc += 0.5 * (grid[i] - grid[i - 1]) * (rho[i] + rho[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::EmptyState);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { grid, cdf })
    }

    /// `F(x)` by linear interpolation, clamped to `[0, 1]` off the grid.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let w = (x - g[i]) / (g[i + 1] - g[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }

    /// `F⁻¹(u)` by linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let c = &self.cdf;
        let j = c.partition_point(|&v| v < u).clamp(1, c.len() - 1);
        let i = j - 1;
        let span = c[j] - c[i];
        let w = if span > 0.0 { ((u - c[i]) / span).clamp(0.0, 1.0) } else { 0.5 };
        self.grid[i] + w * (self.grid[j] - self.grid[i])
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// `n` positions drawn from `ρ(·, t)`, path `i` using stream `i` of `seed`.
pub fn sample_positions(f: &StateVector, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let table = DensityTable::new(f, t, DENSITY_GRID)?;
    Ok((0..n).into_par_iter().map(|i| table.quantile(path_rng(seed, i).random::<f64>())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Bohmian,
    Nelson,
}

/// Time grid of an integration: `steps` of size `dt` from `t0`, recorded
/// every `record_every` steps and at the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

impl TimeGrid {
    /// Steps of at most `dt_max` covering `[t0, t1]` exactly.
    pub fn covering(t0: f64, t1: f64, dt_max: f64, record_every: usize) -> Result<Self> {
        if !(t1 > t0) || !(dt_max > 0.0) || !dt_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad time span [{t0}, {t1}] with dt {dt_max}")));
        }
        let steps = ((t1 - t0) / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self { t0, dt: (t1 - t0) / steps as f64, steps, record_every: record_every.max(1) })
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    fn records(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == self.steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    /// `positions[j][i]` is path `i` at `times[j]`.
    pub positions: Vec<Vec<f64>>,
    pub n_paths: usize,
    pub seed: Option<u64>,
    pub dt: f64,
    /// Field evaluations that fell below ten times the node guard.
    pub node_guard_hits: u64,
    /// Paths that reached the node guard, in path order.
    pub breached: Vec<usize>,
    /// Output times at which non-breached Bohmian paths left their
    /// initial order.
    pub crossings: usize,
}

impl TrajectoryEnsemble {
    pub fn breach_fraction(&self) -> f64 {
        self.breached.len() as f64 / self.n_paths as f64
    }

    /// Index of the recorded time closest to `t`, if within rounding.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn path(&self, i: usize) -> Vec<f64> {
        self.positions.iter().map(|slice| slice[i]).collect()
    }

    /// CSV with columns `t,path_id,x`, time-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,path_id,x")?;
        for (t, slice) in self.times.iter().zip(&self.positions) {
            for (i, x) in slice.iter().enumerate() {
                writeln!(w, "{t:.16e},{i},{x:.16e}")?;
            }
        }
        Ok(())
    }
}

fn order_of(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    idx
}

struct BohmianStep {
    x: f64,
    hits: u64,
    breached: bool,
}

fn rk4(field: &VelocityField, stages: [&[Complex64]; 3], x: f64, dt: f64) -> (f64, f64) {
    let p1 = field.point(stages[0], x);
    let p2 = field.point(stages[1], x + 0.5 * dt * p1.velocity);
    let p3 = field.point(stages[1], x + 0.5 * dt * p2.velocity);
    let p4 = field.point(stages[2], x + dt * p3.velocity);
    let next = x + dt / 6.0 * (p1.velocity + 2.0 * p2.velocity + 2.0 * p3.velocity + p4.velocity);
    let rho = p1.rho.min(p2.rho).min(p3.rho).min(p4.rho);
    (next, rho)
}

fn bohmian_step(field: &VelocityField, stages: [&[Complex64]; 3], t: f64, x: f64, dt: f64) -> BohmianStep {
    let (next, rho) = rk4(field, stages, x, dt);
    if rho >= 10.0 * NODE_GUARD && next.is_finite() {
        return BohmianStep { x: field.reflect(next), hits: 0, breached: false };
    }
    let h = dt / SUBSTEPS as f64;
    let mut x = x;
    for j in 0..SUBSTEPS {
        let s = t + j as f64 * h;
        let (a0, a1, a2) = (field.amplitudes(s), field.amplitudes(s + 0.5 * h), field.amplitudes(s + h));
        let (next, rho) = rk4(field, [&a0, &a1, &a2], x, h);
        if !(rho > NODE_GUARD) || !next.is_finite() {
            return BohmianStep { x, hits: 1, breached: true };
        }
        x = field.reflect(next);
    }
    BohmianStep { x, hits: 1, breached: false }
}

/// Integrate `ẋ = v(x, t)` from each of `x0s` with classic RK4.
///
/// Steps whose stages come within ten times the node guard are redone as
/// ten substeps; a path that still reaches the guard is frozen and listed
/// in `breached`.
pub fn integrate_bohmian(f: &StateVector, x0s: &[f64], time: TimeGrid) -> Result<TrajectoryEnsemble> {
    let field = VelocityField::new(f)?;
    let initial = field.amplitudes(time.t0);
    for &x in x0s {
        if let Some((lo, hi)) = field.model.interval() {
            if !(lo..=hi).contains(&x) {
                return Err(Error::DomainError { x, lo, hi });
            }
        }
        let rho = field.point(&initial, x).rho;
        if !(rho > NODE_GUARD) {
            return Err(Error::NodeProximity { x, rho });
        }
    }
    let order = order_of(x0s);
    let mut xs = x0s.to_vec();
    let mut frozen = vec![false; xs.len()];
    let mut times = vec![time.t0];
    let mut positions = vec![xs.clone()];
    let mut hits = 0;
    let mut crossings = 0;
    for step in 0..time.steps {
        let t = time.time(step);
        let a0 = field.amplitudes(t);
        let a1 = field.amplitudes(t + 0.5 * time.dt);
        let a2 = field.amplitudes(t + time.dt);
        hits += xs
            .par_iter_mut()
            .zip(frozen.par_iter_mut())
            .map(|(x, stop)| {
                if *stop {
                    return 0;
                }
                let r = bohmian_step(&field, [&a0, &a1, &a2], t, *x, time.dt);
                *x = r.x;
                *stop = r.breached;
                r.hits
            })
            .sum::<u64>();
        if time.records(step + 1) {
            let live: Vec<f64> = order.iter().filter(|&&i| !frozen[i]).map(|&i| xs[i]).collect();
            if live.windows(2).any(|w| w[1] < w[0]) {
                crossings += 1;
            }
            times.push(time.time(step + 1));
            positions.push(xs.clone());
        }
    }
    let breached = frozen.iter().enumerate().filter(|e| *e.1).map(|e| e.0).collect();
    Ok(TrajectoryEnsemble {
        kind: TrajectoryKind::Bohmian,
        times,
        positions,
        n_paths: x0s.len(),
        seed: None,
        dt: time.dt,
        node_guard_hits: hits,
        breached,
        crossings,
    })
}

/// Euler–Maruyama sample paths of `dX = b dt + √(2ν) dW` started from
/// `ρ(·, t0)`, reflected at the walls of a box.
///
/// Path `i` draws its start and all of its increments from stream `i` of
/// a ChaCha generator keyed by `seed`, so the ensemble does not depend on
/// how paths are scheduled across threads. A step at which the density is
/// at the node guard or the drift is not finite marks the path as
/// breached and moves it by diffusion alone.
pub fn sample_nelson(f: &StateVector, n_paths: usize, time: TimeGrid, seed: u64) -> Result<TrajectoryEnsemble> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let field = VelocityField::new(f)?;
    let table = DensityTable::new(f, time.t0, DENSITY_GRID)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..n_paths).map(|i| path_rng(seed, i)).collect();
    let mut xs: Vec<f64> = rngs.iter_mut().map(|r| table.quantile(r.random::<f64>())).collect();
    let mut breached = vec![false; n_paths];
    let noise = (2.0 * field.diffusion * time.dt).sqrt();
    let mut times = vec![time.t0];
    let mut positions = vec![xs.clone()];
    let mut hits = 0;
    for step in 0..time.steps {
        let amps = field.amplitudes(time.time(step));
        hits += xs
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .zip(breached.par_iter_mut())
            .map(|((x, rng), hit)| {
                let p = field.point(&amps, *x);
                let drift = p.velocity + p.osmotic;
                let near = u64::from(p.rho < 10.0 * NODE_GUARD);
                let xi: f64 = rng.sample(StandardNormal);
                let det = if p.rho > NODE_GUARD && drift.is_finite() {
                    drift * time.dt
                } else {
                    *hit = true;
                    0.0
                };
                *x = field.reflect(*x + det + noise * xi);
                near
            })
            .sum::<u64>();
        if time.records(step + 1) {
            times.push(time.time(step + 1));
            positions.push(xs.clone());
        }
    }
    Ok(TrajectoryEnsemble {
        kind: TrajectoryKind::Nelson,
        times,
        positions,
        n_paths,
        seed: Some(seed),
        dt: time.dt,
        node_guard_hits: hits,
        breached: breached.iter().enumerate().filter(|e| *e.1).map(|e| e.0).collect(),
        crossings: 0,
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS distance between the ensemble at time `t` and `ρ(·, t)`.
pub fn equivariance_statistic(ensemble: &TrajectoryEnsemble, f: &StateVector, t: f64) -> Result<f64> {
    let j = ensemble
        .time_index(t)
        .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is not a recorded ensemble time")))?;
    let table = DensityTable::new(f, t, DENSITY_GRID)?;
    Ok(ks_distance(&ensemble.positions[j], |x| table.cdf_at(x)))
}

/// Numbers reported next to an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub kind: TrajectoryKind,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: Option<u64>,
    pub recorded_times: usize,
    pub node_guard_hits: u64,
    pub breach_count: usize,
    pub breach_fraction: f64,
    pub crossings: usize,
    /// `(t, KS distance to ρ(·, t))` at every recorded time.
    pub ks: Vec<(f64, f64)>,
}

pub fn summarize(ensemble: &TrajectoryEnsemble, f: &StateVector) -> Result<EnsembleSummary> {
    let ks =
        ensemble.times.iter().map(|&t| Ok((t, equivariance_statistic(ensemble, f, t)?))).collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSummary {
        kind: ensemble.kind,
        n_paths: ensemble.n_paths,
        dt: ensemble.dt,
        seed: ensemble.seed,
        recorded_times: ensemble.times.len(),
        node_guard_hits: ensemble.node_guard_hits,
        breach_count: ensemble.breached.len(),
        breach_fraction: ensemble.breach_fraction(),
        crossings: ensemble.crossings,
        ks,
    })
}
