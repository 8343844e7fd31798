//! Fully resolved run description; a run is a pure function of it.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{MultiplierSpec, TableSegment};
use crate::spectral_model::{Mode, SpectrumModel};
use crate::state_space::{normalize, spectral_window, CoefficientSpec, StateVector};
use crate::trajectories::TrajectoryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Box,
    Oscillator,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelName,
    /// Box length.
    pub length: f64,
    /// Requested shift; `None` takes the model default.
    pub shift: Option<f64>,
    /// `n=E` pairs for table models.
    pub table: Option<Vec<(Mode, f64)>>,
    /// Shift actually used, after the automatic `E ≥ 1` adjustment.
    /// Filled in when the model is built; ignored on input.
    #[serde(default)]
    pub effective_shift: Option<f64>,
    #[serde(default)]
    pub applied_shift: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SpectrumModel> {
        match self.kind {
            ModelName::Box => SpectrumModel::particle_in_box(self.length, self.shift.unwrap_or(0.0)),
            ModelName::Oscillator => SpectrumModel::oscillator(self.shift),
            ModelName::Table => {
                let entries =
                    self.table.clone().ok_or_else(|| Error::InvalidModel("table model needs --table".into()))?;
                SpectrumModel::table(entries, self.shift.unwrap_or(0.0))
            }
        }
    }

    /// Record the shifts the built model ended up with.
    pub fn resolve(&mut self, model: &SpectrumModel) {
        self.effective_shift = Some(model.shift());
        self.applied_shift = Some(model.applied_shift());
    }
}

/// Parse `n=E,n=E,…`.
pub fn parse_table(s: &str) -> Result<Vec<(Mode, f64)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|item| {
            let bad = || Error::InvalidModel(format!("expected n=energy, got '{item}'"));
            let (n, e) = item.split_once('=').ok_or_else(bad)?;
            Ok((n.trim().parse().map_err(|_| bad())?, e.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Parse `zero`, `sine:α`, `clamp:C` or `table:lo:hi:value;…` (`inf` allowed).
pub fn parse_multiplier(s: &str) -> Result<MultiplierSpec> {
    let bad = || Error::InvalidArgument(format!("bad multiplier '{s}'"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    let s = s.trim();
    if s == "zero" {
        return Ok(MultiplierSpec::Zero);
    }
    let (name, body) = s.split_once(':').ok_or_else(bad)?;
    match name {
        "sine" => Ok(MultiplierSpec::Sine { amplitude: num(body)? }),
        "clamp" => Ok(MultiplierSpec::Clamp { cap: num(body)? }),
        "table" => body
            .split(';')
            .filter(|t| !t.trim().is_empty())
            .map(|seg| {
                let v: Vec<&str> = seg.split(':').collect();
                if v.len() != 3 {
                    return Err(bad());
                }
                let (lo, hi, value) = (num(v[0])?, num(v[1])?, num(v[2])?);
                if !(lo < hi) || !value.is_finite() {
                    return Err(bad());
                }
                Ok(TableSegment { lo, hi, value })
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiplierSpec::Table),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    Classify,
    Norms,
    Evolve { t: f64, truncation: Mode, points: usize },
    WeakCheck { t: f64, max_mode: Mode, steps: Vec<f64> },
    StrongCheck { t: f64, steps: Vec<f64> },
    Extension { multiplier: String, t: f64 },
    Trajectories { kind: TrajectoryKind, paths: usize, t_end: f64, dt: f64, record_every: usize },
    Fractal { t: f64, truncation: Mode, points: usize, levels: u32 },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Classify => "classify",
            CommandConfig::Norms => "norms",
            CommandConfig::Evolve { .. } => "evolve",
            CommandConfig::WeakCheck { .. } => "weak-check",
            CommandConfig::StrongCheck { .. } => "strong-check",
            CommandConfig::Extension { .. } => "extension",
            CommandConfig::Trajectories { .. } => "trajectories",
            CommandConfig::Fractal { .. } => "fractal",
        }
    }

    /// Commands whose main output is CSV.
    pub fn writes_csv(&self) -> bool {
        matches!(self, CommandConfig::Evolve { .. } | CommandConfig::Trajectories { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub model: ModelConfig,
    pub state: String,
    /// Spectral window `(a, b]` applied to the state before the command.
    pub window: Option<(f64, f64)>,
    pub seed: u64,
    pub tol: f64,
    /// Where to write; not part of the embedded provenance, so a replay
    /// into a different file produces identical bytes.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Build the model and the (windowed, renormalized) state, recording
    /// the resolved shifts in `self`.
    pub fn prepare(&mut self) -> Result<StateVector> {
        let model = Arc::new(self.model.build()?);
        self.model.resolve(&model);
        let spec: CoefficientSpec = self.state.parse()?;
        let f = normalize(&spec, model, self.tol)?;
        match self.window {
            Some((a, b)) => {
                let w = spectral_window(&f, a, b)?;
                if w.head().is_empty() {
                    return Err(Error::EmptyState);
                }
                w.renormalized()
            }
            None => Ok(f),
        }
    }
}
