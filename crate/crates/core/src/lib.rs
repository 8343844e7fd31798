//! Spectral workbench for Schrödinger dynamics inside and beyond the domain
//! of the Hamiltonian.
//!
//! States are coefficient sequences over the eigenbasis of a strictly
//! positive model Hamiltonian. The crate classifies them on the Hilbert
//! scale, evolves them exactly, separates the weak (per-mode) from the
//! strong (vector-valued) Schrödinger equation, applies the extension of
//! `Ĥ − i d/dt` to multiplier evolutions, and integrates Bohmian and Nelson
//! trajectory ensembles for states inside `D(Ĥ)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod series;
pub mod spectral_model;
pub mod state_space;
pub mod trajectories;

pub use error::{Error, Result};
pub use series::Bracket;
pub use spectral_model::{Mode, ModelKind, QuadratureGrid, SpectrumModel};
pub use state_space::{
    classify, inverse_energy_mean, mean_energy, normalize, scale_norm, spectral_window, Classification,
    CoefficientSpec, NormResult, PhaseRule, PowerTail, ScaleIndex, StateVector, DEFAULT_TOL,
};
