//! Geometric phases for finite-dimensional quantum systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: state vectors, Hermitian matrices, eigendecomposition and the
//!   ray distance `δ = 2 arccos |⟨ψ|φ⟩|`.
//! - [`ray_geometry`]: inhomogeneous chart coordinates on `CP^n`, the
//!   Fubini-Study metric and shortest geodesics between rays.
//! - [`pancharatnam`]: phase alignment, the connection one-form, horizontal
//!   lifts, quantum jumps and Bargmann polygon phases.
//! - [`spectral_berry`]: parameter-dependent Hamiltonians, smooth eigen-sections,
//!   Berry phase and curvature, and the spin-J monopole model.
//! - [`dynamics_aa`]: Schrödinger integration, dynamical-phase removal and the
//!   Aharonov-Anandan phase of the rotating-field model.
//!
//! Units: `ħ = 1` everywhere.

pub mod dynamics_aa;
pub mod error;
pub mod hilbert;
pub mod pancharatnam;
pub mod ray_geometry;
pub mod spectral_berry;

pub use error::{Error, Result};
pub use hilbert::{HermitianMatrix, SpectralData, StateVector, UnitaryMatrix, C64};
pub use pancharatnam::{DiscreteRayPath, Gauge, PhaseResult};
