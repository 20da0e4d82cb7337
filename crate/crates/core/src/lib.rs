//! Numerical laboratory for a one-parameter family of U(1)-invariant peakon
//! equations. The state variable is a complex momentum density m = u - u_xx
//! on a periodic interval; a single angle theta in [0, pi) interpolates
//! between a real modified Camassa-Holm regime (theta = 0) and a rotating
//! breather regime (theta = pi/2).
//!
//! The crate provides two independent evolution routes (a pseudospectral
//! method-of-lines solver and a Lagrangian particle method), exact traveling
//! wave references, conserved-quantity diagnostics, a Littlewood-Paley
//! frequency decomposition, and a finite-time blow-up predictor.

pub mod blowup;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod helmholtz;
pub mod littlewood_paley;
pub mod particle;
pub mod peakon;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Cplx, Scalar};

/// Double precision aliases; the default choice for experiments.
pub type Grid64 = grid::Grid<f64>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type ParticleEnsemble64 = particle::ParticleEnsemble<f64>;
pub type SpectralState64 = spectral::SpectralState<f64>;
pub type Peakon64 = peakon::Peakon<f64>;

/// Single precision aliases for quick, low-accuracy scans.
pub type Grid32 = grid::Grid<f32>;
pub type GridFunction32 = grid::GridFunction<f32>;
pub type ParticleEnsemble32 = particle::ParticleEnsemble<f32>;
pub type SpectralState32 = spectral::SpectralState<f32>;
pub type Peakon32 = peakon::Peakon<f32>;
