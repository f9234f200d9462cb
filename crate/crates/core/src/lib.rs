//! Radial ground states of the double-power nonlinear Schrödinger equation
//! `Δu + g_μ(u) = 0` with `g_μ(u) = -u^p + u^q - μu`: shooting solver, mass
//! curves, linearized spectra, endpoint asymptotics and the variational layer.

pub mod asymptotics;
pub mod cli;
pub mod branch;
pub mod error;
pub mod nonlinearity;
pub mod numerics;
pub mod ode;
pub mod linearized;
pub mod profile;
pub mod quadrature;
pub mod shooting;
pub mod variational;

pub use error::{Error, Result};
pub use nonlinearity::{Mode, ProblemParams};
pub use profile::{RadialProfile, ShootParam, Tail};
pub use shooting::{ShootClass, ShootControls, ShootOutcome};
