//! Simulation and verification suite for the generalized aggregation equation
//! with Newtonian potential,
//!
//! ```text
//!   d/dt rho + v . grad rho = sigma2 rho^2 + nu Lap rho,
//!   v = sigma1 grad Phi * rho,     (Lap Phi = delta)
//! ```
//!
//! on a periodic box standing in for R^d. The crate provides spectral field
//! machinery ([`field`]), velocity recovery and the 2D radial corrector
//! ([`velocity`]), a viscous IMEX solver with a Picard construction mode
//! ([`viscous`]), an inviscid semi-Lagrangian solver ([`inviscid`]),
//! grid-free reference solutions ([`oracles`]), norm/inequality checkers
//! ([`diagnostics`]), and a vanishing-viscosity study harness ([`harness`]).

pub mod config;
pub mod diagnostics;
pub mod field;
pub mod harness;
pub mod init;
pub mod inviscid;
pub mod oracles;
pub mod params;
pub mod run;
pub mod velocity;
pub mod viscous;

pub use field::{Grid, ScalarField, SpectralField, VectorField};
pub use params::SimParams;
