//! Complex quantum trajectories of harmonic-oscillator eigenstates and the
//! probability densities carried along them.
//!
//! All computation is in oscillator units `X = αx`, `T = ω₀t`, `ℏ = m = ω₀ = 1`;
//! `OscillatorModel` converts to and from physical units.

pub mod analysis;
pub mod eigenstate;
pub mod error;
pub mod hermite;
pub mod model;
pub mod ode;
pub mod poly;
pub mod probability;
pub mod properties;
pub mod quadrature;
pub mod region;
pub mod report;
pub mod trajectory;

pub use eigenstate::Eigenstate;
pub use model::{ComplexPoint, OscillatorModel};
pub use report::Report;
