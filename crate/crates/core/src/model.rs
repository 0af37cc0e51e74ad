//! Physical parameters of the oscillator and points of the complex position plane.
//!
//! All numerical work in this crate happens in oscillator units: positions are
//! measured in `X = αx`, times in `T = ω₀t`, and `ℏ = m = ω₀ = 1`. The model keeps
//! the SI inputs only so that results can be converted back at the boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::EigenError;

/// Reduced Planck constant in J·s (CODATA 2018, exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Electron rest mass in kg (CODATA 2018).
pub const ELECTRON_MASS_SI: f64 = 9.109_383_701_5e-31;

/// Highest eigenstate index the crate supports.
pub const MAX_LEVEL: u32 = 10;

/// A 1-D harmonic oscillator `V = ½mω₀²x²` in its `n`-th stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorModel {
    mass: f64,
    angular_frequency: f64,
    hbar: f64,
    level: u32,
}

impl OscillatorModel {
    pub fn new(mass: f64, angular_frequency: f64, hbar: f64, level: u32) -> Result<Self, EigenError> {
        for (name, v) in [("mass", mass), ("angular_frequency", angular_frequency), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EigenError::InvalidModel(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if level > MAX_LEVEL {
            return Err(EigenError::InvalidModel(format!("level {level} exceeds the supported maximum {MAX_LEVEL}")));
        }
        Ok(Self { mass, angular_frequency, hbar, level })
    }

    /// Oscillator units: `m = ω₀ = ℏ = 1`, so `α = 1`.
    pub fn natural(level: u32) -> Result<Self, EigenError> {
        Self::new(1.0, 1.0, 1.0, level)
    }

    /// SI parameters with the physical value of ℏ.
    pub fn si(mass_kg: f64, omega_rad_s: f64, level: u32) -> Result<Self, EigenError> {
        Self::new(mass_kg, omega_rad_s, HBAR_SI, level)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `α = sqrt(mω₀/ℏ)`, always derived from the stored inputs.
    pub fn alpha(&self) -> f64 {
        (self.mass * self.angular_frequency / self.hbar).sqrt()
    }

    /// `E = ℏω₀(n + ½)`.
    pub fn energy(&self) -> f64 {
        self.hbar * self.angular_frequency * (self.level as f64 + 0.5)
    }

    /// Energy in units of `ℏω₀`.
    pub fn reduced_energy(&self) -> f64 {
        self.level as f64 + 0.5
    }

    /// Converts a physical position (metres, or whatever length unit the inputs use)
    /// to the dimensionless point `X = αx`.
    pub fn to_reduced(&self, x: Complex64) -> ComplexPoint {
        ComplexPoint::from(x * self.alpha())
    }

    /// Physical position `x = X/α`.
    pub fn to_physical(&self, p: ComplexPoint) -> Complex64 {
        p.to_complex() / self.alpha()
    }

    /// Physical velocity `ẋ = (ω₀/α)·dX/dT`.
    pub fn velocity_to_physical(&self, reduced: Complex64) -> Complex64 {
        reduced * (self.angular_frequency / self.alpha())
    }

    /// Physical potential `½mω₀²x²` at a physical position.
    pub fn potential_physical(&self, x: Complex64) -> Complex64 {
        0.5 * self.mass * self.angular_frequency * self.angular_frequency * x * x
    }
}

/// A point `X = X_r + i·X_i` of the complex position plane, in oscillator units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub xr: f64,
    pub xi: f64,
}

impl ComplexPoint {
    pub const fn new(xr: f64, xi: f64) -> Self {
        Self { xr, xi }
    }

    pub const fn real(xr: f64) -> Self {
        Self { xr, xi: 0.0 }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.xr, self.xi)
    }

    pub fn is_finite(self) -> bool {
        self.xr.is_finite() && self.xi.is_finite()
    }

    pub fn conj(self) -> Self {
        Self::new(self.xr, -self.xi)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.xr - other.xr).hypot(self.xi - other.xi)
    }

    pub fn norm(self) -> f64 {
        self.xr.hypot(self.xi)
    }

    pub(crate) fn ensure_finite(self) -> Result<Self, EigenError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(EigenError::NonFinitePoint { re: self.xr, im: self.xi })
        }
    }
}

impl From<Complex64> for ComplexPoint {
    fn from(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(p: ComplexPoint) -> Self {
        p.to_complex()
    }
}

impl From<(f64, f64)> for ComplexPoint {
    fn from((xr, xi): (f64, f64)) -> Self {
        Self::new(xr, xi)
    }
}
