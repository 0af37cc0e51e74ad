//! Oscillator eigenstates, the complex velocity field they generate, and the
//! geometry of that field: poles, stagnation points and the stream invariant
//! whose level curves are the trajectories.
//!
//! In oscillator units the `n`-th eigenstate is `Ψ_n(X) = C_n·H_n(X)·exp(−X²/2)`
//! and the equation of motion `ẋ = (ℏ/im)·Ψ'/Ψ` becomes
//!
//! ```text
//! dX/dT = −i·(H_n'(X)/H_n(X) − X) = −i·P(X)/H_n(X),   P = H_n' − X·H_n.
//! ```
//!
//! Poles of the field are the nodes of `Ψ_n` (real Hermite roots); stagnation
//! points are the `n + 1` real roots of `P`. Because `dT/dX = i·H_n/P` and the
//! partial-fraction weights `c_j = H_n(s_j)/P'(s_j)` are real, the quantity
//! `ln G = −Σ c_j·ln|X − s_j|` is constant along every trajectory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::EigenError;
use crate::hermite;
use crate::model::{ComplexPoint, OscillatorModel};
use crate::poly::Polynomial;

/// Relative threshold of the pole guard: `|H_n(X)| < POLE_GUARD·max(1, |X|^n)`.
pub const POLE_GUARD: f64 = 1e-12;

/// Poles, stagnation points and separatrix level of the velocity field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStructure {
    /// Nodes of `Ψ_n`, ascending along the real axis.
    pub poles: Vec<ComplexPoint>,
    /// Zeros of the velocity field, ascending along the real axis.
    pub stagnation_points: Vec<ComplexPoint>,
    /// Partial-fraction weights of `H_n/P` at each stagnation point.
    pub weights: Vec<f64>,
    /// Stream invariant evaluated at each pole.
    pub pole_levels: Vec<f64>,
    /// Highest pole level; `None` for the ground state.
    pub separatrix_level: Option<f64>,
}

/// Maximal real-axis interval on which the stream invariant lies below a level.
///
/// Each such interval is the real-axis chord of exactly one closed orbit of that
/// level; the orbit is a nest iff the chord contains a pole.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelChord {
    pub left: f64,
    pub right: f64,
    pub poles_inside: usize,
}

impl LevelChord {
    pub fn is_nest(&self) -> bool {
        self.poles_inside > 0
    }
}

/// An oscillator eigenstate with its precomputed field geometry.
#[derive(Debug, Clone)]
pub struct Eigenstate {
    model: OscillatorModel,
    log_norm: f64,
    hermite_poly: Polynomial,
    numerator: Polynomial,
    structure: FieldStructure,
    centers: Vec<f64>,
    poles: Vec<f64>,
    /// Log-level up to which the neighbourhood of each stagnation point is a subnest.
    basin_limits: Vec<f64>,
}

impl Eigenstate {
    pub fn new(model: OscillatorModel) -> Result<Self, EigenError> {
        let n = model.level();
        let hermite_poly = Polynomial::new(hermite::coefficients(n));
        let numerator = hermite_poly.derivative().sub(&hermite_poly.shift_up());
        let poles = hermite::real_roots(n);

        let mut centers = Vec::with_capacity(n as usize + 1);
        for z in numerator.roots()? {
            if z.im.abs() > 1e-8 * (1.0 + z.re.abs()) {
                return Err(EigenError::RootFindingFailure(format!(
                    "stagnation point {z} is off the real axis"
                )));
            }
            centers.push(polish_real_root(&numerator, z.re));
        }
        centers.sort_by(f64::total_cmp);
        if centers.len() != n as usize + 1 {
            return Err(EigenError::RootFindingFailure(format!(
                "expected {} stagnation points, found {}",
                n + 1,
                centers.len()
            )));
        }
        let dnum = numerator.derivative();
        let weights: Vec<f64> = centers
            .iter()
            .map(|&s| hermite_poly.eval_real(s) / dnum.eval_real(s))
            .collect();
        if weights.iter().any(|w| !(*w < 0.0)) {
            return Err(EigenError::RootFindingFailure(
                "partial-fraction weights must all be negative".into(),
            ));
        }

        let log_norm = -0.5
            * (n as f64 * 2f64.ln() + ln_factorial(n) + 0.5 * std::f64::consts::PI.ln());

        let mut state = Self {
            model,
            log_norm,
            hermite_poly,
            numerator,
            structure: FieldStructure {
                poles: poles.iter().map(|&p| ComplexPoint::real(p)).collect(),
                stagnation_points: centers.iter().map(|&s| ComplexPoint::real(s)).collect(),
                weights,
                pole_levels: Vec::new(),
                separatrix_level: None,
            },
            centers,
            poles,
            basin_limits: Vec::new(),
        };

        let pole_log_levels: Vec<f64> = state.poles.iter().map(|&p| state.log_level_real(p)).collect();
        state.structure.pole_levels = pole_log_levels.iter().map(|&l| state.invariant_from_log_level(l)).collect();
        state.structure.separatrix_level = pole_log_levels
            .iter()
            .copied()
            .reduce(f64::max)
            .map(|l| state.invariant_from_log_level(l));
        // Centre j sits between poles j−1 and j (when they exist).
        state.basin_limits = (0..state.centers.len())
            .map(|j| {
                let left = j.checked_sub(1).and_then(|k| pole_log_levels.get(k)).copied();
                let right = pole_log_levels.get(j).copied();
                match (left, right) {
                    (Some(a), Some(b)) => a.min(b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => f64::INFINITY,
                }
            })
            .collect();
        Ok(state)
    }

    pub fn natural(level: u32) -> Result<Self, EigenError> {
        Self::new(OscillatorModel::natural(level)?)
    }

    pub fn model(&self) -> &OscillatorModel {
        &self.model
    }

    pub fn level(&self) -> u32 {
        self.model.level()
    }

    pub fn field_structure(&self) -> &FieldStructure {
        &self.structure
    }

    /// Pole positions on the real axis.
    pub fn pole_positions(&self) -> &[f64] {
        &self.poles
    }

    /// Stagnation-point positions on the real axis.
    pub fn center_positions(&self) -> &[f64] {
        &self.centers
    }

    /// `ln C_n` for the real-line normalisation `∫|Ψ_n|² dX = 1`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// `P(X) = H_n'(X) − X·H_n(X)`.
    pub fn velocity_numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn hermite_polynomial(&self) -> &Polynomial {
        &self.hermite_poly
    }

    /// `Ψ_n(X)`.
    pub fn psi(&self, p: ComplexPoint) -> Result<Complex64, EigenError> {
        let z = p.ensure_finite()?.to_complex();
        let h = hermite::hermite(self.level(), z);
        Ok(self.log_norm.exp() * h * (-0.5 * z * z).exp())
    }

    /// `(Ψ, Ψ', Ψ'')` from the closed forms `Ψ' = C(H' − XH)e`, `Ψ'' = C(H'' − 2XH' + (X² − 1)H)e`.
    pub fn psi_derivatives(&self, p: ComplexPoint) -> Result<[Complex64; 3], EigenError> {
        let z = p.ensure_finite()?.to_complex();
        let n = self.level();
        let h = hermite::hermite(n, z);
        let dh = hermite::hermite_derivative(n, z);
        let d2h = if n >= 2 {
            4.0 * (n * (n - 1)) as f64 * hermite::hermite(n - 2, z)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let g = self.log_norm.exp() * (-0.5 * z * z).exp();
        Ok([g * h, g * (dh - z * h), g * (d2h - 2.0 * z * dh + (z * z - 1.0) * h)])
    }

    /// Principal branch of `ln Ψ_n(X)`, evaluated without forming `Ψ`.
    pub fn log_psi(&self, p: ComplexPoint) -> Result<Complex64, EigenError> {
        let z = p.ensure_finite()?.to_complex();
        let h = hermite::hermite(self.level(), z);
        Ok(self.log_norm + h.ln() - 0.5 * z * z)
    }

    /// Complex principal function `Ŝ = (ℏ/i)·ln Ψ` in units of `ℏ`.
    pub fn complex_action(&self, p: ComplexPoint) -> Result<Complex64, EigenError> {
        Ok(-Complex64::i() * self.log_psi(p)?)
    }

    /// `|Ψ_n(X)|²` evaluated in log space; exact zero at the nodes.
    pub fn psi_norm_sqr(&self, p: ComplexPoint) -> f64 {
        let z = p.to_complex();
        let h = hermite::hermite(self.level(), z);
        let h2 = h.norm_sqr();
        if h2 == 0.0 {
            return 0.0;
        }
        (2.0 * self.log_norm + h2.ln() - (z * z).re).exp()
    }

    fn guarded_hermite(&self, z: Complex64) -> Option<(Complex64, Complex64)> {
        let n = self.level();
        let (h, hm) = hermite::hermite_pair(n, z);
        let scale = z.norm().powi(n as i32).max(1.0);
        if h.norm() < POLE_GUARD * scale {
            None
        } else {
            Some((h, hm))
        }
    }

    /// True when the point lies inside the pole guard.
    pub fn near_pole(&self, p: ComplexPoint) -> bool {
        self.guarded_hermite(p.to_complex()).is_none()
    }

    /// `d(ln Ψ)/dX = H_n'/H_n − X`.
    pub fn log_derivative(&self, p: ComplexPoint) -> Result<Complex64, EigenError> {
        let z = p.ensure_finite()?.to_complex();
        self.log_derivative_c(z).ok_or(EigenError::PoleProximity(p))
    }

    pub(crate) fn log_derivative_c(&self, z: Complex64) -> Option<Complex64> {
        let n = self.level();
        let (h, hm) = self.guarded_hermite(z)?;
        Some(2.0 * n as f64 * hm / h - z)
    }

    /// Velocity `dX/dT = −i·(H_n'/H_n − X)`.
    pub fn velocity(&self, p: ComplexPoint) -> Result<Complex64, EigenError> {
        Ok(-Complex64::i() * self.log_derivative(p)?)
    }

    pub(crate) fn velocity_c(&self, z: Complex64) -> Option<Complex64> {
        self.log_derivative_c(z).map(|g| -Complex64::i() * g)
    }

    /// Potential `X²/2` in units of `ℏω₀`; `Im V = X_r·X_i`.
    pub fn potential(&self, p: ComplexPoint) -> Complex64 {
        let z = p.to_complex();
        0.5 * z * z
    }

    /// `ln G(X) = −Σ c_j ln|X − s_j|`, the log form of the stream invariant.
    pub fn log_level(&self, p: ComplexPoint) -> f64 {
        self.log_level_c(p.to_complex())
    }

    pub(crate) fn log_level_c(&self, z: Complex64) -> f64 {
        self.centers
            .iter()
            .zip(&self.structure.weights)
            .map(|(&s, &c)| -c * (z - s).norm().ln())
            .sum()
    }

    pub fn log_level_real(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.structure.weights)
            .map(|(&s, &c)| -c * (x - s).abs().ln())
            .sum()
    }

    /// Power `k` with `stream_invariant = G^k`: the Cassinian `A` for `n = 1`
    /// (`k = 2`) and the sextic polynomial form for `n = 2` (`k = 10`).
    pub fn invariant_exponent(&self) -> f64 {
        match self.level() {
            1 => 2.0,
            2 => 10.0,
            _ => 1.0,
        }
    }

    pub fn invariant_from_log_level(&self, log_level: f64) -> f64 {
        (self.invariant_exponent() * log_level).exp()
    }

    pub fn log_level_from_invariant(&self, invariant: f64) -> f64 {
        invariant.ln() / self.invariant_exponent()
    }

    /// The quantity conserved along trajectories.
    ///
    /// `n = 1`: `A` with `A² = (X_r² − X_i² − 1)² + 4X_r²X_i²` (Cassinian ovals).
    /// `n = 2`: `[(X_r² + X_i²)² − 5(X_r² − X_i²) + 25/4]²·(X_r² + X_i²)`.
    /// Otherwise the product form `G = Π|X − s_j|^{−c_j}`.
    pub fn stream_invariant(&self, p: ComplexPoint) -> f64 {
        let (xr2, xi2) = (p.xr * p.xr, p.xi * p.xi);
        match self.level() {
            1 => ((xr2 - xi2 - 1.0).powi(2) + 4.0 * xr2 * xi2).sqrt(),
            2 => {
                let r2 = xr2 + xi2;
                let q = r2 * r2 - 5.0 * (xr2 - xi2) + 6.25;
                q * q * r2
            }
            _ => self.log_level(p).exp(),
        }
    }

    /// Separatrix level in log form, `None` for the ground state.
    pub fn separatrix_log_level(&self) -> Option<f64> {
        self.structure.separatrix_level.map(|v| self.log_level_from_invariant(v))
    }

    /// Log-level below which the orbit around stagnation point `j` is a subnest.
    pub fn basin_limit(&self, center: usize) -> f64 {
        self.basin_limits[center]
    }

    pub fn basin_limits(&self) -> &[f64] {
        &self.basin_limits
    }

    /// Index of the stagnation point whose sublevel basin contains `p`, found by
    /// steepest descent of `ln G`.
    pub fn basin_of(&self, p: ComplexPoint) -> usize {
        let floor = self.basin_limits.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
        let mut z = p.to_complex();
        for _ in 0..20_000 {
            let (idx, dist) = self.nearest_center(z);
            if dist == 0.0 || self.log_level_c(z) < floor {
                return idx;
            }
            let h = 0.2 * dist.min(0.25);
            let dir = |w: Complex64| -> Complex64 {
                let ratio = self.hermite_poly.eval(w) / self.numerator.eval(w);
                let d = ratio.conj();
                let m = d.norm();
                if m > 0.0 && m.is_finite() { d / m } else { Complex64::new(0.0, 0.0) }
            };
            let k1 = dir(z);
            let k2 = dir(z + 0.5 * h * k1);
            if k2.norm() == 0.0 {
                return idx;
            }
            z += h * k2;
        }
        self.nearest_center(z).0
    }

    fn nearest_center(&self, z: Complex64) -> (usize, f64) {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, (z - s).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one stagnation point")
    }

    /// Level-based subnest test: the orbit through `p` encloses no pole.
    ///
    /// With `include_boundary` the separatrix itself counts as subnest.
    pub fn in_subnest(&self, p: ComplexPoint, include_boundary: bool) -> bool {
        let lambda = self.log_level(p);
        let below = |limit: f64| if include_boundary { lambda <= limit } else { lambda < limit };
        let lo = self.basin_limits.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.basin_limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if below(lo) {
            return true;
        }
        if !below(hi) {
            return false;
        }
        below(self.basin_limits[self.basin_of(p)])
    }

    /// Real points where `ln G` equals `log_level`, ascending.
    pub fn real_level_crossings(&self, log_level: f64) -> Vec<f64> {
        let mut crit: Vec<f64> = self.centers.iter().chain(&self.poles).copied().collect();
        crit.sort_by(f64::total_cmp);
        let f = |x: f64| self.log_level_real(x) - log_level;
        let mut roots = Vec::new();
        // Left tail: ln G decreases from +∞ towards the first centre.
        let first = crit[0];
        let mut a = first - 1.0;
        while f(a) < 0.0 {
            a = first - 2.0 * (first - a);
        }
        push_root(&mut roots, &f, a, first);
        for w in crit.windows(2) {
            push_root(&mut roots, &f, w[0], w[1]);
        }
        let last = *crit.last().unwrap();
        let mut b = last + 1.0;
        while f(b) < 0.0 {
            b = last + 2.0 * (b - last);
        }
        push_root(&mut roots, &f, last, b);
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
        roots
    }

    /// Real-axis chords of the orbits at `log_level`.
    pub fn level_chords(&self, log_level: f64) -> Vec<LevelChord> {
        let roots = self.real_level_crossings(log_level);
        let mut chords = Vec::new();
        let mut i = 0;
        while i + 1 < roots.len() {
            let (left, right) = (roots[i], roots[i + 1]);
            let mid = 0.5 * (left + right);
            if self.log_level_real(mid) < log_level || self.centers.iter().any(|&s| s > left && s < right) {
                let poles_inside = self.poles.iter().filter(|&&p| p > left && p < right).count();
                chords.push(LevelChord { left, right, poles_inside });
                i += 2;
            } else {
                i += 1;
            }
        }
        chords
    }
}

fn push_root(roots: &mut Vec<f64>, f: &impl Fn(f64) -> f64, a: f64, b: f64) {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        roots.push(a);
        return;
    }
    if fb == 0.0 {
        roots.push(b);
        return;
    }
    if !(fa.signum() != fb.signum()) {
        return;
    }
    let (mut lo, mut hi, mut flo) = (a, b, fa);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            lo = m;
            hi = m;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = m;
            flo = fm;
        } else {
            hi = m;
        }
    }
    roots.push(0.5 * (lo + hi));
}

fn polish_real_root(p: &Polynomial, mut x: f64) -> f64 {
    let dp = p.derivative();
    for _ in 0..4 {
        let d = dp.eval_real(x);
        if d == 0.0 {
            break;
        }
        let step = p.eval_real(x) / d;
        x -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
