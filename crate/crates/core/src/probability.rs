//! Probability densities over the complex plane.
//!
//! * Born: `|Ψ|²` on the real axis, also recovered as the exponential of the
//!   line integral `−2∫Ẋ_i dX_r` of the velocity.
//! * Conserved: `ρ = ρ₀·exp[−4∫Im(½Ẋ² + V) dT]` along the trajectory from its
//!   real-axis anchor, which satisfies the stationary continuity equation.
//! * Wyatt: `ρ′ = Ψ*Ψ`, with trajectory form `ρ₀·exp[−4∫Im(½Ẋ²) dT]`; its flux
//!   divergence equals the source `4ρ′·Im V`.
//! * Combined: `ρ′` on subnests (separatrix included), `ρ` elsewhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigenstate::Eigenstate;
use crate::error::{DensityError, EigenError, TrajectoryError};
use crate::hermite;
use crate::model::ComplexPoint;
use crate::quadrature::{self, QuadratureOptions, Rule};
use crate::trajectory::{self, CrossingEvent, IntegratorConfig, StopRule, Termination, CROSSING_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMethod {
    Born,
    Conserved,
    Wyatt,
    Combined,
}

impl DensityMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Born => "born",
            Self::Conserved => "conserved",
            Self::Wyatt => "wyatt",
            Self::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub point: ComplexPoint,
    pub value: f64,
    pub method: DensityMethod,
    /// Construction that produced `value`; differs from `method` only for `Combined`.
    pub branch: DensityMethod,
    pub anchor: Option<CrossingEvent>,
    /// `ln(value / ρ₀)`, the exponent accumulated from the anchor.
    pub path_integral_value: Option<f64>,
}

/// `|Ψ_n(X_r)|²`.
pub fn born_density(state: &Eigenstate, xr: f64) -> f64 {
    state.psi_norm_sqr(ComplexPoint::real(xr))
}

/// `ln |Ψ_n(X_r)|²`, `−∞` at nodes.
pub fn log_born_density(state: &Eigenstate, xr: f64) -> f64 {
    let (h, _) = hermite::hermite_pair_real(state.level(), xr);
    2.0 * state.log_norm() + (h * h).ln() - xr * xr
}

/// `Ψ*(X)Ψ(X) = |Ψ(X)|²`.
pub fn wyatt_density(state: &Eigenstate, p: ComplexPoint) -> f64 {
    state.psi_norm_sqr(p)
}

/// `4ρ′·Im V = 4ρ′·X_r·X_i`.
pub fn source_density(state: &Eigenstate, p: ComplexPoint) -> f64 {
    4.0 * wyatt_density(state, p) * p.xr * p.xi
}

/// Born density from the velocity line integral, normalised numerically.
///
/// The integrand `−2Ẋ_i = 2(H'/H − X)` has simple poles at the nodes. On each
/// panel the poles within reach are subtracted, the smooth remainder goes to
/// Gauss–Legendre, and the subtracted part is added back as `2·ln|b−r|/|a−r|`.
pub struct BornIntegral<'a> {
    state: &'a Eigenstate,
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
    log_norm: f64,
    rule: Rule,
}

impl<'a> BornIntegral<'a> {
    const STEP: f64 = 0.25;
    const REACH: f64 = 0.5;

    pub fn new(state: &'a Eigenstate) -> Result<Self, DensityError> {
        let half = (2.0 * state.level() as f64 + 1.0).sqrt() + 8.0;
        // Offset keeps breakpoints away from the nodes (0 included).
        let mut lo = -half - 0.0731;
        while state.pole_positions().iter().any(|r| {
            let k = ((r - lo) / Self::STEP).round();
            (lo + k * Self::STEP - r).abs() < 1e-3
        }) {
            lo -= 0.0173;
        }
        let cells = ((2.0 * half) / Self::STEP).ceil() as usize + 1;
        let mut this = Self { state, lo, step: Self::STEP, cumulative: Vec::with_capacity(cells + 1), log_norm: 0.0, rule: Rule::new(16) };
        this.cumulative.push(0.0);
        for k in 0..cells {
            let a = lo + k as f64 * Self::STEP;
            let v = this.cumulative[k] + this.panel(a, a + Self::STEP)?;
            this.cumulative.push(v);
        }
        let peak = this.cumulative.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let hi = lo + cells as f64 * Self::STEP;
        let mut edges: Vec<f64> = (0..=cells).map(|k| lo + k as f64 * Self::STEP).collect();
        edges[cells] = hi;
        let opts = QuadratureOptions { abs_tol: 1e-15, rel_tol: 1e-13, order: 12, ..Default::default() };
        let mass = quadrature::integrate(|x| this.exponent(x).map(|f| (f - peak).exp()), &edges, &opts)?;
        this.log_norm = peak + mass.value.ln();
        Ok(this)
    }

    fn integrand(&self, t: f64) -> Result<f64, EigenError> {
        Ok(-2.0 * self.state.velocity(ComplexPoint::real(t))?.im)
    }

    /// Integrand minus the poles in `near`. Close to a node the subtraction
    /// cancels catastrophically, so there `H'/H = Σ 1/(t − r)` is summed over
    /// the remaining nodes instead.
    fn remainder(&self, t: f64, near: &[f64]) -> Result<f64, EigenError> {
        if near.iter().all(|&p| (t - p).abs() > 1e-2) {
            return Ok(self.integrand(t)? - near.iter().map(|&p| 2.0 / (t - p)).sum::<f64>());
        }
        let far: f64 = self.state.pole_positions().iter().filter(|p| !near.contains(p)).map(|&p| 1.0 / (t - p)).sum();
        Ok(2.0 * (far - t))
    }

    /// `∫_a^b −2Ẋ_i dX` for `|b − a| ≤ STEP`.
    fn panel(&self, a: f64, b: f64) -> Result<f64, EigenError> {
        if a == b {
            return Ok(0.0);
        }
        let (l, r) = (a.min(b), a.max(b));
        let near: Vec<f64> = self
            .state
            .pole_positions()
            .iter()
            .copied()
            .filter(|&p| p > l - Self::REACH && p < r + Self::REACH)
            .collect();
        let vals: Vec<f64> = self
            .rule
            .points(a, b)
            .map(|t| self.remainder(t, &near))
            .collect::<Result<_, _>>()?;
        let singular: f64 = near.iter().map(|&p| 2.0 * ((b - p).abs() / (a - p).abs()).ln()).sum();
        Ok(self.rule.combine(a, b, &vals) + singular)
    }

    /// Unnormalised exponent relative to the left end of the table.
    fn exponent(&self, x: f64) -> Result<f64, EigenError> {
        let last = self.cumulative.len() - 1;
        let k = (((x - self.lo) / self.step).floor().max(0.0) as usize).min(last);
        let mut a = self.lo + k as f64 * self.step;
        let mut acc = self.cumulative[k];
        while (x - a).abs() > self.step {
            let b = a + self.step * (x - a).signum();
            acc += self.panel(a, b)?;
            a = b;
        }
        Ok(acc + self.panel(a, x)?)
    }

    /// `P(X_r)` by the line-integral route.
    pub fn density(&self, xr: f64) -> Result<f64, DensityError> {
        if !xr.is_finite() {
            return Err(EigenError::NonFinitePoint { re: xr, im: 0.0 }.into());
        }
        if self.state.near_pole(ComplexPoint::real(xr)) {
            return Err(DensityError::NodeSingularity(xr));
        }
        Ok((self.exponent(xr)? - self.log_norm).exp())
    }

    /// `ln N` with `P = exp(exponent − ln N)`.
    pub fn log_normalisation(&self) -> f64 {
        self.log_norm
    }
}

/// Position, velocity and the two exponent integrands `Im(½Ẋ² + V)` and `Im(½Ẋ²)`.
pub(crate) fn augmented_field(state: &Eigenstate) -> impl Fn(&[f64; 4]) -> Result<[f64; 4], EigenError> + '_ {
    move |y: &[f64; 4]| {
        let z = Complex64::new(y[0], y[1]);
        let v = state.velocity_c(z).ok_or(EigenError::PoleProximity(ComplexPoint::from(z)))?;
        let kinetic = v.re * v.im;
        Ok([v.re, v.im, kinetic + y[0] * y[1], kinetic])
    }
}

/// Anchor crossing of `p` with `K6 = ∫_0^{t_a} Im(½Ẋ² + V) dT` and
/// `K7 = ∫_0^{t_a} Im(½Ẋ²) dT`, so that `ln ρ(p) = ln ρ₀ + 4K`.
pub(crate) fn anchored_exponents(
    state: &Eigenstate,
    p: ComplexPoint,
    cfg: &IntegratorConfig,
) -> Result<(CrossingEvent, f64, f64), DensityError> {
    if p.xi.abs() <= CROSSING_TOL {
        return Ok((trajectory::anchor_crossing(state, p, cfg)?, 0.0, 0.0));
    }
    trajectory::check_start(state, p, cfg)?;
    let mut best: Option<(CrossingEvent, f64, f64)> = None;
    for backward in [false, true] {
        let w = trajectory::walk(state, augmented_field(state), [p.xr, p.xi, 0.0, 0.0], cfg, backward, StopRule::FirstCrossing, false)?;
        if w.termination == Termination::Crossing {
            let c = CrossingEvent { xr: w.end[0], ..w.crossings[0] };
            if best.is_none_or(|(b, _, _)| c.t.abs() < b.t.abs()) {
                best = Some((c, w.end[2], w.end[3]));
            }
        }
    }
    best.ok_or(DensityError::Trajectory(TrajectoryError::BudgetExceeded { max_time: cfg.max_time }))
}

/// Conserved density, anchored at the temporally nearest real-axis crossing.
pub fn conserved_density(state: &Eigenstate, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<DensitySample, DensityError> {
    let (anchor, k6, _) = anchored_exponents(state, p, cfg)?;
    let exponent = 4.0 * k6;
    Ok(DensitySample {
        point: p,
        value: (log_born_density(state, anchor.xr) + exponent).exp(),
        method: DensityMethod::Conserved,
        branch: DensityMethod::Conserved,
        anchor: Some(anchor),
        path_integral_value: Some(exponent),
    })
}

/// `Ψ*Ψ` rebuilt from the trajectory integral, constant fixed by the Born anchor.
pub fn wyatt_density_by_path(state: &Eigenstate, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<DensitySample, DensityError> {
    let (anchor, _, k7) = anchored_exponents(state, p, cfg)?;
    let exponent = 4.0 * k7;
    Ok(DensitySample {
        point: p,
        value: (log_born_density(state, anchor.xr) + exponent).exp(),
        method: DensityMethod::Wyatt,
        branch: DensityMethod::Wyatt,
        anchor: Some(anchor),
        path_integral_value: Some(exponent),
    })
}

/// `Ψ*Ψ` on subnests and on the separatrix, the conserved density elsewhere.
pub fn combined_density(state: &Eigenstate, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<DensitySample, DensityError> {
    let p = p.ensure_finite()?;
    if state.in_subnest(p, true) {
        Ok(DensitySample {
            point: p,
            value: wyatt_density(state, p),
            method: DensityMethod::Combined,
            branch: DensityMethod::Wyatt,
            anchor: None,
            path_integral_value: None,
        })
    } else {
        let s = conserved_density(state, p, cfg)?;
        Ok(DensitySample { method: DensityMethod::Combined, ..s })
    }
}

/// Evaluates one of the densities at `p`. `Born` uses `X_r` and requires an on-axis point.
pub fn density(state: &Eigenstate, method: DensityMethod, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<DensitySample, DensityError> {
    match method {
        DensityMethod::Born => {
            if p.xi.abs() > CROSSING_TOL {
                return Err(DensityError::OffAxis(p));
            }
            let value = born_density(state, p.ensure_finite()?.xr);
            Ok(DensitySample { point: p, value, method, branch: method, anchor: None, path_integral_value: None })
        }
        DensityMethod::Conserved => conserved_density(state, p, cfg),
        DensityMethod::Wyatt => {
            let value = wyatt_density(state, p.ensure_finite()?);
            Ok(DensitySample { point: p, value, method, branch: method, anchor: None, path_integral_value: None })
        }
        DensityMethod::Combined => combined_density(state, p, cfg),
    }
}

/// Finite-difference divergence of `ρ·Ẋ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityResidual {
    pub divergence: f64,
    /// `|∂(ρẊ_r)/∂X_r| + |∂(ρẊ_i)/∂X_i|`, the scale the divergence is judged against.
    pub scale: f64,
    pub h: f64,
}

/// Central-difference divergence of the flux with steps `h` and `h/2`, combined
/// by one Richardson step.
///
/// For `Conserved` and `Combined` every stencil point must lie in the same
/// region (subnest or not) as `p`.
pub fn continuity_residual(
    state: &Eigenstate,
    p: ComplexPoint,
    method: DensityMethod,
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<ContinuityResidual, DensityError> {
    let p = p.ensure_finite()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(DensityError::InvalidStep(h));
    }
    let region = state.in_subnest(p, true);
    let flux = |q: ComplexPoint| -> Result<Complex64, DensityError> {
        if matches!(method, DensityMethod::Conserved | DensityMethod::Combined) && state.in_subnest(q, true) != region {
            return Err(DensityError::StencilCrossesBoundary(p));
        }
        let rho = density(state, method, q, cfg)?.value;
        Ok(rho * state.velocity(q)?)
    };
    let terms = |h: f64| -> Result<(f64, f64), DensityError> {
        let dx = (flux(ComplexPoint::new(p.xr + h, p.xi))?.re - flux(ComplexPoint::new(p.xr - h, p.xi))?.re) / (2.0 * h);
        let dy = (flux(ComplexPoint::new(p.xr, p.xi + h))?.im - flux(ComplexPoint::new(p.xr, p.xi - h))?.im) / (2.0 * h);
        Ok((dx, dy))
    };
    let (x1, y1) = terms(h)?;
    let (x2, y2) = terms(0.5 * h)?;
    let dx = (4.0 * x2 - x1) / 3.0;
    let dy = (4.0 * y2 - y1) / 3.0;
    Ok(ContinuityResidual { divergence: dx + dy, scale: dx.abs() + dy.abs(), h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: u32) -> Eigenstate {
        Eigenstate::natural(n).unwrap()
    }

    #[test]
    fn born_closed_form_shapes() {
        let s = st(1);
        let c2 = 0.5 / std::f64::consts::PI.sqrt();
        for x in [0.3, 1.0, 2.2] {
            assert!((born_density(&s, x) / (c2 * 4.0 * x * x * (-x * x).exp()) - 1.0).abs() < 1e-14);
            assert_eq!(born_density(&s, x), born_density(&s, -x));
        }
        let g = st(0);
        assert!((born_density(&g, 0.7) / (-0.49f64).exp() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn line_integral_matches_closed_form() {
        for n in 0..=3 {
            let s = st(n);
            let b = BornIntegral::new(&s).unwrap();
            for k in 0..=80 {
                let x = -4.0 + 0.1 * k as f64 + 0.0137;
                let exact = born_density(&s, x);
                let rel = (b.density(x).unwrap() / exact - 1.0).abs();
                assert!(rel < 1e-9, "n={n} x={x} rel={rel}");
            }
        }
    }

    #[test]
    fn line_integral_rejects_nodes() {
        let s = st(2);
        let b = BornIntegral::new(&s).unwrap();
        assert!(matches!(b.density(s.pole_positions()[0]), Err(DensityError::NodeSingularity(_))));
    }

    #[test]
    fn on_axis_densities_reduce_to_born() {
        let s = st(1);
        let cfg = IntegratorConfig::default();
        let p = ComplexPoint::real(1.3);
        let born = born_density(&s, 1.3);
        let c = conserved_density(&s, p, &cfg).unwrap();
        assert_eq!(c.value, born);
        assert_eq!(c.path_integral_value, Some(0.0));
        assert_eq!(wyatt_density(&s, p), born);
        assert!((combined_density(&s, ComplexPoint::real(2.5), &cfg).unwrap().value / born_density(&s, 2.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conserved_density_outside_lemniscate_has_closed_form() {
        // ρ = C²|X|²·exp(−1 − A) on every A > 1 orbit of the first state.
        let s = st(1);
        let c2 = 0.5 / std::f64::consts::PI.sqrt();
        let cfg = IntegratorConfig::default();
        for &(xr, xi) in &[(1.5, 0.4), (-0.4, 1.3), (2.0, -0.7), (0.2, 1.2)] {
            let p = ComplexPoint::new(xr, xi);
            let a = s.stream_invariant(p);
            assert!(a > 1.0);
            let expected = c2 * 4.0 * (xr * xr + xi * xi) * (-1.0 - a).exp();
            let got = conserved_density(&s, p, &cfg).unwrap().value;
            assert!((got / expected - 1.0).abs() < 1e-8, "{p:?} {got} {expected}");
        }
    }

    #[test]
    fn wyatt_path_matches_closed_form() {
        let s = st(1);
        let cfg = IntegratorConfig::default();
        for &(xr, xi) in &[(1.0, 0.2), (0.8, 0.3), (-1.1, -0.25), (1.3, 0.1)] {
            let p = ComplexPoint::new(xr, xi);
            let by_path = wyatt_density_by_path(&s, p, &cfg).unwrap().value;
            assert!((by_path / wyatt_density(&s, p) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exponent_difference_is_the_potential_integral() {
        let s = st(2);
        let cfg = IntegratorConfig::default();
        let p = ComplexPoint::new(1.9, 0.6);
        let (_, k6, k7) = anchored_exponents(&s, p, &cfg).unwrap();
        let c = conserved_density(&s, p, &cfg).unwrap();
        let w = wyatt_density_by_path(&s, p, &cfg).unwrap();
        let diff = c.path_integral_value.unwrap() - w.path_integral_value.unwrap();
        assert!((diff - 4.0 * (k6 - k7)).abs() < 1e-14);
    }

    #[test]
    fn combined_branches() {
        let s = st(1);
        let cfg = IntegratorConfig::default();
        let inside = combined_density(&s, ComplexPoint::new(1.0, 0.1), &cfg).unwrap();
        assert_eq!(inside.branch, DensityMethod::Wyatt);
        let outside = combined_density(&s, ComplexPoint::new(2.0, 0.1), &cfg).unwrap();
        assert_eq!(outside.branch, DensityMethod::Conserved);
    }

    #[test]
    fn source_sign_pattern() {
        let s = st(1);
        let q = |xr, xi| source_density(&s, ComplexPoint::new(xr, xi));
        assert!(q(0.5, 0.3) > 0.0 && q(-0.5, -0.3) > 0.0);
        assert!(q(-0.5, 0.3) < 0.0 && q(0.5, -0.3) < 0.0);
        assert_eq!(q(0.7, 0.0), 0.0);
        assert_eq!(q(0.0, 0.7), 0.0);
    }

    #[test]
    fn wyatt_divergence_equals_source() {
        let s = st(1);
        let cfg = IntegratorConfig::default();
        let p = ComplexPoint::new(0.8, 0.3);
        let r = continuity_residual(&s, p, DensityMethod::Wyatt, 1e-3, &cfg).unwrap();
        let src = source_density(&s, p);
        assert!((r.divergence / src - 1.0).abs() < 1e-4, "{r:?} {src}");
    }

    #[test]
    fn stencil_across_separatrix_is_rejected() {
        let s = st(1);
        let cfg = IntegratorConfig::default();
        // A = 1 at X = √2 on the real axis.
        let p = ComplexPoint::new(2f64.sqrt() - 1e-4, 0.0);
        let r = continuity_residual(&s, p, DensityMethod::Combined, 1e-3, &cfg);
        assert!(matches!(r, Err(DensityError::StencilCrossesBoundary(_))));
    }
}
