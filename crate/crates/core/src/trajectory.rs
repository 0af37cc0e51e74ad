//! Integration of the complex equation of motion, real-axis crossings, orbit
//! closure and nest/subnest classification.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigenstate::Eigenstate;
use crate::error::{EigenError, TrajectoryError};
use crate::model::ComplexPoint;
use crate::ode::{Dopri5, StepControl, StepFailure};

/// Crossings are refined until `|X_i|` falls below this.
pub const CROSSING_TOL: f64 = 1e-12;

/// Speeds below this at the start point are treated as a stagnation point.
pub const DEGENERATE_SPEED: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_time: f64,
    pub closure_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.05, max_time: 200.0, closure_tol: 1e-8 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("max_time", self.max_time),
            ("closure_tol", self.closure_tol),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrajectoryError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub(crate) fn step_control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_step: self.max_step, min_step: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub point: ComplexPoint,
}

/// A real-axis crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub xr: f64,
    /// Sign of `dX_i/dT` at the crossing, 0 at a stagnation point.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleWinding {
    pub pole: ComplexPoint,
    /// Accumulated argument change divided by `2π`.
    pub turns: f64,
    /// Rounded winding number, present only for closed orbits.
    pub winding: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Closed,
    BudgetExceeded,
    PoleProximity,
    Duration,
    Crossing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub crossings: Vec<CrossingEvent>,
    pub closed: bool,
    pub period: Option<f64>,
    pub windings: Vec<PoleWinding>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn start(&self) -> ComplexPoint {
        self.samples[0].point
    }

    pub fn end(&self) -> ComplexPoint {
        self.samples.last().expect("non-empty trajectory").point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitClass {
    Nest,
    Subnest,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StopRule {
    Closure,
    FirstCrossing,
    Duration(f64),
}

/// Result of a walk along the field, times in physical (signed) units.
pub(crate) struct Walk<const N: usize> {
    pub samples: Vec<(f64, [f64; N])>,
    pub crossings: Vec<CrossingEvent>,
    pub period: Option<f64>,
    pub turns: Vec<f64>,
    pub termination: Termination,
    pub end_t: f64,
    pub end: [f64; N],
}

fn arg_increment(pole: f64, from: Complex64, to: Complex64) -> f64 {
    ((to - pole) / (from - pole)).arg()
}

/// Walks the trajectory through `y0` (first two components are `X_r`, `X_i`).
///
/// `field` is the physical-time right-hand side; `backward` integrates it with
/// time negated. Stage failures are treated as pole proximity.
pub(crate) fn walk<const N: usize, F>(
    state: &Eigenstate,
    field: F,
    y0: [f64; N],
    cfg: &IntegratorConfig,
    backward: bool,
    stop: StopRule,
    record: bool,
) -> Result<Walk<N>, TrajectoryError>
where
    F: Fn(&[f64; N]) -> Result<[f64; N], EigenError>,
{
    let sign = if backward { -1.0 } else { 1.0 };
    let signed = |y: &[f64; N]| -> Result<[f64; N], EigenError> {
        let mut d = field(y)?;
        if backward {
            d.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(d)
    };
    let mut stepper = Dopri5::new(signed, y0, cfg.step_control())?;
    let poles = state.pole_positions().to_vec();
    let z0 = Complex64::new(y0[0], y0[1]);
    let v0 = Complex64::new(stepper.derivative()[0], stepper.derivative()[1]);
    let section = |y: &[f64; N]| (Complex64::new(y[0], y[1]) - z0).re * v0.re + (Complex64::new(y[0], y[1]) - z0).im * v0.im;

    let mut out = Walk {
        samples: if record { vec![(0.0, y0)] } else { Vec::new() },
        crossings: Vec::new(),
        period: None,
        turns: vec![0.0; poles.len()],
        termination: Termination::BudgetExceeded,
        end_t: 0.0,
        end: y0,
    };
    let mut left_ball = false;

    loop {
        let tau = stepper.t();
        if tau >= cfg.max_time {
            out.termination = Termination::BudgetExceeded;
            break;
        }
        let proposal = match stepper.propose() {
            Ok(p) => p,
            Err(StepFailure::Field { .. }) | Err(StepFailure::StepTooSmall { .. }) => {
                out.termination = Termination::PoleProximity;
                break;
            }
        };
        let y_old = *stepper.y();
        let y_new = proposal.y;
        let z_old = Complex64::new(y_old[0], y_old[1]);
        let z_new = Complex64::new(y_new[0], y_new[1]);

        let increments: Vec<f64> = poles.iter().map(|&p| arg_increment(p, z_old, z_new)).collect();
        if increments.iter().any(|d| d.abs() > 0.5 * PI) {
            if stepper.veto(&proposal).is_err() {
                out.termination = Termination::PoleProximity;
                break;
            }
            continue;
        }

        let h = proposal.h;
        // Real-axis crossing inside this step.
        let crossing_s = if y_old[1] != 0.0 && (y_old[1] * y_new[1] < 0.0 || y_new[1] == 0.0) {
            Some(refine(|s| stepper.partial(s).map(|y| y[1]), y_old[1], y_new[1], h, CROSSING_TOL)?)
        } else {
            None
        };
        // Return through the section normal to the initial velocity.
        let closure_s = match stop {
            StopRule::Closure if left_ball => {
                let (g_old, g_new) = (section(&y_old), section(&y_new));
                if g_old < 0.0 && g_new >= 0.0 {
                    let s = refine(|s| stepper.partial(s).map(|y| section(&y)), g_old, g_new, h, 1e-15 * v0.norm())?;
                    let y = stepper.partial(s)?;
                    let d = (Complex64::new(y[0], y[1]) - z0).norm();
                    (d <= cfg.closure_tol).then_some(s)
                } else {
                    None
                }
            }
            _ => None,
        };
        let duration_s = match stop {
            StopRule::Duration(total) if tau + h >= total => Some(total - tau),
            _ => None,
        };

        let finish = match stop {
            StopRule::FirstCrossing => crossing_s.map(|s| (s, Termination::Crossing)),
            StopRule::Closure => closure_s.map(|s| (s, Termination::Closed)),
            StopRule::Duration(_) => duration_s.map(|s| (s, Termination::Duration)),
        };

        if let Some(s) = crossing_s {
            if finish.is_none_or(|(end, _)| s <= end + 1e-12 * h) {
                let y = stepper.partial(s)?;
                out.crossings.push(CrossingEvent {
                    t: sign * (tau + s),
                    xr: y[0],
                    direction: if (y_new[1] - y_old[1]) * sign > 0.0 { 1 } else { -1 },
                });
            }
        }

        if let Some((s, term)) = finish {
            let y = stepper.partial(s)?;
            let z = Complex64::new(y[0], y[1]);
            for (acc, &p) in out.turns.iter_mut().zip(&poles) {
                *acc += arg_increment(p, z_old, z) / (2.0 * PI);
            }
            if record {
                out.samples.push((sign * (tau + s), y));
            }
            if term == Termination::Closed {
                out.period = Some(tau + s);
            }
            out.termination = term;
            out.end_t = sign * (tau + s);
            out.end = y;
            return Ok(out);
        }

        for (acc, d) in out.turns.iter_mut().zip(&increments) {
            *acc += d / (2.0 * PI);
        }
        stepper.commit(proposal);
        if record {
            out.samples.push((sign * stepper.t(), *stepper.y()));
        }
        if !left_ball && (z_new - z0).norm() > 10.0 * cfg.closure_tol {
            left_ball = true;
        }
    }
    out.end_t = sign * stepper.t();
    out.end = *stepper.y();
    Ok(out)
}

/// Illinois-modified regula falsi for a sign change of `f` on `[0, h]`.
fn refine<F>(f: F, f0: f64, fh: f64, h: f64, tol: f64) -> Result<f64, EigenError>
where
    F: Fn(f64) -> Result<f64, EigenError>,
{
    if fh == 0.0 {
        return Ok(h);
    }
    let (mut a, mut b, mut fa, mut fb) = (0.0, h, f0, fh);
    let mut side = 0;
    let mut best = if fa.abs() < fb.abs() { a } else { b };
    for _ in 0..200 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        best = c;
        if fc.abs() <= tol || (b - a) <= 1e-15 * h {
            break;
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

fn position_field(state: &Eigenstate) -> impl Fn(&[f64; 2]) -> Result<[f64; 2], EigenError> + '_ {
    move |y: &[f64; 2]| {
        let z = Complex64::new(y[0], y[1]);
        let v = state
            .velocity_c(z)
            .ok_or(EigenError::PoleProximity(ComplexPoint::from(z)))?;
        Ok([v.re, v.im])
    }
}

pub(crate) fn check_start(state: &Eigenstate, start: ComplexPoint, cfg: &IntegratorConfig) -> Result<Complex64, TrajectoryError> {
    cfg.validate()?;
    let v = state.velocity(start.ensure_finite()?)?;
    if v.norm() < DEGENERATE_SPEED {
        return Err(TrajectoryError::DegenerateStart(start));
    }
    Ok(v)
}

fn into_trajectory(state: &Eigenstate, w: Walk<2>) -> Trajectory {
    let closed = w.termination == Termination::Closed;
    let windings = state
        .pole_positions()
        .iter()
        .zip(&w.turns)
        .map(|(&p, &turns)| PoleWinding {
            pole: ComplexPoint::real(p),
            turns,
            winding: closed.then(|| turns.round() as i32),
        })
        .collect();
    Trajectory {
        samples: w.samples.iter().map(|(t, y)| Sample { t: *t, point: ComplexPoint::new(y[0], y[1]) }).collect(),
        crossings: w.crossings,
        closed,
        period: w.period,
        windings,
        termination: w.termination,
    }
}

/// Integrates the trajectory through `start` until it closes or the time
/// budget runs out.
pub fn integrate(state: &Eigenstate, start: ComplexPoint, cfg: &IntegratorConfig) -> Result<Trajectory, TrajectoryError> {
    integrate_with(state, start, cfg, false, StopRule::Closure)
}

/// Integrates for a fixed duration; `backward` negates time.
pub fn integrate_for(
    state: &Eigenstate,
    start: ComplexPoint,
    duration: f64,
    backward: bool,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, TrajectoryError> {
    let cfg = IntegratorConfig { max_time: cfg.max_time.max(duration * 1.000_001), ..*cfg };
    integrate_with(state, start, &cfg, backward, StopRule::Duration(duration))
}

/// Integrates until the first real-axis crossing, or the pole guard.
///
/// Reaching the pole guard is not an error here: separatrix traces end at a pole.
pub fn integrate_until_pole_or_crossing(
    state: &Eigenstate,
    start: ComplexPoint,
    backward: bool,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, TrajectoryError> {
    check_start(state, start, cfg)?;
    let w = walk(state, position_field(state), [start.xr, start.xi], cfg, backward, StopRule::FirstCrossing, true)?;
    Ok(into_trajectory(state, w))
}

pub(crate) fn integrate_with(
    state: &Eigenstate,
    start: ComplexPoint,
    cfg: &IntegratorConfig,
    backward: bool,
    stop: StopRule,
) -> Result<Trajectory, TrajectoryError> {
    check_start(state, start, cfg)?;
    let w = walk(state, position_field(state), [start.xr, start.xi], cfg, backward, stop, true)?;
    let t_end = w.end_t;
    let traj = into_trajectory(state, w);
    if traj.termination == Termination::PoleProximity {
        return Err(TrajectoryError::PoleProximity { t: t_end, partial: Box::new(traj) });
    }
    Ok(traj)
}

/// Winding-number classification of an integrated orbit.
pub fn classify(traj: &Trajectory) -> OrbitClass {
    if !traj.closed {
        return OrbitClass::Open;
    }
    if traj.windings.iter().all(|w| w.winding == Some(0)) {
        OrbitClass::Subnest
    } else {
        OrbitClass::Nest
    }
}

/// Level-set classification of the orbit through `p` (strict: the separatrix is a nest).
pub fn classify_by_level(state: &Eigenstate, p: ComplexPoint) -> OrbitClass {
    if state.in_subnest(p, false) {
        OrbitClass::Subnest
    } else {
        OrbitClass::Nest
    }
}

/// The real-axis crossing closest in time to `p` along its trajectory.
pub fn anchor_crossing(state: &Eigenstate, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<CrossingEvent, TrajectoryError> {
    if p.xi.abs() <= CROSSING_TOL {
        // Stagnation points all lie on the axis and anchor themselves.
        cfg.validate()?;
        let v = state.velocity(p.ensure_finite()?)?;
        let direction = if v.norm() < DEGENERATE_SPEED { 0 } else if v.im >= 0.0 { 1 } else { -1 };
        return Ok(CrossingEvent { t: 0.0, xr: p.xr, direction });
    }
    check_start(state, p, cfg)?;
    let mut best: Option<CrossingEvent> = None;
    for backward in [false, true] {
        let w = walk(state, position_field(state), [p.xr, p.xi], cfg, backward, StopRule::FirstCrossing, false)?;
        if w.termination == Termination::Crossing {
            let c = w.crossings[0];
            if best.is_none_or(|b| c.t.abs() < b.t.abs()) {
                best = Some(c);
            }
        }
    }
    best.ok_or(TrajectoryError::BudgetExceeded { max_time: cfg.max_time })
}
