//! Property checks shared by the command-line `verify` suite and the
//! acceptance tests. Each returns a `Report` whose computed value is the worst
//! case over the sampled points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{self, AnalysisConfig};
use crate::eigenstate::Eigenstate;
use crate::error::AnalysisError;
use crate::model::{ComplexPoint, OscillatorModel};
use crate::probability::{self, born_density, source_density, wyatt_density, BornIntegral, DensityMethod};
use crate::region::{RegionKind, RegionSpec};
use crate::report::{Comparison, Report};
use crate::trajectory::{self, IntegratorConfig, OrbitClass};

pub const BORN_TOL: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 1e-6;
pub const CONTINUITY_TOL: f64 = 1e-3;
pub const SOURCE_TOL: f64 = 1e-4;
pub const CORRELATION_TOL: f64 = 1e-8;
pub const NET_SOURCE_TOL: f64 = 1e-10;
pub const PATH_TOL: f64 = 1e-6;
pub const STENCIL_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Random points per sampled property.
    pub samples: usize,
    /// Random starts for the classification check.
    pub starts: usize,
    /// Orbits for the drift check.
    pub orbits: usize,
    /// Real-axis spacing of the Born comparison.
    pub born_step: f64,
    pub seed: u64,
    pub analysis: AnalysisConfig,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { samples: 50, starts: 100, orbits: 20, born_step: 1e-3, seed: 0, analysis: AnalysisConfig::default() }
    }
}

impl SuiteOptions {
    pub fn quick() -> Self {
        Self { samples: 10, starts: 25, orbits: 6, born_step: 1e-2, ..Self::default() }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Outermost real crossing of the separatrix, or 1 for the ground state.
fn inside_reach(state: &Eigenstate) -> f64 {
    state
        .separatrix_log_level()
        .and_then(|l| state.real_level_crossings(l).last().copied())
        .unwrap_or(1.0)
}

fn distance_to_poles(state: &Eigenstate, p: ComplexPoint) -> f64 {
    state.pole_positions().iter().map(|&r| ComplexPoint::real(r).distance(p)).fold(f64::INFINITY, f64::min)
}

/// Gap between the level through `p` and the nearest basin limit.
fn level_margin(state: &Eigenstate, p: ComplexPoint) -> f64 {
    let l = state.log_level(p);
    state.basin_limits().iter().filter(|v| v.is_finite()).map(|v| (l - v).abs()).fold(f64::INFINITY, f64::min)
}

/// Draws points uniformly in the box until `accept` has taken `count` of them.
fn sample_points(
    rng: &mut ChaCha8Rng,
    count: usize,
    xr: (f64, f64),
    xi: (f64, f64),
    mut accept: impl FnMut(ComplexPoint) -> bool,
) -> Result<Vec<ComplexPoint>, AnalysisError> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(AnalysisError::Geometry(format!("only {} of {count} sample points accepted", out.len())));
        }
        let p = ComplexPoint::new(rng.gen_range(xr.0..xr.1), rng.gen_range(xi.0..xi.1));
        if accept(p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Line-integral Born density against `|Ψ_n|²` on `[−4, 4]`, nodes excluded.
pub fn born_equivalence(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let b = BornIntegral::new(state)?;
    let steps = (8.0 / opts.born_step).round() as usize;
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    let mut points = 0;
    for k in 0..=steps {
        let x = -4.0 + 8.0 * k as f64 / steps as f64;
        if state.pole_positions().iter().any(|&r| (x - r).abs() < 1e-3) {
            continue;
        }
        let rel = (b.density(x)? / born_density(state, x) - 1.0).abs();
        points += 1;
        if rel > worst {
            worst = rel;
            at = x;
        }
    }
    Ok(Report::new(format!("line-integral Born density equals |psi|^2, n = {}", state.level()), worst)
        .against(0.0, BORN_TOL, Comparison::Absolute)
        .metadata(json!({ "points": points, "worst_at": at, "node_exclusion": 1e-3, "log_normalisation": b.log_normalisation() }))
        .finish())
}

/// Log-levels of the drift orbits: `A ∈ [0.1, 3]` for `n = 1`, otherwise a
/// band around the separatrix.
fn drift_levels(state: &Eigenstate, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (lo, hi) = match state.level() {
        1 => (state.log_level_from_invariant(0.1), state.log_level_from_invariant(3.0)),
        _ => {
            let limits: Vec<f64> = state.basin_limits().iter().copied().filter(|l| l.is_finite()).collect();
            let low = limits.iter().copied().fold(f64::INFINITY, f64::min);
            let high = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if limits.is_empty() {
                (-1.0, 1.0)
            } else {
                (low - 1.5, high + 1.0)
            }
        }
    };
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

/// Relative drift of the stream invariant over one period of each orbit.
pub fn invariant_drift(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let mut worst: f64 = 0.0;
    let mut orbits = 0;
    let mut levels = Vec::new();
    for lambda in drift_levels(state, opts.orbits) {
        if state.basin_limits().iter().any(|l| (l - lambda).abs() < 1e-3) {
            continue;
        }
        for chord in state.level_chords(lambda) {
            let start = ComplexPoint::real(chord.right);
            let t = trajectory::integrate(state, start, cfg)?;
            let i0 = state.stream_invariant(start);
            let drift = t.samples.iter().map(|s| (state.stream_invariant(s.point) / i0 - 1.0).abs()).fold(0.0, f64::max);
            worst = worst.max(drift);
            orbits += 1;
        }
        levels.push(state.invariant_from_log_level(lambda));
    }
    Ok(Report::new(format!("stream invariant conserved along orbits, n = {}", state.level()), worst)
        .against(0.0, DRIFT_TOL, Comparison::Absolute)
        .metadata(json!({ "orbits": orbits, "invariant_levels": levels }))
        .finish())
}

/// Winding-number and level classifiers on random starts; the computed value
/// is the number of disagreements.
pub fn classification_agreement(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let mut rng = opts.rng(1);
    let reach = inside_reach(state) + 0.5;
    let starts = sample_points(&mut rng, opts.starts, (-reach, reach), (-1.2, 1.2), |p| {
        p.xi.abs() > 1e-3
            && distance_to_poles(state, p) > 1e-2
            && level_margin(state, p) > 1e-3
            && state.velocity(p).map(|v| v.norm() > 1e-3).unwrap_or(false)
    })?;
    let mut disagreements = 0;
    let mut subnests = 0;
    let mut first_bad = None;
    for &p in &starts {
        let by_level = trajectory::classify_by_level(state, p);
        let by_winding = trajectory::classify(&trajectory::integrate(state, p, cfg)?);
        subnests += (by_level == OrbitClass::Subnest) as usize;
        if by_level != by_winding {
            disagreements += 1;
            first_bad.get_or_insert(p);
        }
    }
    Ok(Report::new(format!("winding and level classifiers agree, n = {}", state.level()), disagreements as f64)
        .against(0.0, 0.0, Comparison::Absolute)
        .metadata(json!({ "starts": starts.len(), "subnests": subnests, "seed": opts.seed, "first_disagreement": first_bad }))
        .finish())
}

/// Points outside the separatrix whose stencil stays on one side of it.
fn nest_points(state: &Eigenstate, opts: &SuiteOptions, stream: u64) -> Result<Vec<ComplexPoint>, AnalysisError> {
    let mut rng = opts.rng(stream);
    let reach = inside_reach(state) + 1.0;
    sample_points(&mut rng, opts.samples, (-reach, reach), (-1.5, 1.5), |p| {
        !state.in_subnest(p, true) && distance_to_poles(state, p) > 5e-2 && level_margin(state, p) > 1e-2
    })
}

/// Points inside subnests away from the axes, poles and the separatrix.
fn subnest_points(state: &Eigenstate, opts: &SuiteOptions, stream: u64) -> Result<Vec<ComplexPoint>, AnalysisError> {
    let mut rng = opts.rng(stream);
    let reach = inside_reach(state);
    sample_points(&mut rng, opts.samples, (-reach, reach), (-0.6, 0.6), |p| {
        state.in_subnest(p, false)
            && p.xr.abs() > 5e-2
            && p.xi.abs() > 5e-2
            && distance_to_poles(state, p) > 5e-2
            && level_margin(state, p) > 1e-2
    })
}

/// Stationary continuity of the conserved density at points outside the separatrix.
pub fn conserved_continuity(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let mut worst: f64 = 0.0;
    let mut at = None;
    for p in nest_points(state, opts, 2)? {
        let r = probability::continuity_residual(state, p, DensityMethod::Conserved, STENCIL_STEP, cfg)?;
        let rel = r.divergence.abs() / r.scale;
        if rel > worst {
            worst = rel;
            at = Some(p);
        }
    }
    Ok(Report::new(format!("conserved density satisfies stationary continuity, n = {}", state.level()), worst)
        .against(0.0, CONTINUITY_TOL, Comparison::Absolute)
        .metadata(json!({ "points": opts.samples, "h": STENCIL_STEP, "richardson_steps": 1, "worst_at": at }))
        .finish())
}

/// Pearson correlation coefficient.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Divergence of `Ψ*Ψ·Ẋ` against the source `4Ψ*Ψ·Im V` at subnest points; for
/// `n = 1` also the correlation with `e^{−(X_r²−X_i²)}(X_rX_i³ + X_r³X_i)`.
pub fn source_identity(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let points = subnest_points(state, opts, 3)?;
    let mut worst: f64 = 0.0;
    let mut sources = Vec::with_capacity(points.len());
    for &p in &points {
        let r = probability::continuity_residual(state, p, DensityMethod::Wyatt, STENCIL_STEP, cfg)?;
        let src = source_density(state, p);
        worst = worst.max((r.divergence - src).abs() / src.abs());
        sources.push(src);
    }
    let mut report = Report::new(format!("flux divergence equals the source density, n = {}", state.level()), worst)
        .against(0.0, SOURCE_TOL, Comparison::Absolute);
    if state.level() == 1 {
        let shape: Vec<f64> = points
            .iter()
            .map(|p| (p.xi * p.xi - p.xr * p.xr).exp() * (p.xr * p.xi.powi(3) + p.xr.powi(3) * p.xi))
            .collect();
        report = report.check("one_minus_correlation_with_closed_form", 1.0 - correlation(&sources, &shape), CORRELATION_TOL);
    }
    Ok(report.metadata(json!({ "points": points.len(), "h": STENCIL_STEP })).finish())
}

/// Net source over the inside region and the quadrant sign pattern.
pub fn net_source_cancellation(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis;
    let inside = RegionSpec::inside(state);
    let total = analysis::net_source(state, &inside, cfg)?;
    let quadrant = |xr: (f64, f64), xi: (f64, f64)| {
        let r = RegionSpec::bounded(state, RegionKind::InsideSeparatrix, xr, xi);
        analysis::net_source(state, &r, cfg).map(|q| q.value)
    };
    let (lo, hi) = inside.xr;
    let q1 = quadrant((0.0, hi), (0.0, 1.0))?;
    let q2 = quadrant((lo, 0.0), (0.0, 1.0))?;
    let q3 = quadrant((lo, 0.0), (-1.0, 0.0))?;
    let q4 = quadrant((0.0, hi), (-1.0, 0.0))?;
    Ok(Report::new(format!("net source inside the separatrix vanishes, n = {}", state.level()), total.value)
        .against(0.0, NET_SOURCE_TOL, Comparison::Absolute)
        // Source ∝ X_rX_i: positive in quadrants 1 and 3, negative in 2 and 4.
        .check("-q1", -q1, 0.0)
        .check("q2", q2, 0.0)
        .check("-q3", -q3, 0.0)
        .check("q4", q4, 0.0)
        .check("|q1+q4|", (q1 + q4).abs(), NET_SOURCE_TOL)
        .metadata(json!({
            "estimated_error": total.estimated_error,
            "quadrants": [q1, q2, q3, q4],
            "grid": total.grid,
            "evaluations": total.evaluations,
        }))
        .finish())
}

/// Path-integral `Ψ*Ψ` against the closed form at subnest points.
pub fn wyatt_path_equivalence(state: &Eigenstate, opts: &SuiteOptions) -> Result<Report, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let points = subnest_points(state, opts, 4)?;
    let mut worst: f64 = 0.0;
    for &p in &points {
        let by_path = probability::wyatt_density_by_path(state, p, cfg)?.value;
        worst = worst.max((by_path / wyatt_density(state, p) - 1.0).abs());
    }
    Ok(Report::new(format!("trajectory-integral psi*psi equals the closed form, n = {}", state.level()), worst)
        .against(0.0, PATH_TOL, Comparison::Absolute)
        .metadata(json!({ "points": points.len() }))
        .finish())
}

/// Widths of the first three separatrices decrease with `n`.
pub fn width_monotonicity(cfg: &IntegratorConfig) -> Result<Report, AnalysisError> {
    let mut widths = Vec::new();
    for n in 1..=3 {
        widths.push(analysis::separatrix_width(&Eigenstate::natural(n)?, cfg)?.xi_max);
    }
    let rise = widths.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(Report::new("separatrix width decreases for n = 1, 2, 3", rise)
        .check("largest_increase", rise, 0.0)
        .metadata(json!({ "widths": widths }))
        .finish())
}

/// Every property applicable to `state`, in a fixed order.
pub fn run_suite(state: &Eigenstate, opts: &SuiteOptions) -> Result<Vec<Report>, AnalysisError> {
    let cfg = &opts.analysis.integrator;
    let mut out = vec![born_equivalence(state, opts)?];
    if state.level() == 0 {
        return Ok(out);
    }
    out.push(invariant_drift(state, opts)?);
    out.push(classification_agreement(state, opts)?);
    out.push(conserved_continuity(state, opts)?);
    out.push(source_identity(state, opts)?);
    out.push(net_source_cancellation(state, opts)?);
    out.push(wyatt_path_equivalence(state, opts)?);
    out.push(analysis::fraction_inside(state, &opts.analysis)?);
    out.push(analysis::xi_max(state, cfg)?);
    if state.level() == 1 {
        out.push(width_monotonicity(cfg)?);
        for mass in [1.0, crate::model::ELECTRON_MASS_SI] {
            out.push(analysis::classical_width(&OscillatorModel::si(mass, 1.0, 1)?, cfg)?);
        }
    }
    Ok(out)
}

