use rayon::prelude::*;

use ctraj::analysis::{self, AnalysisConfig};
use ctraj::eigenstate::Eigenstate;
use ctraj::error::{AnalysisError, DensityError, EigenError, TrajectoryError};
use ctraj::model::{ComplexPoint, OscillatorModel};
use ctraj::probability::{self, born_density, source_density, wyatt_density, BornIntegral, DensityMethod};
use ctraj::properties::{self, SuiteOptions};
use ctraj::region::POLE_EXCLUSION;
use ctraj::report::Report;
use ctraj::trajectory::{self, IntegratorConfig, OrbitClass, Trajectory};

use crate::output::{self, num, Csv, ModelParams, ReportFile, RunManifest, Tolerances};
use crate::{BornArgs, ClassicalArgs, Common, DensityArgs, Failure, GridMethod, TraceArgs, VerifyArgs};

fn state(common: &Common) -> Result<Eigenstate, Failure> {
    Eigenstate::natural(common.n).map_err(|e| Failure::Usage(e.to_string()))
}

fn integrator(common: &Common) -> Result<IntegratorConfig, Failure> {
    let cfg = IntegratorConfig { rel_tol: common.tol, abs_tol: common.tol * 1e-2, ..Default::default() };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn manifest(subcommand: &str, common: &Common) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        n: common.n,
        model: ModelParams { si: false, mass: 1.0, omega: 1.0 },
        grid: None,
        levels: None,
        starts: Vec::new(),
        method: None,
        tolerances: Tolerances { rel_tol: common.tol, abs_tol: common.tol * 1e-2 },
        seed: common.seed,
        quick: false,
        out: common.out.clone(),
    }
}

fn analysis_failure(e: AnalysisError) -> Failure {
    match e {
        AnalysisError::GroundState(_) => Failure::Usage(e.to_string()),
        e => Failure::Numerical(e.to_string()),
    }
}

/// `a:b:count` with both ends included.
fn parse_axis(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("axis `{spec}` is not of the form start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect())
}

fn parse_point(spec: &str) -> Result<ComplexPoint, Failure> {
    let bad = || Failure::Usage(format!("start `{spec}` is not of the form X_r,X_i"));
    let (xr, xi) = spec.split_once(',').ok_or_else(bad)?;
    let p = ComplexPoint::new(xr.trim().parse().map_err(|_| bad())?, xi.trim().parse().map_err(|_| bad())?);
    if p.is_finite() {
        Ok(p)
    } else {
        Err(bad())
    }
}

struct Block {
    segments: Vec<(String, Vec<(f64, ComplexPoint)>)>,
}

fn samples(t: &Trajectory) -> Vec<(f64, ComplexPoint)> {
    t.samples.iter().map(|s| (s.t, s.point)).collect()
}

fn separatrix_block(state: &Eigenstate, cfg: &IntegratorConfig) -> Result<Block, Failure> {
    let branches = analysis::trace_separatrix(state, cfg).map_err(analysis_failure)?;
    let mut segments = Vec::new();
    for b in &branches {
        let upper = samples(b);
        let lower = upper.iter().map(|&(t, p)| (t, p.conj())).collect();
        segments.push(("separatrix".to_string(), upper));
        segments.push(("separatrix".to_string(), lower));
    }
    Ok(Block { segments })
}

fn class_name(c: OrbitClass) -> &'static str {
    match c {
        OrbitClass::Nest => "nest",
        OrbitClass::Subnest => "subnest",
        OrbitClass::Open => "open",
    }
}

fn orbit(state: &Eigenstate, start: ComplexPoint, cfg: &IntegratorConfig) -> Result<(String, Vec<(f64, ComplexPoint)>), Failure> {
    let t = trajectory::integrate(state, start, cfg)
        .map_err(|e| Failure::Numerical(format!("trajectory from start ({}, {}) failed: {e}", num(start.xr), num(start.xi))))?;
    Ok((class_name(trajectory::classify(&t)).to_string(), samples(&t)))
}

pub fn trace(args: &TraceArgs) -> Result<(), Failure> {
    let st = state(&args.common)?;
    let cfg = integrator(&args.common)?;
    if args.levels.is_none() && args.start.is_empty() {
        return Err(Failure::Usage("trace needs --levels or --start".into()));
    }
    let mut blocks = Vec::new();
    if let Some(levels) = &args.levels {
        for token in levels.split(',').map(str::trim) {
            if token == "separatrix" {
                if st.level() == 0 {
                    return Err(Failure::Usage("the ground state has no separatrix".into()));
                }
                blocks.push(separatrix_block(&st, &cfg)?);
                continue;
            }
            let value: f64 = token.parse().map_err(|_| Failure::Usage(format!("level `{token}` is not a number")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Failure::Usage(format!("level {token} must be positive")));
            }
            let lambda = st.log_level_from_invariant(value);
            if let Some(sep) = st.separatrix_log_level() {
                if (lambda - sep).abs() <= 1e-12 * (1.0 + sep.abs()) {
                    blocks.push(separatrix_block(&st, &cfg)?);
                    continue;
                }
            }
            let chords = st.level_chords(lambda);
            if chords.is_empty() {
                return Err(Failure::Usage(format!("no orbit has invariant level {token}")));
            }
            let segments = chords.iter().map(|c| orbit(&st, ComplexPoint::real(c.right), &cfg)).collect::<Result<_, _>>()?;
            blocks.push(Block { segments });
        }
    }
    for s in &args.start {
        let p = parse_point(s)?;
        blocks.push(Block { segments: vec![orbit(&st, p, &cfg)?] });
    }

    let mut m = manifest("trace", &args.common);
    m.levels = args.levels.clone();
    m.starts = args.start.clone();
    let mut csv = Csv::new(args.common.out.as_deref(), &m, &["block", "segment", "orbit", "t", "X_r", "X_i", "invariant_level"])?;
    for (b, block) in blocks.iter().enumerate() {
        for (s, (kind, pts)) in block.segments.iter().enumerate() {
            for &(t, p) in pts {
                csv.row(&[b.to_string(), s.to_string(), kind.clone(), num(t), num(p.xr), num(p.xi), num(st.stream_invariant(p))])?;
            }
        }
    }
    Ok(csv.finish()?)
}

fn is_pole_failure(e: &DensityError) -> bool {
    let eigen = |e: &EigenError| matches!(e, EigenError::PoleProximity(_));
    match e {
        DensityError::NodeSingularity(_) => true,
        DensityError::Field(f) => eigen(f),
        DensityError::Trajectory(TrajectoryError::PoleProximity { .. }) => true,
        DensityError::Trajectory(TrajectoryError::Field(f)) => eigen(f),
        _ => false,
    }
}

struct Cell {
    p: ComplexPoint,
    value: Option<f64>,
    region: &'static str,
}

fn cell(st: &Eigenstate, method: GridMethod, p: ComplexPoint, cfg: &IntegratorConfig) -> Result<Cell, Failure> {
    if st.pole_positions().iter().any(|&r| ComplexPoint::real(r).distance(p) < POLE_EXCLUSION) {
        return Ok(Cell { p, value: None, region: "pole" });
    }
    let region = if st.in_subnest(p, true) { "subnest" } else { "nest" };
    let value = match method {
        GridMethod::Wyatt => Ok(wyatt_density(st, p)),
        GridMethod::Source => Ok(source_density(st, p)),
        GridMethod::Conserved => probability::density(st, DensityMethod::Conserved, p, cfg).map(|s| s.value),
        GridMethod::Combined => probability::density(st, DensityMethod::Combined, p, cfg).map(|s| s.value),
    };
    match value {
        Ok(v) => Ok(Cell { p, value: Some(v), region }),
        Err(e) if is_pole_failure(&e) => Ok(Cell { p, value: None, region }),
        Err(e) => Err(Failure::Numerical(format!("density at ({}, {}) failed: {e}", num(p.xr), num(p.xi)))),
    }
}

fn method_name(m: GridMethod) -> &'static str {
    match m {
        GridMethod::Conserved => "conserved",
        GridMethod::Wyatt => "wyatt",
        GridMethod::Combined => "combined",
        GridMethod::Source => "source",
    }
}

pub fn density(args: &DensityArgs) -> Result<(), Failure> {
    let st = state(&args.common)?;
    let cfg = integrator(&args.common)?;
    let (xr_spec, xi_spec) = args
        .grid
        .split_once(',')
        .ok_or_else(|| Failure::Usage(format!("grid `{}` needs two axes separated by a comma", args.grid)))?;
    let (xs, ys) = (parse_axis(xr_spec)?, parse_axis(xi_spec)?);
    let points: Vec<ComplexPoint> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| ComplexPoint::new(x, y))).collect();
    let cells: Vec<Cell> = points.par_iter().map(|&p| cell(&st, args.method, p, &cfg)).collect::<Result<_, _>>()?;

    let mut m = manifest("density", &args.common);
    m.grid = Some(args.grid.clone());
    m.method = Some(method_name(args.method).into());
    let mut csv = Csv::new(args.common.out.as_deref(), &m, &["X_r", "X_i", "value", "method", "region", "masked"])?;
    for c in &cells {
        let value = c.value.map(num).unwrap_or_default();
        let masked = if c.value.is_some() { "0" } else { "1" };
        csv.row(&[num(c.p.xr), num(c.p.xi), value, method_name(args.method).into(), c.region.into(), masked.into()])?;
    }
    Ok(csv.finish()?)
}

pub fn born(args: &BornArgs) -> Result<(), Failure> {
    let st = state(&args.common)?;
    integrator(&args.common)?;
    let xs = parse_axis(&args.grid)?;
    let b = BornIntegral::new(&st).map_err(|e| Failure::Numerical(e.to_string()))?;
    let rows: Vec<(f64, Option<f64>, f64)> = xs
        .par_iter()
        .map(|&x| match b.density(x) {
            Ok(v) => Ok((x, Some(v), born_density(&st, x))),
            Err(DensityError::NodeSingularity(_)) => Ok((x, None, born_density(&st, x))),
            Err(e) => Err(Failure::Numerical(format!("Born integral at {} failed: {e}", num(x)))),
        })
        .collect::<Result<_, _>>()?;

    let mut m = manifest("born", &args.common);
    m.grid = Some(args.grid.clone());
    let mut csv = Csv::new(args.common.out.as_deref(), &m, &["x_r", "P_integral", "P_closed_form", "rel_error", "masked"])?;
    for (x, integral, closed) in rows {
        let (p, rel, masked) = match integral {
            Some(v) => (num(v), num((v / closed - 1.0).abs()), "0"),
            None => (String::new(), String::new(), "1"),
        };
        csv.row(&[num(x), p, num(closed), rel, masked.into()])?;
    }
    Ok(csv.finish()?)
}

fn emit(m: RunManifest, reports: Vec<Report>) -> Result<(), Failure> {
    let out = m.out.clone();
    Ok(output::write_reports(out.as_deref(), &ReportFile { manifest: m, reports })?)
}

fn analysis_config(common: &Common) -> Result<AnalysisConfig, Failure> {
    Ok(AnalysisConfig { integrator: integrator(common)?, ..Default::default() })
}

pub fn fraction(args: &Common) -> Result<(), Failure> {
    let st = state(args)?;
    let r = analysis::fraction_inside(&st, &analysis_config(args)?).map_err(analysis_failure)?;
    emit(manifest("fraction", args), vec![r])
}

pub fn width(args: &Common) -> Result<(), Failure> {
    let st = state(args)?;
    let r = analysis::xi_max(&st, &integrator(args)?).map_err(analysis_failure)?;
    emit(manifest("width", args), vec![r])
}

pub fn classical(args: &ClassicalArgs) -> Result<(), Failure> {
    let cfg = integrator(&args.common)?;
    let mut m = manifest("classical", &args.common);
    let report = if args.si {
        let model = OscillatorModel::si(args.mass, args.omega, args.common.n).map_err(|e| Failure::Usage(e.to_string()))?;
        m.model = ModelParams { si: true, mass: args.mass, omega: args.omega };
        analysis::classical_width(&model, &cfg)
    } else {
        analysis::xi_max(&state(&args.common)?, &cfg)
    };
    emit(m, vec![report.map_err(analysis_failure)?])
}

pub fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let st = state(&args.common)?;
    let mut opts = if args.quick { SuiteOptions::quick() } else { SuiteOptions::default() };
    opts.seed = args.common.seed;
    opts.analysis = analysis_config(&args.common)?;
    let reports = properties::run_suite(&st, &opts).map_err(analysis_failure)?;

    let mut m = manifest("verify", &args.common);
    m.quick = args.quick;
    let (path, keep) = match &args.common.out {
        Some(p) => (p.clone(), true),
        None => (std::env::temp_dir().join(format!("ctraj-verify-{}.json", std::process::id())), false),
    };
    output::write_reports(Some(&path), &ReportFile { manifest: m, reports })?;
    let file = output::read_reports(&path);
    if !keep {
        let _ = std::fs::remove_file(&path);
    }
    let file = file?;

    let mut failed = 0;
    for r in &file.reports {
        let pass = r.evaluate();
        failed += (!pass) as usize;
        let reference = r.reference_value.map(|v| format!(" reference {} tol {}", num(v), num(r.tolerance))).unwrap_or_default();
        println!("{} {}: computed {}{reference}", if pass { "PASS" } else { "FAIL" }, r.claim, num(r.computed_value));
        for c in r.checks.iter().filter(|c| !c.holds()) {
            println!("     check {} = {} exceeds {}", c.name, num(c.value), num(c.limit));
        }
    }
    if keep {
        println!("reports written to {}", path.display());
    }
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {} properties failed", file.reports.len())));
    }
    Ok(())
}

