use num_complex::Complex64;
use proptest::prelude::*;

use ctraj::analysis::{self, AnalysisConfig, Side};
use ctraj::eigenstate::Eigenstate;
use ctraj::model::ComplexPoint;
use ctraj::probability::{self, wyatt_density, DensityMethod};
use ctraj::region::RegionSpec;
use ctraj::trajectory::{self, IntegratorConfig, OrbitClass, Termination};

fn st(n: u32) -> Eigenstate {
    Eigenstate::natural(n).unwrap()
}

fn away_from_poles(s: &Eigenstate, p: ComplexPoint, d: f64) -> bool {
    s.pole_positions().iter().all(|&r| ComplexPoint::real(r).distance(p) > d)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn schroedinger_residual(n in 0u32..=6, xr in -3.0f64..3.0, xi in -1.5f64..1.5) {
        let s = st(n);
        let p = ComplexPoint::new(xr, xi);
        let [psi, _, d2] = s.psi_derivatives(p).unwrap();
        let e = 2.0 * n as f64 + 1.0;
        let z = p.to_complex();
        let scale = psi.norm().max(d2.norm()).max(1e-300);
        prop_assert!((d2 - (z * z - e) * psi).norm() / scale < 1e-10);
        // Independent check by a five-point difference along the real direction.
        let h = 1e-3;
        let f = |dx: f64| s.psi(ComplexPoint::new(xr + dx, xi)).unwrap();
        let fd = (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
        prop_assert!((fd - (z * z - e) * psi).norm() / scale < 1e-6);
    }

    #[test]
    fn conjugation_and_parity(n in 1u32..=5, xr in -3.0f64..3.0, xi in -1.5f64..1.5) {
        let s = st(n);
        let p = ComplexPoint::new(xr, xi);
        prop_assume!(away_from_poles(&s, p, 1e-3));
        let psi = s.psi(p).unwrap();
        prop_assert!((s.psi(p.conj()).unwrap() - psi.conj()).norm() <= 1e-13 * psi.norm().max(1e-300));
        let v = s.velocity(p).unwrap();
        let tol = 1e-12 * v.norm().max(1.0);
        prop_assert!((s.velocity(p.conj()).unwrap() + v.conj()).norm() < tol);
        prop_assert!((s.velocity(ComplexPoint::new(-xr, -xi)).unwrap() + v).norm() < tol);
        prop_assert_eq!(wyatt_density(&s, p.conj()), wyatt_density(&s, p));
    }

    #[test]
    fn closed_form_invariants_match_the_product_form(n in 1u32..=2, xr in -2.5f64..2.5, xi in -1.5f64..1.5) {
        let s = st(n);
        let p = ComplexPoint::new(xr, xi);
        prop_assume!(away_from_poles(&s, p, 1e-3));
        let direct = s.stream_invariant(p);
        let product = s.invariant_from_log_level(s.log_level(p));
        prop_assert!((direct / product - 1.0).abs() < 1e-11, "{} {}", direct, product);
    }

    #[test]
    fn winding_agrees_with_level(n in 1u32..=3, xr in -2.5f64..2.5, xi in 0.01f64..1.2) {
        let s = st(n);
        let p = ComplexPoint::new(xr, xi);
        prop_assume!(away_from_poles(&s, p, 1e-2));
        let l = s.log_level(p);
        prop_assume!(s.basin_limits().iter().filter(|v| v.is_finite()).all(|v| (l - v).abs() > 1e-3));
        let t = trajectory::integrate(&s, p, &IntegratorConfig::default()).unwrap();
        prop_assert!(t.closed);
        prop_assert_eq!(trajectory::classify(&t), trajectory::classify_by_level(&s, p));
    }
}

#[test]
fn time_reversal_returns_to_start() {
    let cfg = IntegratorConfig::default();
    for (n, p) in [(1, ComplexPoint::new(1.2, 0.4)), (2, ComplexPoint::new(-0.3, 0.6)), (3, ComplexPoint::new(2.0, -0.5))] {
        let s = st(n);
        let fwd = trajectory::integrate_for(&s, p, 1.3, false, &cfg).unwrap();
        assert_eq!(fwd.termination, Termination::Duration);
        let back = trajectory::integrate_for(&s, fwd.end(), 1.3, true, &cfg).unwrap();
        assert!(back.end().distance(p) < 1e-8, "n={n}: {:?}", back.end());
    }
}

#[test]
fn closed_orbits_return_and_keep_their_class() {
    let cfg = IntegratorConfig::default();
    let s = st(2);
    for p in [ComplexPoint::new(0.2, 0.1), ComplexPoint::new(1.5, 0.05), ComplexPoint::new(0.0, 0.9)] {
        let t = trajectory::integrate(&s, p, &cfg).unwrap();
        assert!(t.closed && t.period.unwrap() > 0.0);
        assert!(t.end().distance(p) < 1e-6, "{p:?} -> {:?}", t.end());
        let expect = trajectory::classify_by_level(&s, p);
        assert_eq!(trajectory::classify(&t), expect);
        // A second lap from a point on the orbit gives the same period.
        let mid = t.samples[t.samples.len() / 3].point;
        let again = trajectory::integrate(&s, mid, &cfg).unwrap();
        assert!((again.period.unwrap() / t.period.unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn nest_orbits_wind_once_around_a_pole() {
    let s = st(1);
    let t = trajectory::integrate(&s, ComplexPoint::new(0.0, 0.5), &IntegratorConfig::default()).unwrap();
    assert_eq!(trajectory::classify(&t), OrbitClass::Nest);
    assert_eq!(t.windings[0].winding.map(i32::abs), Some(1));
    assert!((t.period.unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-8);
}

#[test]
fn conserved_density_is_continuous_where_the_anchor_switches() {
    // Halfway between two crossings the nearest anchor changes sides; both must give one density.
    let cfg = IntegratorConfig::default();
    for n in [1, 2, 3] {
        let s = st(n);
        let right = s.real_level_crossings(s.separatrix_log_level().unwrap() + 0.7).last().copied().unwrap();
        let t = trajectory::integrate(&s, ComplexPoint::real(right), &cfg).unwrap();
        let half = t.crossings.iter().map(|c| c.t).find(|&c| c > 1e-6).unwrap();
        let at = |dt: f64| trajectory::integrate_for(&s, ComplexPoint::real(right), 0.5 * half + dt, false, &cfg).unwrap().end();
        let (a, b) = (at(-1e-7), at(1e-7));
        let da = probability::conserved_density(&s, a, &cfg).unwrap();
        let db = probability::conserved_density(&s, b, &cfg).unwrap();
        assert_ne!(da.anchor.unwrap().xr, db.anchor.unwrap().xr, "n={n}: both anchored on one side");
        assert!((da.value / db.value - 1.0).abs() < 1e-6, "n={n}: {} {}", da.value, db.value);
    }
}

#[test]
fn combined_density_switches_branch_at_the_separatrix() {
    let cfg = IntegratorConfig::default();
    let s = st(2);
    let inner = ComplexPoint::new(0.0, 0.2);
    let outer = ComplexPoint::new(0.0, 0.6);
    assert_eq!(probability::density(&s, DensityMethod::Combined, inner, &cfg).unwrap().branch, DensityMethod::Wyatt);
    assert_eq!(probability::density(&s, DensityMethod::Combined, outer, &cfg).unwrap().branch, DensityMethod::Conserved);
}

#[test]
fn inside_mass_by_area_and_by_orbits_agree() {
    let cfg = AnalysisConfig::default();
    for n in [2, 3] {
        let s = st(n);
        let (orbits, _) = analysis::mass_by_orbits(&s, Side::Inside, 0.0, &cfg).unwrap();
        let area = analysis::integrate_region(&s, |p| Ok::<f64, ()>(wyatt_density(&s, p)), &RegionSpec::inside(&s), &cfg).unwrap();
        assert!((area.value / orbits.value - 1.0).abs() < 1e-7, "n={n}: {} {}", area.value, orbits.value);
    }
}

#[test]
fn separatrix_branches_stay_on_the_separatrix_level() {
    let s = st(3);
    let level = s.separatrix_log_level().unwrap();
    for b in analysis::trace_separatrix(&s, &IntegratorConfig::default()).unwrap() {
        for smp in b.samples.iter().filter(|x| away_from_poles(&s, x.point, 1e-3)) {
            assert!((s.log_level(smp.point) - level).abs() < 1e-6, "{:?}", smp.point);
        }
    }
}

#[test]
fn velocity_is_minus_i_log_derivative() {
    let s = st(3);
    let p = ComplexPoint::new(0.4, 0.3);
    let [psi, d1, _] = s.psi_derivatives(p).unwrap();
    let v = s.velocity(p).unwrap();
    assert!((v - (-Complex64::i() * d1 / psi)).norm() < 1e-12 * v.norm());
}
