//! Worked examples for each operation, checked against closed forms or
//! independent routes.

use lenslab::angles::{angle_between, periodic_distance};
use lenslab::geodesic::{connect, distance, integrate_until_exit, ExitVerdict, Lifts, Start, StepControl};
use lenslab::integralgeom::{busemann_gradient_check, busemann_value, santalo_volume, trapped_fraction, GRADIENT_STEP};
use lenslab::manifold::{BoundaryPoint, BoundaryVector, BumpProfile, End, ManifoldSpec};
use lenslab::revolution::{clairaut_exit, family_invariance_scan, ScanPath};
use lenslab::scattering::{compare, lens_table, scattering_map, LensPath, Status};
use lenslab::sampling::Sampling;
use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI, SQRT_2, TAU};

fn flat2() -> ManifoldSpec {
    ManifoldSpec::preset("flat-d2s1").unwrap()
}

fn cyl(u: [f64; 2], theta: f64, d: [f64; 3]) -> BoundaryVector {
    BoundaryVector::cylinder(u.to_vec(), theta, d.to_vec()).unwrap()
}

#[test]
fn interior_vertical_start_is_trapped() {
    let spec = flat2();
    let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
    let v = spec.tangent_vector(&p, &[0.0, 0.0, 1.0]).unwrap();
    let t = integrate_until_exit(&spec, &Start::Interior(v), 500.0, &StepControl::default(), false).unwrap();
    assert_eq!(t.verdict, ExitVerdict::Trapped { budget: 500.0 });
}

#[test]
fn connect_examples() {
    let spec = flat2();
    let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
    let q = spec.chart_point(&[0.5, 0.0, 0.0]).unwrap();
    assert!((connect(&spec, &p, &q, 0).unwrap().length - 0.5).abs() < 1e-10);
    let q = spec.chart_point(&[0.0, 0.0, PI]).unwrap();
    assert!((connect(&spec, &p, &q, 0).unwrap().length - PI).abs() < 1e-10);
    assert!((distance(&spec, &p, &q, Lifts::Windings(-1, 1)).unwrap() - PI).abs() < 1e-10);
    let q = spec.chart_point(&[0.0, 0.0, 1.5 * PI]).unwrap();
    assert!((distance(&spec, &p, &q, Lifts::Windings(-1, 1)).unwrap() - FRAC_PI_4 * 2.0).abs() < 1e-10);
    assert!((distance(&spec, &p, &q, Lifts::Cover).unwrap() - 1.5 * PI).abs() < 1e-10);
}

#[test]
fn connect_on_bump_matches_clairaut_length() {
    let profile = BumpProfile::new(0.0, 0.2, 0.05).unwrap();
    let spec = ManifoldSpec::revolution(profile);
    let phi = 0.6;
    let ex = clairaut_exit(&profile, phi, End::Lower).unwrap();
    let p = spec.chart_point(&[-1.0, 0.0]).unwrap();
    let q = spec.chart_point(&[1.0, ex.delta_alpha]).unwrap();
    let c = connect(&spec, &p, &q, 0).unwrap();
    assert!((c.length - ex.travel_time).abs() < 1e-6, "{} vs {}", c.length, ex.travel_time);
}

#[test]
fn scattering_on_flat_cylinder_and_bump() {
    let ctrl = StepControl::default();
    let b = BoundaryVector::meridian(End::Lower, 0.0, FRAC_PI_4).unwrap();
    let r = scattering_map(&ManifoldSpec::preset("flat-cylinder").unwrap(), &b, &ctrl).unwrap();
    assert!((r.travel_time - 2.0 * SQRT_2).abs() < 1e-9);
    let BoundaryPoint::End { alpha, .. } = r.exit.unwrap().point().clone() else { panic!() };
    assert!((alpha - 2.0).abs() < 1e-9);

    let profile = BumpProfile::new(0.0, 0.2, 0.05).unwrap();
    let r = scattering_map(&ManifoldSpec::revolution(profile), &b, &ctrl).unwrap();
    let ex = clairaut_exit(&profile, FRAC_PI_4, End::Lower).unwrap();
    assert!((r.travel_time - ex.travel_time).abs() < 1e-6);
    let exit = r.exit.unwrap();
    let BoundaryPoint::End { alpha, .. } = exit.point().clone() else { panic!() };
    assert!(periodic_distance(alpha, ex.delta_alpha, TAU) < 1e-6);
    let along = exit.direction()[0];
    assert!((exit.direction()[1].atan2(along) - FRAC_PI_4).abs() < 1e-9);
}

#[test]
fn bump_family_tables_agree() {
    let s = Sampling::Grid { counts: vec![2, 3, 12], include_endpoints: false };
    let ctrl = StepControl::default();
    let base = lens_table(&ManifoldSpec::preset("bump").unwrap(), &s, LensPath::Ode, &ctrl, 0).unwrap();
    let baseq = lens_table(&ManifoldSpec::preset("bump").unwrap(), &s, LensPath::Quadrature, &ctrl, 0).unwrap();
    for shift in [-0.5, 0.25, 0.5] {
        let spec = ManifoldSpec::revolution(BumpProfile::new(shift, 0.2, 0.05).unwrap());
        let q = compare(&baseq, &lens_table(&spec, &s, LensPath::Quadrature, &ctrl, 0).unwrap()).unwrap();
        assert!(q.max_deviation < 1e-6, "{q:?}");
        let o = compare(&base, &lens_table(&spec, &s, LensPath::Ode, &ctrl, 0).unwrap()).unwrap();
        assert!(o.max_deviation < 1e-4, "{o:?}");
        assert_eq!(o.status_disagreements, 0);
    }
}

#[test]
fn family_scan_on_ode_path() {
    let r = family_invariance_scan(0.2, 0.05, &[-0.5, 0.5], &[FRAC_PI_6, FRAC_PI_4, FRAC_PI_3], ScanPath::Ode, &StepControl::default()).unwrap();
    assert!(r.max_deviation.overall < 1e-4);
}

#[test]
fn tangential_grid_records_are_grazing() {
    let s = Sampling::Grid { counts: vec![3, 1, 5, 2], include_endpoints: true };
    let t = lens_table(&flat2(), &s, LensPath::Ode, &StepControl::default(), 0).unwrap();
    for r in &t.records {
        if r.entry.is_grazing() {
            assert_eq!(r.status, Status::Grazing);
            assert_eq!(r.travel_time, 0.0);
            assert_eq!(r.exit.as_ref(), Some(&r.entry));
        }
    }
    assert!(t.records.iter().any(|r| r.status == Status::Grazing));
}

#[test]
fn flat_d3s1_volume() {
    let spec = ManifoldSpec::preset("flat-d3s1").unwrap();
    let est = santalo_volume(&spec, 200_000, 1e4, 3, LensPath::Ode, &StepControl::default(), 0).unwrap();
    let exact = 8.0 * PI * PI / 3.0;
    assert!((est.volume - exact).abs() < 0.01 * exact, "{est:?}");
    assert!((est.volume - exact).abs() < 4.0 * est.std_error);
}

#[test]
fn bump_cylinder_trapped_fraction_vanishes() {
    // Boundary geodesics have |c| < 1 ≤ F, so only near-grazing samples
    // (TT = 2/cos φ > T) remain at any finite budget.
    let spec = ManifoldSpec::preset("bump").unwrap();
    let ctrl = StepControl::default();
    let f: Vec<f64> = [1e1, 1e2, 1e3]
        .iter()
        .map(|&t| trapped_fraction(&spec, t, 20_000, 4, &ctrl, 0).unwrap().fraction)
        .collect();
    assert!(f[0] >= f[1] && f[1] >= f[2]);
    assert!(f[2] < 1e-2 * f[0].max(1e-4));
}

#[test]
fn busemann_examples() {
    let spec = flat2();
    let v = [1.0, 0.0, 0.0];
    for t in [5.0, 50.0, 500.0] {
        assert!((busemann_value(&spec, &[0.0; 3], &v, &[3.0, 0.0, 0.0], t).unwrap() + 3.0).abs() < 1e-8);
    }
    let g = busemann_gradient_check(&spec, &[0.0; 3], &[0.6, 0.0, 0.8], &[2.0, -1.0, 0.5], 1e3, GRADIENT_STEP).unwrap();
    assert!((g - 1.0).abs() < 1e-3);
}

#[test]
fn comparator_directions_are_angles() {
    let a = cyl([1.0, 0.0], 0.0, [-1.0, 0.0, 0.0]);
    assert_eq!(angle_between(a.direction(), a.reversed().direction()), PI);
}
