use std::f64::consts::PI;

use invflow::bounding::BoundingFamily;
use invflow::conditions::{theorem_applicability, Grid, Problem, Theorem};
use invflow::flow::{integrate, IntegratorConfig, Smoothness, VectorField};
use invflow::geometry::Domain;
use invflow::solve::{
    default_schedule, find_equilibrium_perturbed, find_periodic, grid_zero_oracle, short_period_limit, Gate,
    PeriodicOptions, Scheme, Status,
};
use invflow::{point, Error, Point};
use proptest::prelude::*;

fn disk() -> Domain {
    Domain::ball(Point::zeros(2), 1.0).unwrap()
}

fn spiral() -> VectorField {
    VectorField::autonomous(2, |x| point(&[-x[1] - 0.1 * x[0], x[0] - 0.1 * x[1]]))
}

fn pendulum() -> VectorField {
    VectorField::autonomous(2, |x| point(&[x[1], -x[0].sin() - 0.2 * x[1]]))
}

fn linear_periodic() -> VectorField {
    VectorField::periodic(1, 1.0, |t, y| point(&[-y[0] + (2.0 * PI * t).sin()]))
}

fn minus_g(x: &Point) -> Point {
    -x
}

#[test]
fn rotation_equilibrium() {
    let d = disk();
    let rot = VectorField::autonomous(2, |x| point(&[-x[1], x[0]]));
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let r = find_equilibrium_perturbed(&rot, &d, &fam, &minus_g, 64, None, Grid::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.z.norm() < 1e-8 && r.residual <= 1e-8);
    assert!(r.trace.len() >= 2 && r.trace.last().unwrap().n.is_infinite());
}

#[test]
fn spiral_equilibrium_matches_oracle() {
    let d = disk();
    let f = spiral();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let r = find_equilibrium_perturbed(&f, &d, &fam, &minus_g, 64, None, Grid::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.residual <= 1e-8);
    let scan = grid_zero_oracle(&f, &d, 200).unwrap();
    assert_eq!(scan.zeros.len(), 1);
    assert!((&r.z - &scan.zeros[0].0).norm() <= scan.cell * 2f64.sqrt());
}

#[test]
fn residual_bound_along_perturbations() {
    let d = disk();
    let f = spiral();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let r = find_equilibrium_perturbed(&f, &d, &fam, &minus_g, 64, None, Grid::default()).unwrap();
    // |g| <= 1 on the disk
    for s in r.trace.iter().filter(|s| s.n.is_finite()) {
        let fz = f.eval(0.0, &s.z).norm();
        assert!(fz <= 1.0 / s.n + s.residual + 1e-15, "n = {}", s.n);
    }
}

#[test]
fn pendulum_equilibrium() {
    let d = Domain::cuboid(point(&[-3.0, -3.0]), point(&[3.0, 3.0])).unwrap();
    let f = pendulum();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let r = find_equilibrium_perturbed(&f, &d, &fam, &minus_g, 64, None, Grid::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.z.norm() < 1e-7, "{:?}", r.z);
    let scan = grid_zero_oracle(&f, &d, 400).unwrap();
    assert!((&r.z - &scan.zeros[0].0).norm() <= scan.cell * 2f64.sqrt());
}

#[test]
fn missing_inward_certificate() {
    let d = disk();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let zero = |x: &Point| Point::zeros(x.len());
    let r = find_equilibrium_perturbed(&spiral(), &d, &fam, &zero, 8, None, Grid::default());
    assert!(matches!(r, Err(Error::NoInwardCertificate(_))));
}

#[test]
fn oracle_segment_has_no_zero() {
    let f = VectorField::autonomous(2, |x| point(&[1.0, -x[1]]));
    for d in [Domain::segment_c(), Domain::cuboid(point(&[-2.0, -2.0]), point(&[2.0, 2.0])).unwrap()] {
        let scan = grid_zero_oracle(&f, &d, 200).unwrap();
        assert!(scan.zeros.is_empty());
        assert!(scan.min_norm >= 1.0 - 1e-9);
        assert!(scan.scanned > 0);
    }
}

#[test]
fn oracle_contraction_single_cluster() {
    let scan = grid_zero_oracle(&VectorField::autonomous(2, |x| -x), &disk(), 100).unwrap();
    assert_eq!(scan.zeros.len(), 1);
    assert!(scan.zeros[0].0.norm() < 1e-12);
}

#[test]
fn oracle_pendulum_two_resolutions() {
    let d = Domain::cuboid(point(&[-3.0, -3.0]), point(&[3.0, 3.0])).unwrap();
    for res in [200, 400] {
        let scan = grid_zero_oracle(&pendulum(), &d, res).unwrap();
        assert_eq!(scan.zeros.len(), 1, "resolution {res}");
        assert!(scan.zeros[0].0.norm() <= scan.cell);
    }
}

#[test]
fn oracle_rejects_high_dimension() {
    let d = Domain::ball(Point::zeros(4), 1.0).unwrap();
    assert!(grid_zero_oracle(&VectorField::autonomous(4, |x| -x), &d, 4).is_err());
}

fn closed_form_y0() -> f64 {
    -2.0 * PI / (1.0 + 4.0 * PI * PI)
}

#[test]
fn linear_periodic_all_schemes() {
    let d = Domain::cuboid(point(&[-1.0]), point(&[1.0])).unwrap();
    let f = linear_periodic();
    for scheme in [Scheme::Direct, Scheme::Averaged { alpha: 0.5 }, Scheme::default()] {
        let r = find_periodic(&f, &d, None, scheme.clone(), Gate::Forced, &PeriodicOptions::default()).unwrap();
        assert_eq!(r.status, Status::Converged, "{scheme:?}");
        assert!(r.residual <= 1e-8, "{scheme:?}: {:e} {}", r.residual, r.evaluations);
        assert!((r.y0[0] - closed_form_y0()).abs() < 1e-6, "{scheme:?}: {}", r.y0[0]);
        assert!(r.forced);
        // periodic particular solution along the whole orbit
        for (t, y) in r.trajectory.times.iter().zip(&r.trajectory.states) {
            let exact = ((2.0 * PI * t).sin() - 2.0 * PI * (2.0 * PI * t).cos()) / (1.0 + 4.0 * PI * PI);
            assert!((y[0] - exact).abs() < 1e-6);
        }
    }
}

#[test]
fn half_step_reintegration() {
    let d = Domain::cuboid(point(&[-1.0]), point(&[1.0])).unwrap();
    let f = linear_periodic();
    let r = find_periodic(&f, &d, None, Scheme::default(), Gate::Forced, &PeriodicOptions::default()).unwrap();
    let tr = integrate(&f, &r.y0, (0.0, 1.0), &IntegratorConfig::rk4(1.0 / 4000.0)).unwrap();
    assert!((tr.last() - &r.y0).norm() <= 10.0 * r.tol_per);
}

#[test]
fn gate_from_applicability() {
    let d = disk();
    let f = VectorField::autonomous(2, |x| -x).with_period(0.7);
    let v = theorem_applicability(&Problem::new(d.clone(), f.clone()));
    assert!(v.grants_periodic().is_some());
    let r = find_periodic(&f, &d, None, Scheme::default(), Gate::Theorems(&v), &PeriodicOptions::default()).unwrap();
    assert!(r.y0.norm() < 1e-8 && !r.forced);
    assert!(r.granted_by.unwrap().gives_periodic());

    // example-3-3: nothing grants a periodic solution
    let phi = |s: f64| -2.0 * s.signum() * s.abs().sqrt();
    let g = Domain::g_ex33();
    let ex = VectorField::autonomous(2, move |x| point(&[1.0, phi(x[1])])).with_smoothness(Smoothness::ContinuousOnly);
    let pb = Problem::new(g.clone(), ex.clone()).with_family(BoundingFamily::from_domain_patches(&g, 0.25));
    let v = theorem_applicability(&pb);
    assert!(!v.applies(Theorem::InwardPeriodic));
    if v.grants_periodic().is_none() {
        let r = find_periodic(&ex, &g, None, Scheme::default(), Gate::Theorems(&v), &PeriodicOptions::default());
        assert!(matches!(r, Err(Error::NotApplicable)));
    }
}

#[test]
fn rotation_every_point_periodic() {
    let d = disk();
    let f = VectorField::autonomous(2, |x| point(&[-x[1], x[0]])).with_period(2.0 * PI);
    let opts = PeriodicOptions {
        start: Some(point(&[0.3, 0.4])),
        ..Default::default()
    };
    let r = find_periodic(&f, &d, None, Scheme::Direct, Gate::Forced, &opts).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.residual <= r.tol_per);
}

#[test]
fn short_period_contraction() {
    let d = disk();
    let r = short_period_limit(&VectorField::autonomous(2, |x| -x), &d, None, &default_schedule(), Gate::Forced, &PeriodicOptions::default())
        .unwrap();
    assert_eq!(r.equilibrium.status, Status::Converged);
    assert!(r.equilibrium.z.norm() < 1e-8);
}

#[test]
fn short_period_spiral_bound() {
    let d = disk();
    let f = spiral();
    let r = short_period_limit(&f, &d, None, &default_schedule(), Gate::Forced, &PeriodicOptions::default()).unwrap();
    assert_eq!(r.equilibrium.status, Status::Converged);
    assert!(r.equilibrium.z.norm() < 1e-7);
    // K from a dense polar sample of the disk
    let mut k = 0.0f64;
    for i in 0..=200 {
        for j in 0..360 {
            let (rr, a) = (i as f64 / 200.0, j as f64 * PI / 180.0);
            k = k.max(f.eval(0.0, &point(&[rr * a.cos(), rr * a.sin()])).norm());
        }
    }
    assert!((r.k_bound - k).abs() <= 0.02 * k);
    for s in &r.steps {
        assert!(s.deviation <= s.period * k * (1.0 + 1e-9), "T = {}", s.period);
        assert!(s.bound_holds());
    }
}

#[test]
fn short_period_ex33_finds_nothing() {
    let phi = |s: f64| -2.0 * s.signum() * s.abs().sqrt();
    let g = Domain::g_ex33();
    let f = VectorField::autonomous(2, move |x| point(&[1.0, phi(x[1])])).with_smoothness(Smoothness::ContinuousOnly);
    let opts = PeriodicOptions {
        max_evals: 100,
        ..Default::default()
    };
    let r = short_period_limit(&f, &g, None, &default_schedule(), Gate::Forced, &opts).unwrap();
    assert_eq!(r.equilibrium.status, Status::MaxIterations);
    assert!(r.equilibrium.residual >= 0.9);
}

#[test]
fn schedule_must_decrease() {
    let d = disk();
    let f = VectorField::autonomous(2, |x| -x);
    let o = PeriodicOptions::default();
    assert!(short_period_limit(&f, &d, None, &[0.5, 1.0], Gate::Forced, &o).is_err());
    assert!(short_period_limit(&f, &d, None, &[], Gate::Forced, &o).is_err());
    assert!(short_period_limit(&linear_periodic(), &d, None, &[0.5], Gate::Forced, &o).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn averaged_iteration_on_affine_fields(
        a in -2.0f64..-0.2, b in -0.5f64..0.5, c in -2.0f64..-0.2,
        s in -0.3f64..0.3, k in 0usize..5,
    ) {
        let d = disk();
        let f = VectorField::periodic(2, 1.0, move |t, x| {
            point(&[a * x[0] + b * x[1] + s * (2.0 * PI * t).sin(), -b * x[0] + c * x[1] + s])
        });
        let starts = d.interior_lattice(8);
        let x0 = starts[k % starts.len()].clone();
        let opts = PeriodicOptions { start: Some(x0), ..Default::default() };
        let r = find_periodic(&f, &d, None, Scheme::Averaged { alpha: 0.5 }, Gate::Forced, &opts).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
        prop_assert!(r.residual <= r.tol_per);
    }
}
