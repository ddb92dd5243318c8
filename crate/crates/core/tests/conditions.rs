use invflow::bounding::BoundingFamily;
use invflow::conditions::{
    check_bony_all, check_bony_all_at, check_bony_some, check_bony_some_at, check_convex_some, check_inwardness,
    check_local, check_strict, check_weak, check_weak_at, theorem_applicability, Grid, HypothesisStatus, Problem,
    Theorem, Verdict,
};
use invflow::flow::{Smoothness, VectorField};
use invflow::geometry::{default_lambda, Domain};
use invflow::{point, tol, BoundingBox, Direction, Point, ScalarField};
use proptest::prelude::*;

fn phi(s: f64) -> f64 {
    -2.0 * s.signum() * s.abs().sqrt()
}

fn ex33_field() -> VectorField {
    VectorField::autonomous(2, |x| point(&[1.0, phi(x[1])])).with_smoothness(Smoothness::ContinuousOnly)
}

fn disk() -> Domain {
    Domain::ball(Point::zeros(2), 1.0).unwrap()
}

fn quadratic_family(d: &Domain) -> BoundingFamily {
    BoundingFamily::sublevel(
        ScalarField::with_gradient(|x: &Point| x.norm_squared(), |x: &Point| x * 2.0),
        1.0,
        d,
    )
}

fn interval() -> Domain {
    Domain::cuboid(point(&[-1.0]), point(&[1.0])).unwrap()
}

/// Field of G1: radial pull onto the circle plus a rotation vanishing on
/// both edges.
fn g1_field() -> VectorField {
    VectorField::autonomous(2, |x| {
        let r2 = x.norm_squared();
        let s = x[1] * (x[1] * x[1] - x[0] * x[0]);
        x * (1.0 - r2) + point(&[-x[1], x[0]]) * s
    })
}

#[test]
fn ex33_weak_condition() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let rep = check_weak(&fam, &ex33_field(), &g, Grid::new(400, 1, 0)).unwrap();
    assert!(rep.verdict.is_certified());
    assert!(rep.worst_margin <= 1e-9);
    for m in &rep.margins {
        match m.patch_id {
            1 | 5 => assert!(m.margin.abs() <= 1e-9, "{m:?}"),
            _ => assert!(m.margin <= -tol::STRICT, "{m:?}"),
        }
    }
    assert!(rep.margins_on(1).count() > 10 && rep.margins_on(5).count() > 10);
    let strict = check_strict(&fam, &ex33_field(), &g, Grid::new(400, 1, 0)).unwrap();
    assert!(strict.verdict.is_violated());
}

#[test]
fn contraction_on_disk() {
    let d = disk();
    let fam = quadratic_family(&d);
    let f = VectorField::autonomous(2, |x| -x);
    for rep in [
        check_weak(&fam, &f, &d, Grid::default()).unwrap(),
        check_strict(&fam, &f, &d, Grid::default()).unwrap(),
    ] {
        assert!(rep.verdict.is_certified());
        for m in &rep.margins {
            assert!((m.margin + 2.0).abs() < 1e-8);
        }
    }
}

#[test]
fn constant_field_leaves_interval() {
    let d = interval();
    let fam = BoundingFamily::sublevel(
        ScalarField::with_gradient(|x: &Point| x[0] * x[0], |x: &Point| x * 2.0),
        1.0,
        &d,
    );
    let rep = check_weak(&fam, &VectorField::autonomous(1, |_| point(&[1.0])), &d, Grid::default()).unwrap();
    assert!(rep.verdict.is_violated());
    let w = rep.worst.unwrap();
    assert!((w.point[0] - 1.0).abs() < 1e-9 && (w.margin - 2.0).abs() < 1e-9);
}

#[test]
fn rotation_is_not_strict() {
    let d = disk();
    let fam = quadratic_family(&d);
    let rot = VectorField::autonomous(2, |x| point(&[-x[1], x[0]]));
    let rep = check_strict(&fam, &rot, &d, Grid::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Violated);
    assert!(rep.worst_margin.abs() < 1e-12);
    assert!(check_weak(&fam, &rot, &d, Grid::default()).unwrap().verdict.is_certified());
}

#[test]
fn local_condition() {
    let d = disk();
    let fam = quadratic_family(&d);
    let f = VectorField::autonomous(2, |x| -x);
    assert!(check_local(&fam, &f, &d, 0.5, 16, Grid::new(100, 1, 0)).unwrap().verdict.is_certified());

    // near the upper parabola the margin is 2(1 - x1) + φ(x2), positive inside G
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let rep = check_local(&fam, &ex33_field(), &g, 0.5, 16, Grid::new(200, 1, 0)).unwrap();
    assert!(rep.verdict.is_violated());
    for m in rep.margins_on(1) {
        let expected = -2.0 * (m.point[0] - 1.0) + phi(m.point[1]);
        assert!((m.margin - expected).abs() < 1e-12);
    }
    assert!(rep.margins_on(1).any(|m| m.margin > 0.0));
}

#[test]
fn degenerate_local_condition_is_flagged() {
    let v = ScalarField::with_gradient(
        |x: &Point| (x[0] + 1.0) * (x[0] - 1.0).powi(3),
        |x: &Point| point(&[(x[0] - 1.0).powi(2) * (4.0 * x[0] + 2.0)]),
    );
    let d = Domain::sublevel(v.clone(), 0.0, point(&[0.0]), BoundingBox::cube(1, 1.5)).unwrap();
    let fam = BoundingFamily::sublevel(v, 0.0, &d);
    let rep = check_local(&fam, &VectorField::autonomous(1, |_| point(&[1.0])), &d, 0.5, 16, Grid::new(8, 1, 0)).unwrap();
    assert!(rep.verdict.is_violated());
    assert!(rep.notes.iter().any(|n| n.contains("degenerate")));
}

#[test]
fn inwardness() {
    let d = disk();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let w0 = point(&[0.2, 0.1]);
    let r = 1.0 - w0.norm();
    let w = w0.clone();
    let rep = check_inwardness(&fam, &move |x: &Point| &w - x, &d, Grid::default()).unwrap();
    assert!(rep.verdict.is_certified());
    assert!(rep.worst_margin <= -r + 1e-12);

    let v = ScalarField::with_gradient(
        |x: &Point| 0.25 * x[0] * x[0] + x[1] * x[1],
        |x: &Point| point(&[0.5 * x[0], 2.0 * x[1]]),
    );
    let e = Domain::sublevel(v.clone(), 1.0, Point::zeros(2), BoundingBox::cube(2, 2.2)).unwrap();
    let fam = BoundingFamily::sublevel(v, 1.0, &e).normalized(&e, 200, 0).unwrap();
    let rep = check_inwardness(&fam, &|x: &Point| -x, &e, Grid::default()).unwrap();
    assert!(rep.verdict.is_certified());
    assert!(rep.worst_margin <= -0.5);

    let rep = check_inwardness(&fam, &|x: &Point| Point::zeros(x.len()), &e, Grid::default()).unwrap();
    assert!(rep.verdict.is_violated());
}

#[test]
fn bony_all_on_g1_skips_reentrant_corner() {
    let g = Domain::g1();
    let rep = check_bony_all(&g, &g1_field(), Grid::new(120, 1, 0), 360).unwrap();
    assert!(rep.verdict.is_certified(), "{:?}", rep.worst);
    assert!(rep.notes.iter().any(|n| n.contains("[0.0, 0.0]")), "{:?}", rep.notes);
}

#[test]
fn outward_field_violates_bony() {
    let d = disk();
    let rep = check_bony_all(&d, &VectorField::autonomous(2, |x| x.clone()), Grid::new(40, 1, 0), 360).unwrap();
    assert!(rep.verdict.is_violated());
    assert!(rep.margins.iter().all(|m| m.margin > 0.0));
}

#[test]
fn g2_corner_separates_all_from_some() {
    let g = Domain::g2();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let corner = vec![g.boundary_point(&point(&[s, s])).unwrap()];
    let f = VectorField::autonomous(2, |_| point(&[0.5, -1.0]));
    let lambda = default_lambda(&g);
    let all = check_bony_all_at(&g, &f, &corner, &[0.0], 720, lambda);
    assert!(all.verdict.is_violated());
    let a = std::f64::consts::PI / 6.0;
    let chosen = move |_: &invflow::geometry::BoundaryPoint| Direction::from_slice(&[a.cos(), a.sin()]).ok();
    let some = check_bony_some_at(&g, &f, &chosen, &corner, &[0.0], 720, lambda).unwrap();
    assert!(some.verdict.is_certified());
}

#[test]
fn reentrant_corner_rejects_chosen_normal() {
    let g = Domain::g1();
    let origin = vec![g.boundary_point(&Point::zeros(2)).unwrap()];
    let chosen = |_: &invflow::geometry::BoundaryPoint| Direction::from_slice(&[1.0, 0.0]).ok();
    let err = check_bony_some_at(&g, &g1_field(), &chosen, &origin, &[0.0], 360, default_lambda(&g));
    assert!(matches!(err, Err(invflow::Error::NotAnOuterNormal { .. })));
}

#[test]
fn smooth_convex_bony_some_matches_convex_some() {
    let d = disk();
    let radial = |u: &invflow::geometry::BoundaryPoint| Direction::new(u.point.clone()).ok();
    for f in [
        VectorField::autonomous(2, |x| -x),
        VectorField::autonomous(2, |x| point(&[1.0 - x[1], x[0]])),
    ] {
        let grid = Grid::new(40, 1, 0);
        let a = check_bony_some(&d, &f, &radial, grid, 360).unwrap();
        let b = check_convex_some(&d, &f, &|u| Some(u.point.clone()), grid).unwrap();
        assert_eq!(a.verdict.is_certified(), b.verdict.is_certified());
        assert_eq!(a.verdict.is_violated(), b.verdict.is_violated());
    }
}

#[test]
fn bony_margins_scale_by_lambda() {
    let d = disk();
    let lambda = default_lambda(&d);
    let f = VectorField::autonomous(2, |x| point(&[-x[1] - 0.3 * x[0], x[0]]));
    let pts = d.sample_boundary(30, 2).unwrap();
    let radial = |u: &invflow::geometry::BoundaryPoint| Direction::new(u.point.clone()).ok();
    let some = check_bony_some_at(&d, &f, &radial, &pts, &[0.0], 360, lambda).unwrap();
    assert!(some.verdict.is_certified());
    let fam = BoundingFamily::bony(lambda, |u| Some(u.point.clone()));
    let weak = check_weak_at(&fam, &f, &pts, &[0.0]).unwrap();
    for (a, b) in some.margins.iter().zip(&weak.margins) {
        assert!((b.margin - lambda * a.margin).abs() < 1e-14);
    }
}

#[test]
fn normalization_keeps_violation_set() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let norm = fam.normalized(&g, 200, 0).unwrap();
    let f = VectorField::autonomous(2, |x| point(&[0.3 - x[1], 0.5 + x[0]]));
    let a = check_weak(&fam, &f, &g, Grid::default()).unwrap();
    let b = check_weak(&norm, &f, &g, Grid::default()).unwrap();
    assert!(!a.violations.is_empty());
    let pa: Vec<_> = a.violations.iter().map(|m| m.point.clone()).collect();
    let pb: Vec<_> = b.violations.iter().map(|m| m.point.clone()).collect();
    assert_eq!(pa, pb);
}

#[test]
fn disk_contraction_applicability() {
    let d = disk();
    let pb = Problem::new(d, VectorField::autonomous(2, |x| -x)).with_kernel(Point::zeros(2), 0.2);
    let v = theorem_applicability(&pb);
    for t in [
        Theorem::ConvexEquilibrium,
        Theorem::ConvexInteriorEquilibrium,
        Theorem::InwardPeriodic,
        Theorem::KernelPeriodic,
    ] {
        assert!(v.applies(t), "{t}: {:?}", v.checks_for(t).collect::<Vec<_>>());
    }
    for t in &v.applicable {
        assert!(v.checks_for(*t).all(|c| c.status == HypothesisStatus::Certified));
    }
}

#[test]
fn segment_applicability() {
    let c = Domain::segment_c();
    let pb = Problem::new(c, VectorField::autonomous(2, |x| point(&[1.0, -x[1]])))
        .with_normal(|_| Some(point(&[0.0, 1.0])));
    let v = theorem_applicability(&pb);
    let some = v
        .checks_for(Theorem::ConvexInteriorEquilibrium)
        .find(|c| c.hypothesis.contains("one outer normal"))
        .unwrap();
    assert_eq!(some.status, HypothesisStatus::Certified);
    assert!(!v.applies(Theorem::ConvexInteriorEquilibrium));
    assert!(!v.applies(Theorem::ConvexWeakInvariance));
    assert!(v.checks_for(Theorem::ConvexEquilibrium).any(|c| c.hypothesis.contains("convex") && c.status == HypothesisStatus::Certified));
    assert!(v.notes.iter().any(|n| n.contains("no existence conclusion")));
}

#[test]
fn ex33_applicability() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let pb = Problem::new(g, ex33_field())
        .with_family(fam)
        .with_kernel(point(&[-0.5, 0.0]), 0.1);
    let v = theorem_applicability(&pb);
    assert!(!v.applies(Theorem::InwardPeriodic));
    assert!(!v.applies(Theorem::KernelPeriodic));
    let weak = v
        .checks_for(Theorem::KernelPeriodic)
        .find(|c| c.hypothesis == "weak boundary condition")
        .unwrap();
    assert_eq!(weak.status, HypothesisStatus::Certified);
    let kernel = v
        .checks_for(Theorem::KernelPeriodic)
        .find(|c| c.hypothesis.contains("kernel"))
        .unwrap();
    assert_eq!(kernel.status, HypothesisStatus::Failed);
    assert!(v.grants_periodic().is_none(), "{:?}", v.applicable);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn strict_implies_weak(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.05f64..2.0, seed in 0u64..100) {
        let d = disk();
        let fam = quadratic_family(&d);
        let f = VectorField::autonomous(2, move |x| point(&[a * x[1] - c * x[0], -a * x[0] - c * x[1] + b * x[0] * x[1]]));
        let grid = Grid::new(100, 1, seed);
        let s = check_strict(&fam, &f, &d, grid).unwrap();
        let w = check_weak(&fam, &f, &d, grid).unwrap();
        if s.verdict.is_certified() {
            prop_assert!(w.verdict.is_certified());
        }
    }

    #[test]
    fn refinement_never_certifies_a_violation(a in -1.0f64..1.0, seed in 0u64..100) {
        let g = Domain::g_ex33();
        let fam = BoundingFamily::from_domain_patches(&g, 0.25);
        let f = VectorField::periodic(2, 1.0, move |t, x| point(&[1.0 + a * (6.0 * t).sin(), phi(x[1])]));
        let grid = Grid::new(60, 3, seed);
        let coarse = check_weak(&fam, &f, &g, grid).unwrap();
        let fine = check_weak(&fam, &f, &g, grid.doubled()).unwrap();
        if coarse.verdict.is_violated() {
            prop_assert!(fine.verdict.is_violated());
        }
    }
}

#[test]
fn bony_all_never_certifies_a_segment() {
    // (1, -x2) slides off the right end of the segment.
    let f = VectorField::autonomous(2, |x| point(&[1.0, -x[1]]));
    let d = Domain::segment_c();
    let rep = check_bony_all(&d, &f, Grid::new(100, 1, 0), 360).unwrap();
    assert!(!matches!(rep.verdict, Verdict::Certified { .. }), "{}", rep.verdict);
    let v = theorem_applicability(&Problem::new(d, f));
    assert!(!v.applicable.contains(&Theorem::BonyInvariance));
}
