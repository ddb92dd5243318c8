use invflow::bounding::{
    from_bony, gradient_fidelity, nondegeneracy, verify_bounding, verify_bounding_at, BoundingFamily, BoundingFunction,
    Degeneracy,
};
use invflow::geometry::{bony_normals, default_lambda, Domain};
use invflow::{point, BoundingBox, Point, ScalarField};
use proptest::prelude::*;

fn ex31_domain() -> Domain {
    let v = ScalarField::with_gradient(
        |x: &Point| (x[0] + 1.0) * (x[0] - 1.0).powi(3),
        |x: &Point| point(&[(x[0] - 1.0).powi(2) * (4.0 * x[0] + 2.0)]),
    );
    Domain::sublevel(v, 0.0, point(&[0.0]), BoundingBox::cube(1, 1.5)).unwrap()
}

fn quadratic_ball() -> (Domain, BoundingFamily) {
    let v = ScalarField::with_gradient(|x: &Point| x.norm_squared(), |x: &Point| x * 2.0);
    let d = Domain::sublevel(v.clone(), 1.0, Point::zeros(2), BoundingBox::cube(2, 1.5)).unwrap();
    let f = BoundingFamily::sublevel(v, 1.0, &d);
    (d, f)
}

#[test]
fn ex33_resolves_patch_function() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let u = g.boundary_point(&point(&[0.5, 0.25])).unwrap();
    let v = fam.resolve(&u).unwrap();
    assert_eq!(v.patch_id, Some(1));
    for x in [point(&[0.1, 0.3]), point(&[-0.4, 0.9]), point(&[0.7, -0.2])] {
        let expected = -(x[0] - 1.0).powi(2) + x[1];
        assert!((v.eval(&x) - expected).abs() < 1e-15);
    }
}

#[test]
fn ex33_corner_takes_lowest_id() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let z = g.boundary_point(&point(&[1.0, 0.0])).unwrap();
    assert!(z.is_corner());
    let v = fam.resolve(&z).unwrap();
    assert_eq!(v.patch_id, Some(1));
    assert!((v.anchor_gradient() - point(&[0.0, 1.0])).norm() < 1e-15);
}

#[test]
fn halfspace_family_on_disk() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let fam = BoundingFamily::halfspace(&d).unwrap();
    let u = d.boundary_point(&point(&[0.6, 0.8])).unwrap();
    let v = fam.resolve(&u).unwrap();
    let x = point(&[0.1, -0.3]);
    assert!((v.eval(&x) - (&x - &u.point).dot(&u.point)).abs() < 1e-12);
}

#[test]
fn unresolved_point_is_an_error() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let mut u = g.boundary_point(&point(&[0.5, 0.25])).unwrap();
    u.point = point(&[0.0, 0.0]);
    assert!(matches!(fam.resolve(&u), Err(invflow::Error::Unresolved(_))));
}

#[test]
fn verify_ex33_family() {
    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let rep = verify_bounding(&fam, &g, 200, 16, 3).unwrap();
    assert!(rep.verdict.is_certified(), "{:?}", rep.worst);
}

#[test]
fn wrong_sign_family_is_violated() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let fam = BoundingFamily::custom(
        |u| {
            let a = u.point.clone();
            let b = a.clone();
            Some(BoundingFunction::new(
                a.clone(),
                0.5,
                Some(u.patch_id),
                ScalarField::with_gradient(move |x: &Point| (x - &a).norm_squared(), move |x: &Point| (x - &b) * 2.0),
            ))
        },
        0.5,
    );
    let rep = verify_bounding(&fam, &d, 50, 8, 0).unwrap();
    assert!(rep.verdict.is_violated());
}

#[test]
fn sublevel_family_is_bounding() {
    let (d, fam) = quadratic_ball();
    assert!(verify_bounding(&fam, &d, 100, 16, 1).unwrap().verdict.is_certified());
}

#[test]
fn ex31_is_degenerate_at_one() {
    let d = ex31_domain();
    let fam = BoundingFamily::sublevel(d.patches()[0].h.clone(), 0.0, &d);
    let rep = nondegeneracy(&fam, &d, 8, 0).unwrap();
    assert_eq!(rep.verdict, Degeneracy::Degenerate);
    assert!((rep.worst_point.point[0] - 1.0).abs() < 1e-9);
    assert!(rep.eta_minus <= 1e-9);
    assert!(fam.normalized(&d, 8, 0).is_err());
}

#[test]
fn nondegeneracy_ranges() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let rep = nondegeneracy(&BoundingFamily::halfspace(&d).unwrap(), &d, 100, 0).unwrap();
    assert!((rep.eta_minus - 1.0).abs() < 1e-12 && (rep.eta_plus - 1.0).abs() < 1e-12);

    let (d, fam) = quadratic_ball();
    let rep = nondegeneracy(&fam, &d, 100, 0).unwrap();
    assert!((rep.eta_minus - 2.0).abs() < 1e-9 && (rep.eta_plus - 2.0).abs() < 1e-9);
}

#[test]
fn normalization() {
    let (d, fam) = quadratic_ball();
    let w = fam.normalized(&d, 100, 0).unwrap();
    let pts = d.sample_boundary(100, 4).unwrap();
    for u in &pts {
        assert!((w.resolve(u).unwrap().anchor_gradient().norm() - 1.0).abs() < 1e-9);
    }
    // idempotent at anchors
    let ww = w.normalized(&d, 100, 0).unwrap();
    for u in &pts {
        let (a, b) = (w.resolve(u).unwrap(), ww.resolve(u).unwrap());
        assert!((a.eval(&u.point) - b.eval(&u.point)).abs() < 1e-12);
        assert!((a.anchor_gradient() - b.anchor_gradient()).norm() < 1e-12);
    }

    let g = Domain::g_ex33();
    let fam = BoundingFamily::from_domain_patches(&g, 0.25);
    let w = fam.normalized(&g, 200, 0).unwrap();
    for u in g.sample_boundary(200, 0).unwrap().iter().filter(|u| u.primary_patch() == 1) {
        let s = (4.0 * (u.point[0] - 1.0).powi(2) + 1.0).sqrt();
        let expected = point(&[-2.0 * (u.point[0] - 1.0), 1.0]) / s;
        assert!((w.resolve(u).unwrap().anchor_gradient() - expected).norm() < 1e-12);
    }
}

#[test]
fn bony_function_on_disk() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let lambda = 0.3;
    let u = d.boundary_point(&point(&[1.0, 0.0])).unwrap();
    let v = from_bony(&u, &point(&[lambda, 0.0]));
    assert!(v.eval(&u.point).abs() < 1e-15);
    assert!((v.anchor_gradient() - point(&[lambda, 0.0])).norm() < 1e-15);
    let x = point(&[0.2, 0.7]);
    let expected = 0.5 * (lambda * lambda - (&x - point(&[1.0 + lambda, 0.0])).norm_squared());
    assert!((v.eval(&x) - expected).abs() < 1e-14);
}

#[test]
fn g2_corner_bony_function_bounds_locally() {
    let g = Domain::g2();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = g.boundary_point(&point(&[s, s])).unwrap();
    let lambda = default_lambda(&g);
    let normals = bony_normals(&g, &u, 720, lambda);
    assert!(!normals.is_empty());
    let nu = normals[normals.len() / 2].as_point().clone();
    let fam = BoundingFamily::bony(lambda, move |_| Some(nu.clone()));
    let rep = verify_bounding_at(&fam, &g, &[u], 400).unwrap();
    assert!(rep.verdict.is_certified(), "{:?}", rep.worst);
    // independent oracle: the two disks describing G2
    for m in &rep.margins {
        let x = &m.point;
        let inside = x.norm() < 1.0 && (x[0] - 2f64.sqrt()).powi(2) + x[1] * x[1] > 1.0;
        assert!(inside && m.margin < 0.0);
    }
}

#[test]
fn bony_family_is_nondegenerate_at_lambda() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let lambda = default_lambda(&d);
    let fam = BoundingFamily::bony_auto(&d, lambda, 180);
    let rep = nondegeneracy(&fam, &d, 12, 0).unwrap();
    assert!((rep.eta_minus - lambda).abs() < 1e-12 && (rep.eta_plus - lambda).abs() < 1e-12);
}

#[test]
fn gradient_fidelity_of_builtin_families() {
    let g = Domain::g_ex33();
    assert!(gradient_fidelity(&BoundingFamily::from_domain_patches(&g, 0.25), &g, 200, 0).unwrap() <= 1e-5);
    let (d, fam) = quadratic_ball();
    assert!(gradient_fidelity(&fam, &d, 100, 0).unwrap() <= 1e-5);
    let b = Domain::ball(Point::zeros(3), 1.0).unwrap();
    assert!(gradient_fidelity(&BoundingFamily::halfspace(&b).unwrap(), &b, 100, 0).unwrap() <= 1e-5);
    for d in [Domain::g1(), Domain::g2()] {
        assert!(gradient_fidelity(&BoundingFamily::from_domain_patches(&d, 0.1), &d, 200, 0).unwrap() <= 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resolved_functions_vanish_at_anchor(seed in 0u64..1000) {
        let g = Domain::g_ex33();
        let fam = BoundingFamily::from_domain_patches(&g, 0.25);
        for u in g.sample_boundary(60, seed).unwrap() {
            prop_assert!(fam.resolve(&u).unwrap().eval(&u.point).abs() <= 1e-9);
        }
    }
}
