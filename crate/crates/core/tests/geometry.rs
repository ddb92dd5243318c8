use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use invflow::geometry::*;
use invflow::{point, BoundingBox, Direction, Error, Membership, Point, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain bisection on `g` over `[lo, hi]` with `g(lo) < 0 < g(hi)`.
fn bisect_oracle(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn disk_samples_lie_on_circle() {
    let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
    let s = d.sample_boundary(4, 7).unwrap();
    assert!(s.len() >= 4);
    for u in &s {
        assert!((u.point.norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn boundary_samples_are_deterministic_and_in_box() {
    for d in [Domain::g_ex33(), Domain::g1(), Domain::g2(), Domain::a_set(), Domain::d_set()] {
        let a = d.sample_boundary(200, 3).unwrap();
        let b = d.sample_boundary(200, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.len() >= 200, "{}", d.name);
        for u in &a {
            assert!(d.bbox().contains(&u.point, 0.0));
            assert_eq!(d.membership(&u.point), Membership::Boundary);
            let h = d.patch(u.patch_id).unwrap().h.eval(&u.point);
            assert!(h.abs() <= 1e-9, "{} patch {} h = {h}", d.name, u.patch_id);
        }
    }
}

#[test]
fn ex33_samples_include_cusp() {
    let g = Domain::g_ex33();
    for seed in 0..5 {
        let s = g.sample_boundary(50, seed).unwrap();
        let z = s
            .iter()
            .find(|u| (&u.point - point(&[1.0, 0.0])).norm() < 1e-12)
            .expect("cusp present");
        assert_eq!((z.patch_id, z.other_patch), (1, Some(5)));
    }
}

#[test]
fn segment_samples_lie_on_segment() {
    let c = Domain::segment_c();
    for u in c.sample_boundary(40, 1).unwrap() {
        assert_eq!(u.point[1], 0.0);
        assert!((1.0..=2.0).contains(&u.point[0]));
    }
}

#[test]
fn d_set_thetas() {
    let d = Domain::d_set();
    let e1 = Direction::from_slice(&[1.0, 0.0]).unwrap();
    assert!((radial_theta(&d, &e1).unwrap() - 1.0).abs() < 1e-8);
    let diag = Direction::from_slice(&[1.0, 1.0]).unwrap();
    let oracle = bisect_oracle(|t| 2.0 * (t / SQRT_2).sqrt() - 1.0, 0.0, 1.0);
    assert!((oracle - SQRT_2 / 4.0).abs() < 1e-12);
    assert!((radial_theta(&d, &diag).unwrap() - oracle).abs() < 1e-6);
}

#[test]
fn psi_is_identity_on_unit_ball() {
    let b = Domain::ball(Point::zeros(3), 1.0).unwrap();
    let body = StarBody::new(&b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let x = point(&[rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
        assert!((body.psi(&x).unwrap() - &x).norm() <= 1e-12);
    }
}

#[test]
fn psi_maps_axis_to_boundary() {
    let d = Domain::d_set();
    let y = psi(&d, &point(&[1.0, 0.0])).unwrap();
    assert!((y - point(&[1.0, 0.0])).norm() < 1e-9);
    assert_eq!(psi_inverse(&d, &Point::zeros(2)).unwrap(), Point::zeros(2));
}

#[test]
fn psi_round_trip_on_d() {
    let d = Domain::d_set();
    let body = StarBody::new(&d).unwrap();
    for y in d.sample_interior(100, 5) {
        let back = body.psi(&body.psi_inverse(&y).unwrap()).unwrap();
        assert!((back - &y).norm() <= 1e-8);
    }
    for u in d.sample_boundary(40, 5).unwrap() {
        let x = body.psi_inverse(&u.point).unwrap();
        assert!((x.norm() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn star_operations_reject_empty_interior() {
    let c = Domain::segment_c();
    assert!(matches!(strict_star_check(&c, &point(&[1.5, 0.0]), 10), Err(Error::EmptyInterior)));
    assert!(matches!(StarBody::with_center(&c, point(&[1.5, 0.0])), Err(Error::EmptyInterior)));
}

#[test]
fn strict_star_verdicts() {
    assert_eq!(strict_star_check(&Domain::d_set(), &Point::zeros(2), 1000).unwrap().verdict, StarVerdict::Strict);
    let a = strict_star_check(&Domain::a_set(), &Point::zeros(2), 1000).unwrap();
    assert_eq!(a.verdict, StarVerdict::StarNotStrict);
    let west = Direction::from_slice(&[-1.0, 0.0]).unwrap();
    assert!(a.witness.unwrap().angle_to(&west) < PI / 180.0);
    let g = Domain::g_ex33();
    assert_eq!(strict_star_check(&g, &point(&[-0.5, 0.0]), 720).unwrap().verdict, StarVerdict::Strict);
    assert_ne!(strict_star_check(&g, &point(&[0.75, 0.0]), 720).unwrap().verdict, StarVerdict::Strict);
    assert_ne!(strict_star_check(&g, &point(&[-0.5, 0.05]), 720).unwrap().verdict, StarVerdict::Strict);
}

#[test]
fn kernel_ball_checks() {
    let disk = Domain::ball(Point::zeros(2), 1.0).unwrap();
    assert!(kernel_ball_check(&disk, &Point::zeros(2), 0.5, 9, 360).unwrap().passed());
    let g = Domain::g_ex33();
    assert!(!kernel_ball_check(&g, &point(&[-0.5, 0.0]), 0.1, 9, 360).unwrap().passed());
    let g1 = Domain::g1();
    assert!(kernel_ball_check(&g1, &point(&[-0.5, 0.0]), 0.05, 9, 360).unwrap().passed());
    assert!(matches!(
        kernel_ball_check(&disk, &Point::zeros(2), 1.5, 9, 36),
        Err(Error::BallNotInterior(_))
    ));
}

#[test]
fn bony_normals_at_g1_corner_lie_in_exact_cone() {
    let g1 = Domain::g1();
    let u = g1.boundary_point(&point(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])).unwrap();
    let normals = bony_normals(&g1, &u, 1440, default_lambda(&g1));
    assert!(!normals.is_empty());
    // cone spanned by the radial direction (45°) and the edge normal (-45°)
    let angle_tol = 2.0 * 2.0 * PI / 1440.0;
    for nu in &normals {
        let a = nu.as_point()[1].atan2(nu.as_point()[0]);
        assert!(a.abs() <= PI / 4.0 + angle_tol, "angle {a}");
    }
    let e1 = Direction::from_slice(&[1.0, 0.0]).unwrap();
    assert!(normals.iter().any(|n| n.angle_to(&e1) < 3f64.to_radians()));
}

#[test]
fn bony_normals_of_smooth_convex_body_match_gradient() {
    let e = Domain::sublevel(
        ScalarField::with_gradient(
            |x: &Point| x[0] * x[0] / 4.0 + x[1] * x[1],
            |x: &Point| point(&[x[0] / 2.0, 2.0 * x[1]]),
        ),
        1.0,
        Point::zeros(2),
        BoundingBox::cube(2, 2.5),
    )
    .unwrap();
    let n = 720;
    let tol = 2.0 * PI / n as f64;
    for u in e.sample_boundary(12, 2).unwrap() {
        let grad = Direction::new(e.patch(1).unwrap().h.gradient(&u.point)).unwrap();
        let normals = bony_normals(&e, &u, n, default_lambda(&e));
        assert!(normals.iter().any(|nu| nu.angle_to(&grad) <= tol));
        assert!(normals.iter().all(|nu| nu.angle_to(&grad) <= 2.0 * tol));
    }
}

#[test]
fn sublevel_star_examples() {
    let sq = ScalarField::with_gradient(|x: &Point| x.norm_squared(), |x: &Point| x * 2.0);
    let r = sublevel_star_check(&sq, 1.0, &Point::zeros(2), &BoundingBox::cube(2, 2.0), 64).unwrap();
    assert!(r.passed());
    assert!((r.margin() + 2.0).abs() < 1e-8);

    let cubic = ScalarField::new(|x: &Point| (x[0] + 1.0) * (x[0] - 1.0).powi(3));
    match sublevel_star_check(&cubic, 0.0, &Point::zeros(1), &BoundingBox::cube(1, 2.0), 2).unwrap() {
        SublevelStar::Fail { witness, margin } => {
            assert!((witness[0] - 1.0).abs() < 1e-6);
            assert!(margin.abs() < 1e-9);
        }
        other => panic!("expected failure, got {other:?}"),
    }

    let quartic = ScalarField::with_gradient(
        |x: &Point| x[0].powi(4) + x[1].powi(4),
        |x: &Point| point(&[4.0 * x[0].powi(3), 4.0 * x[1].powi(3)]),
    );
    let r = sublevel_star_check(&quartic, 1.0, &point(&[0.2, 0.0]), &BoundingBox::cube(2, 2.0), 400).unwrap();
    assert!(r.passed());
    // dense oracle on the level curve: r(a) = (cos^4 + sin^4)^(-1/4)
    let mut worst = f64::NEG_INFINITY;
    for k in 0..20_000 {
        let a = 2.0 * PI * k as f64 / 20_000.0;
        let rad = (a.cos().powi(4) + a.sin().powi(4)).powf(-0.25);
        let (x, y) = (rad * a.cos(), rad * a.sin());
        worst = worst.max(4.0 * x.powi(3) * (0.2 - x) + 4.0 * y.powi(3) * (-y));
    }
    assert!(worst < 0.0 && r.margin() <= worst + 1e-3);
}

#[test]
fn sublevel_level_set_errors() {
    let v = ScalarField::new(|x: &Point| x[0]);
    assert!(matches!(
        sublevel_star_check(&v, 1.0, &Point::zeros(2), &BoundingBox::cube(2, 2.0), 16),
        Err(Error::LevelSetUnbounded(_))
    ));
    let w = ScalarField::new(|x: &Point| -x.norm());
    assert!(matches!(
        sublevel_star_check(&w, 1.0, &Point::zeros(2), &BoundingBox::cube(2, 2.0), 16),
        Err(Error::LevelSetEmpty)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_round_trip_on_ellipses(a in 0.5f64..2.0, b in 0.5f64..2.0, x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let e = Domain::star_radial(
            Point::zeros(2),
            move |v: &Point| 1.0 / ((v[0] / a).powi(2) + (v[1] / b).powi(2)).sqrt(),
            BoundingBox::cube(2, 2.2),
        ).unwrap();
        let body = StarBody::new(&e).unwrap();
        let p = point(&[x, y]);
        prop_assume!(p.norm() <= 1.0);
        let back = body.psi_inverse(&body.psi(&p).unwrap()).unwrap();
        prop_assert!((back - p).norm() <= 1e-6);
    }

    #[test]
    fn strict_rays_are_interior_before_theta(a in 0.5f64..2.0, b in 0.5f64..2.0, s in 0.01f64..1.0) {
        let e = Domain::star_radial(
            Point::zeros(2),
            move |v: &Point| 1.0 / ((v[0] / a).powi(2) + (v[1] / b).powi(2)).sqrt(),
            BoundingBox::cube(2, 2.2),
        ).unwrap();
        let cert = strict_star_check(&e, &Point::zeros(2), 64).unwrap();
        prop_assert_eq!(cert.verdict, StarVerdict::Strict);
        for (v, t) in &cert.theta_table {
            let x = v.as_point() * ((1.0 - s) * t);
            prop_assert_eq!(e.membership(&x), Membership::Interior);
        }
    }

    #[test]
    fn sublevel_pass_implies_strict_star(c4 in 0.2f64..2.0, c2 in 0.0f64..1.0, cx in -0.3f64..0.3, px in -0.3f64..0.3, py in -0.3f64..0.3) {
        let v = ScalarField::new(move |x: &Point| {
            c4 * x[0].powi(4) + x[1].powi(4) + c2 * x[0] * x[0] * x[1] * x[1] + cx * x[0] * x[1]
        });
        let p = point(&[px, py]);
        prop_assume!(v.eval(&p) < 0.5);
        let bbox = BoundingBox::cube(2, 3.0);
        if let Ok(r) = sublevel_star_check(&v, 1.0, &p, &bbox, 256) {
            if r.passed() {
                let d = Domain::sublevel(v.clone(), 1.0, p.clone(), bbox).unwrap();
                prop_assert_eq!(strict_star_check(&d, &p, 256).unwrap().verdict, StarVerdict::Strict);
            }
        }
    }

    #[test]
    fn bony_normals_survive_denser_recheck(k in 0usize..40) {
        let g2 = Domain::g2();
        let samples = g2.sample_boundary(40, 9).unwrap();
        let u = &samples[k % samples.len()];
        let lambda = default_lambda(&g2);
        for nu in bony_normals(&g2, u, 180, lambda) {
            prop_assert!(is_bony_normal(&g2, &u.point, &nu, lambda, 2 * 180));
        }
    }
}
