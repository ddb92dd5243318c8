//! Built-in domain kinds.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::Arc;

use super::domain::{BoundaryPatch, BoundaryPoint, Domain, NormalFn, PatchShape, Structure};
use super::star::first_crossing;
use crate::error::{Error, Result};
use crate::lattice::sphere_map;
use crate::types::{point, BoundingBox, Direction, Point, ScalarField};

const VALID_SLACK: f64 = 1e-9;

fn param(dim: usize, map: impl Fn(&[f64]) -> Point + Send + Sync + 'static) -> PatchShape {
    PatchShape::Param {
        dim,
        map: Arc::new(map),
    }
}

fn normal_fn(f: impl Fn(&BoundaryPoint) -> Option<Point> + Send + Sync + 'static) -> NormalFn {
    Arc::new(f)
}

fn always(_: &Point) -> bool {
    true
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

impl Domain {
    /// Closed ball `B[center, radius]`.
    pub fn ball(center: Point, radius: f64) -> Result<Domain> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        let n = center.len();
        let bbox = BoundingBox::new(
            center.add_scalar(-radius * 1.05),
            center.add_scalar(radius * 1.05),
        )?;
        let c = center.clone();
        let level = move |x: &Point| (x - &c).norm() - radius;
        let patches = if n == 1 {
            let c0 = center[0];
            vec![
                BoundaryPatch::new(
                    1,
                    "right",
                    ScalarField::with_gradient(move |x: &Point| x[0] - c0 - radius, |_: &Point| point(&[1.0])),
                    always,
                    param(0, move |_| point(&[c0 + radius])),
                ),
                BoundaryPatch::new(
                    2,
                    "left",
                    ScalarField::with_gradient(move |x: &Point| c0 - radius - x[0], |_: &Point| point(&[-1.0])),
                    always,
                    param(0, move |_| point(&[c0 - radius])),
                ),
            ]
        } else {
            let (c1, c2, c3) = (center.clone(), center.clone(), center.clone());
            vec![BoundaryPatch::new(
                1,
                "sphere",
                ScalarField::with_gradient(
                    move |x: &Point| ((x - &c1).norm_squared() - radius * radius) / (2.0 * radius),
                    move |x: &Point| (x - &c2) / radius,
                ),
                always,
                param(n - 1, move |s| &c3 + sphere_map(s, n) * radius),
            )]
        };
        let cn = center.clone();
        Ok(Domain::new("ball", bbox, level, patches)?
            .with_structure(Structure::Convex {
                inscribed_radius: radius,
                normal: Some(normal_fn(move |u| Some(&u.point - &cn))),
            })
            .with_structure(Structure::StarShaped { center }))
    }

    /// Axis-aligned box; face ids are `2i+1` (lower) and `2i+2` (upper).
    pub fn cuboid(lo: Point, hi: Point) -> Result<Domain> {
        let b = BoundingBox::new(lo.clone(), hi.clone())?;
        if lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
            return Err(Error::EmptyInterior);
        }
        let n = b.dim();
        let pad = 0.02 * b.diameter();
        let bbox = BoundingBox::new(lo.add_scalar(-pad), hi.add_scalar(pad))?;
        let (l, h) = (lo.clone(), hi.clone());
        let level = move |x: &Point| {
            (0..n)
                .map(|i| (l[i] - x[i]).max(x[i] - h[i]))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut patches = Vec::with_capacity(2 * n);
        for i in 0..n {
            for upper in [false, true] {
                let id = 2 * i + 1 + upper as usize;
                let sign = if upper { 1.0 } else { -1.0 };
                let fixed = if upper { hi[i] } else { lo[i] };
                let (lv, hv) = (lo.clone(), hi.clone());
                let (lm, hm) = (lo.clone(), hi.clone());
                let mut g = Point::zeros(n);
                g[i] = sign;
                patches.push(BoundaryPatch::new(
                    id,
                    format!("{}{}", if upper { "x_max" } else { "x_min" }, i + 1),
                    ScalarField::with_gradient(move |x: &Point| sign * (x[i] - fixed), move |_: &Point| g.clone()),
                    move |x: &Point| {
                        (0..n).all(|j| j == i || (x[j] >= lv[j] - VALID_SLACK && x[j] <= hv[j] + VALID_SLACK))
                    },
                    param(n - 1, move |s| {
                        let mut x = Point::zeros(n);
                        let mut k = 0;
                        for j in 0..n {
                            if j == i {
                                x[j] = fixed;
                            } else {
                                x[j] = lerp(lm[j], hm[j], s[k]);
                                k += 1;
                            }
                        }
                        x
                    }),
                ));
            }
        }
        let inscribed = (0..n).map(|i| 0.5 * (hi[i] - lo[i])).fold(f64::INFINITY, f64::min);
        let center = (&lo + &hi) * 0.5;
        Ok(Domain::new("box", bbox, level, patches)?
            .with_structure(Structure::Convex {
                inscribed_radius: inscribed,
                normal: Some(normal_fn(move |u| {
                    let k = u.primary_patch() - 1;
                    let mut v = Point::zeros(n);
                    v[k / 2] = if k % 2 == 1 { 1.0 } else { -1.0 };
                    Some(v)
                })),
            })
            .with_structure(Structure::StarShaped { center }))
    }

    /// `{x : <a_k, x> <= b_k for all k}` inside `bbox`. Faces are
    /// parametrized in the plane and projected otherwise.
    pub fn halfspaces(normals: Vec<Point>, offsets: Vec<f64>, bbox: BoundingBox) -> Result<Domain> {
        if normals.is_empty() || normals.len() != offsets.len() {
            return Err(Error::InvalidArgument("halfspace normals and offsets must match".into()));
        }
        let n = bbox.dim();
        let mut a = Vec::with_capacity(normals.len());
        let mut b = Vec::with_capacity(normals.len());
        for (nk, bk) in normals.into_iter().zip(offsets) {
            if nk.len() != n {
                return Err(Error::Dimension { expected: n, got: nk.len() });
            }
            let norm = nk.norm();
            if !(norm > 0.0) {
                return Err(Error::InvalidArgument("zero halfspace normal".into()));
            }
            a.push(nk / norm);
            b.push(bk / norm);
        }
        let (a, b) = (Arc::new(a), Arc::new(b));
        let (al, bl) = (a.clone(), b.clone());
        let level = move |x: &Point| {
            al.iter()
                .zip(bl.iter())
                .map(|(ak, bk)| ak.dot(x) - bk)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut patches = Vec::with_capacity(a.len());
        for k in 0..a.len() {
            let (ah, bh) = (a[k].clone(), b[k]);
            let g = a[k].clone();
            let (av, bv) = (a.clone(), b.clone());
            let valid = move |x: &Point| {
                av.iter()
                    .zip(bv.iter())
                    .enumerate()
                    .all(|(j, (aj, bj))| j == k || aj.dot(x) - bj <= VALID_SLACK)
            };
            let shape = if n == 2 {
                match clip_line(&a, &b, k, &bbox) {
                    Some((p0, p1)) => param(1, move |s| &p0 + (&p1 - &p0) * s[0]),
                    None => PatchShape::Projected,
                }
            } else if n == 1 {
                let x = b[k] / a[k][0];
                param(0, move |_| point(&[x]))
            } else {
                PatchShape::Projected
            };
            patches.push(BoundaryPatch::new(
                k + 1,
                format!("face{}", k + 1),
                ScalarField::with_gradient(move |x: &Point| ah.dot(x) - bh, move |_: &Point| g.clone()),
                valid,
                shape,
            ));
        }
        let domain = Domain::new("halfspaces", bbox, level, patches)?;
        // Chebyshev center estimated on a lattice
        let (ac, bc) = (a.clone(), b.clone());
        let depth = |x: &Point| {
            ac.iter()
                .zip(bc.iter())
                .map(|(ak, bk)| bk - ak.dot(x))
                .fold(f64::INFINITY, f64::min)
        };
        let best = domain
            .interior_lattice(4096)
            .into_iter()
            .map(|x| (depth(&x), x))
            .max_by(|p, q| p.0.total_cmp(&q.0));
        let an = a.clone();
        let normal = normal_fn(move |u| Some(an[u.primary_patch() - 1].clone()));
        Ok(match best {
            Some((r, center)) => domain
                .with_structure(Structure::Convex {
                    inscribed_radius: r,
                    normal: Some(normal),
                })
                .with_structure(Structure::StarShaped { center }),
            None => domain.with_structure(Structure::Convex {
                inscribed_radius: 0.0,
                normal: Some(normal),
            }),
        })
    }

    /// Sub-level set `{V <= c}` seen from `center`; boundary points are found
    /// by root-finding along rays.
    pub fn sublevel(v: ScalarField, c: f64, center: Point, bbox: BoundingBox) -> Result<Domain> {
        let n = bbox.dim();
        if center.len() != n {
            return Err(Error::Dimension { expected: n, got: center.len() });
        }
        if !(v.eval(&center) < c) {
            return Err(Error::NotInterior(center.iter().copied().collect()));
        }
        let reach = bbox.max_distance_from(&center);
        let step = crate::types::tol::RAY_STEP * bbox.diameter();
        let vl = v.clone();
        let level = move |x: &Point| vl.eval(x) - c;
        let h = v.shifted(c);
        let ray_root = {
            let v = v.clone();
            let p = center.clone();
            move |dir: Point| -> Point {
                let d = Direction::unchecked(dir);
                match first_crossing(&|t| v.eval(&(&p + d.as_point() * t)) - c, reach, step) {
                    Some(t) => &p + d.as_point() * t,
                    None => Point::from_element(p.len(), f64::NAN),
                }
            }
        };
        let patches = if n == 1 {
            let (r1, r2) = (ray_root.clone(), ray_root);
            vec![
                BoundaryPatch::new(1, "right", h.clone(), always, param(0, move |_| r1(point(&[1.0])))),
                BoundaryPatch::new(2, "left", h, always, param(0, move |_| r2(point(&[-1.0])))),
            ]
        } else {
            vec![BoundaryPatch::new(
                1,
                "level set",
                h,
                always,
                param(n - 1, move |s| ray_root(sphere_map(s, n))),
            )]
        };
        Ok(Domain::new("sublevel", bbox, level, patches)?.with_structure(Structure::Sublevel { v, level: c }))
    }

    /// `{x : |x - p| <= r((x-p)/|x-p|)}` for a positive radial function `r`.
    pub fn star_radial(
        center: Point,
        radius: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        bbox: BoundingBox,
    ) -> Result<Domain> {
        let n = bbox.dim();
        let r = Arc::new(radius);
        let (p, rl) = (center.clone(), r.clone());
        let radial_level = move |x: &Point| {
            let d = x - &p;
            let norm = d.norm();
            if norm == 0.0 {
                return -rl(&sphere_map(&vec![0.0; n.saturating_sub(1).max(1)], n));
            }
            norm - rl(&(d / norm))
        };
        let h = ScalarField::new(radial_level.clone());
        let (pm, rm) = (center.clone(), r.clone());
        let patches = if n == 1 {
            let (p1, p2) = (center[0], center[0]);
            let (ra, rb) = (r.clone(), r.clone());
            vec![
                BoundaryPatch::new(1, "right", h.clone(), always, param(0, move |_| point(&[p1 + ra(&point(&[1.0]))]))),
                BoundaryPatch::new(2, "left", h, always, param(0, move |_| point(&[p2 - rb(&point(&[-1.0]))]))),
            ]
        } else {
            vec![BoundaryPatch::new(
                1,
                "radial",
                h,
                always,
                param(n - 1, move |s| {
                    let v = sphere_map(s, n);
                    &pm + &v * rm(&v)
                }),
            )]
        };
        Ok(Domain::new("star-radial", bbox, radial_level, patches)?.with_structure(Structure::StarShaped { center }))
    }

    /// `{sqrt|x1| + sqrt|x2| <= 1}`, one patch per quadrant.
    pub fn d_set() -> Domain {
        let bbox = BoundingBox::cube(2, 1.05);
        let mut patches = Vec::new();
        for (k, (s1, s2)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].into_iter().enumerate() {
            patches.push(d_arc(k + 1, s1, s2, 1.0));
        }
        Domain::new("d-set", bbox, d_level, patches)
            .expect("d-set has patches")
            .with_structure(Structure::StarShaped {
                center: Point::zeros(2),
            })
    }

    /// The set `D` with `{x1 <= -1/4, x2 >= 0}` removed.
    pub fn a_set() -> Domain {
        let bbox = BoundingBox::cube(2, 1.05);
        let level = |x: &Point| d_level(x).max(-(x[0] + 0.25).max(-x[1]));
        let in_cut = |x: &Point| x[0] < -0.25 - VALID_SLACK && x[1] > VALID_SLACK;
        let mut patches = vec![
            d_arc(1, 1.0, 1.0, 1.0),
            d_arc(3, -1.0, -1.0, 1.0),
            d_arc(4, 1.0, -1.0, 1.0),
        ];
        // upper-left arc only up to x1 = -1/4
        let mut ul = d_arc(2, -1.0, 1.0, 0.5);
        ul = BoundaryPatch::new(ul.id, ul.label.clone(), ul.h.clone(), move |x: &Point| !in_cut(x) && x[0] <= VALID_SLACK && x[1] >= -VALID_SLACK, ul.shape().clone());
        patches.insert(1, ul);
        patches.push(BoundaryPatch::new(
            5,
            "cut x1=-1/4",
            ScalarField::with_gradient(|x: &Point| -0.25 - x[0], |_: &Point| point(&[-1.0, 0.0])),
            |x: &Point| x[1] >= -VALID_SLACK && x[1] <= 0.25 + VALID_SLACK,
            param(1, |s| point(&[-0.25, 0.25 * s[0]])),
        ));
        patches.push(BoundaryPatch::new(
            6,
            "cut x2=0",
            ScalarField::with_gradient(|x: &Point| x[1], |_: &Point| point(&[0.0, 1.0])),
            |x: &Point| x[0] >= -1.0 - VALID_SLACK && x[0] <= -0.25 + VALID_SLACK,
            param(1, |s| point(&[lerp(-0.25, -1.0, s[0]), 0.0])),
        ));
        Domain::new("a-set", bbox, level, patches).expect("a-set has patches")
    }

    /// `]-1,1[^2 ∩ {|x2| < (x1-1)^2}` with patches 1..5 on the five arcs.
    pub fn g_ex33() -> Domain {
        let bbox = BoundingBox::cube(2, 1.05);
        let level = |x: &Point| {
            (x[0].abs() - 1.0)
                .max(x[1].abs() - 1.0)
                .max(x[1].abs() - (x[0] - 1.0).powi(2))
        };
        let in_right = |x: &Point| x[0] >= -VALID_SLACK && x[0] <= 1.0 + VALID_SLACK;
        let in_left = |x: &Point| x[0] >= -1.0 - VALID_SLACK && x[0] <= VALID_SLACK;
        let patches = vec![
            BoundaryPatch::new(
                1,
                "upper parabola",
                ScalarField::with_gradient(
                    |x: &Point| -(x[0] - 1.0).powi(2) + x[1],
                    |x: &Point| point(&[-2.0 * (x[0] - 1.0), 1.0]),
                ),
                move |x: &Point| in_right(x) && x[1] >= -VALID_SLACK,
                param(1, |s| point(&[s[0], (s[0] - 1.0).powi(2)])),
            ),
            BoundaryPatch::new(
                2,
                "top",
                ScalarField::with_gradient(|x: &Point| x[1] - 1.0, |_: &Point| point(&[0.0, 1.0])),
                in_left,
                param(1, |s| point(&[lerp(0.0, -1.0, s[0]), 1.0])),
            ),
            BoundaryPatch::new(
                3,
                "left",
                ScalarField::with_gradient(|x: &Point| -1.0 - x[0], |_: &Point| point(&[-1.0, 0.0])),
                |x: &Point| x[1].abs() <= 1.0 + VALID_SLACK,
                param(1, |s| point(&[-1.0, lerp(1.0, -1.0, s[0])])),
            ),
            BoundaryPatch::new(
                4,
                "bottom",
                ScalarField::with_gradient(|x: &Point| -1.0 - x[1], |_: &Point| point(&[0.0, -1.0])),
                in_left,
                param(1, |s| point(&[lerp(-1.0, 0.0, s[0]), -1.0])),
            ),
            BoundaryPatch::new(
                5,
                "lower parabola",
                ScalarField::with_gradient(
                    |x: &Point| -(x[0] - 1.0).powi(2) - x[1],
                    |x: &Point| point(&[-2.0 * (x[0] - 1.0), -1.0]),
                ),
                move |x: &Point| in_right(x) && x[1] <= VALID_SLACK,
                param(1, |s| point(&[s[0], -(s[0] - 1.0).powi(2)])),
            ),
        ];
        Domain::new("g-ex33", bbox, level, patches)
            .expect("g-ex33 has patches")
            .with_structure(Structure::StarShaped {
                center: point(&[-0.5, 0.0]),
            })
    }

    /// Unit disk minus the wedge `{|x2| <= x1}`.
    pub fn g1() -> Domain {
        let bbox = BoundingBox::cube(2, 1.05);
        let level = |x: &Point| (0.5 * (x.norm_squared() - 1.0)).max((x[0] - x[1].abs()) * FRAC_1_SQRT_2);
        let patches = vec![
            BoundaryPatch::new(
                1,
                "arc",
                ScalarField::with_gradient(|x: &Point| 0.5 * (x.norm_squared() - 1.0), |x: &Point| x.clone()),
                |x: &Point| x[0] <= x[1].abs() + VALID_SLACK,
                param(1, |s| {
                    let a = PI / 4.0 + s[0] * 1.5 * PI;
                    point(&[a.cos(), a.sin()])
                }),
            ),
            BoundaryPatch::new(
                2,
                "upper edge",
                ScalarField::with_gradient(
                    |x: &Point| (x[0] - x[1]) * FRAC_1_SQRT_2,
                    |_: &Point| point(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]),
                ),
                |x: &Point| x[0] >= -VALID_SLACK && x.norm() <= 1.0 + VALID_SLACK,
                param(1, |s| point(&[s[0] * FRAC_1_SQRT_2, s[0] * FRAC_1_SQRT_2])),
            ),
            BoundaryPatch::new(
                3,
                "lower edge",
                ScalarField::with_gradient(
                    |x: &Point| (x[0] + x[1]) * FRAC_1_SQRT_2,
                    |_: &Point| point(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
                ),
                |x: &Point| x[0] >= -VALID_SLACK && x.norm() <= 1.0 + VALID_SLACK,
                param(1, |s| point(&[s[0] * FRAC_1_SQRT_2, -s[0] * FRAC_1_SQRT_2])),
            ),
        ];
        Domain::new("g1", bbox, level, patches)
            .expect("g1 has patches")
            .with_structure(Structure::StarShaped {
                center: point(&[-0.5, 0.0]),
            })
    }

    /// Unit disk minus the disk of radius 1 around `(sqrt 2, 0)`.
    pub fn g2() -> Domain {
        let bbox = BoundingBox::cube(2, 1.05);
        let hole = |x: &Point| 0.5 * (1.0 - ((x[0] - SQRT_2).powi(2) + x[1] * x[1]));
        let level = move |x: &Point| (0.5 * (x.norm_squared() - 1.0)).max(hole(x));
        let patches = vec![
            BoundaryPatch::new(
                1,
                "outer arc",
                ScalarField::with_gradient(|x: &Point| 0.5 * (x.norm_squared() - 1.0), |x: &Point| x.clone()),
                move |x: &Point| hole(x) <= VALID_SLACK,
                param(1, |s| {
                    let a = PI / 4.0 + s[0] * 1.5 * PI;
                    point(&[a.cos(), a.sin()])
                }),
            ),
            BoundaryPatch::new(
                2,
                "inner arc",
                ScalarField::with_gradient(hole, |x: &Point| point(&[SQRT_2 - x[0], -x[1]])),
                |x: &Point| x.norm_squared() <= 1.0 + VALID_SLACK,
                param(1, |s| {
                    let b = 0.75 * PI + s[0] * 0.5 * PI;
                    point(&[SQRT_2 + b.cos(), b.sin()])
                }),
            ),
        ];
        Domain::new("g2", bbox, level, patches)
            .expect("g2 has patches")
            .with_structure(Structure::StarShaped {
                center: point(&[-0.5, 0.0]),
            })
    }

    /// The planar segment `[1,2] x {0}`: a convex body with empty interior.
    pub fn segment_c() -> Domain {
        let bbox = BoundingBox::new(point(&[0.9, -0.1]), point(&[2.1, 0.1])).expect("valid box");
        let level = |x: &Point| x[1].abs().max((x[0] - 1.5).abs() - 0.5);
        let patches = vec![BoundaryPatch::new(
            1,
            "segment",
            ScalarField::with_gradient(|x: &Point| x[1], |_: &Point| point(&[0.0, 1.0])),
            |x: &Point| x[0] >= 1.0 - VALID_SLACK && x[0] <= 2.0 + VALID_SLACK,
            param(1, |s| point(&[1.0 + s[0], 0.0])),
        )];
        Domain::new("segment-c", bbox, level, patches)
            .expect("segment has a patch")
            .with_structure(Structure::Convex {
                inscribed_radius: 0.0,
                normal: Some(normal_fn(|_| Some(point(&[0.0, 1.0])))),
            })
    }
}

fn d_level(x: &Point) -> f64 {
    x[0].abs().sqrt() + x[1].abs().sqrt() - 1.0
}

/// Quadrant arc of the set `D`: `s -> (s1 t^2, s2 (1-t)^2)` with `t = span * s`.
fn d_arc(id: usize, s1: f64, s2: f64, span: f64) -> BoundaryPatch {
    BoundaryPatch::new(
        id,
        format!("arc({s1:+},{s2:+})"),
        ScalarField::new(d_level),
        move |x: &Point| s1 * x[0] >= -VALID_SLACK && s2 * x[1] >= -VALID_SLACK,
        param(1, move |s| {
            let t = span * s[0];
            point(&[s1 * t * t, s2 * (1.0 - t) * (1.0 - t)])
        }),
    )
}

/// Endpoints of face `k` of a planar polygon, clipped by the other
/// halfspaces and the box.
fn clip_line(a: &[Point], b: &[f64], k: usize, bbox: &BoundingBox) -> Option<(Point, Point)> {
    let n = &a[k];
    let base = n * b[k];
    let dir = point(&[-n[1], n[0]]);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut cut = |coef: f64, rhs: f64| {
        // coef * t <= rhs
        if coef.abs() < 1e-15 {
            if rhs < -1e-12 {
                lo = f64::INFINITY;
            }
        } else if coef > 0.0 {
            hi = hi.min(rhs / coef);
        } else {
            lo = lo.max(rhs / coef);
        }
    };
    for j in 0..a.len() {
        if j != k {
            cut(a[j].dot(&dir), b[j] - a[j].dot(&base));
        }
    }
    for i in 0..2 {
        cut(dir[i], bbox.hi[i] - base[i]);
        cut(-dir[i], base[i] - bbox.lo[i]);
    }
    (lo < hi).then(|| (&base + &dir * lo, &base + &dir * hi))
}
