use serde::Serialize;

use super::domain::Domain;
use crate::error::{Error, Result};
use crate::lattice::{halton_point, orthonormal_complement, par_map, sphere_directions, tilt};
use crate::types::{tol, BoundingBox, Direction, Membership, Point, ScalarField};

/// Angular offsets (radians) added around every corner direction. Narrow
/// multi-crossing windows near cusps are invisible to a uniform lattice.
const CORNER_TILTS: [f64; 10] = [1e-7, 3e-7, 1e-6, 3e-6, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3];

/// How a ray from the center meets the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RayShape {
    /// One clean exit.
    Simple,
    /// The ray runs along the boundary or touches it before leaving.
    BoundarySegment,
    /// The ray leaves the closure and comes back.
    Gap,
    /// No exit inside the bounding box.
    NoCrossing,
}

#[derive(Clone, Debug)]
pub struct RayProfile {
    pub shape: RayShape,
    /// Distance to the first point that is not interior.
    pub theta: Option<f64>,
}

/// Smallest `t` in `(0, reach]` with `g(t) >= 0`, given `g(0) < 0`; coarse scan
/// with `step` followed by bisection.
pub(crate) fn first_crossing(g: &dyn Fn(f64) -> f64, reach: f64, step: f64) -> Option<f64> {
    let k = (reach / step).ceil() as usize + 1;
    let mut prev = 0.0;
    for i in 1..=k {
        let t = i as f64 * step;
        if !(g(t) < 0.0) {
            return Some(bisect(g, prev, t, reach));
        }
        prev = t;
    }
    None
}

fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, scale: f64) -> f64 {
    let target = tol::RAY_BISECT * scale.max(1.0);
    while hi - lo > target {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() < g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Walks `p + t v` at resolution `tol::RAY_STEP * diameter` and classifies
/// the run-length sequence of memberships.
pub fn scan_ray(domain: &Domain, p: &Point, v: &Direction) -> RayProfile {
    let diam = domain.diameter();
    let step = tol::RAY_STEP * diam;
    let reach = domain.bbox().max_distance_from(p) + step;
    let k = (reach / step).ceil() as usize + 1;
    let at = |t: f64| p + v.as_point() * t;
    let level = |t: f64| domain.level(&at(t));

    let mut classes = Vec::with_capacity(k + 1);
    for i in 0..=k {
        classes.push(domain.membership(&at(i as f64 * step)));
    }
    let Some(exit) = classes.iter().position(|m| *m != Membership::Interior) else {
        return RayProfile {
            shape: RayShape::NoCrossing,
            theta: None,
        };
    };
    let theta = if exit == 0 {
        0.0
    } else {
        bisect(&level, (exit - 1) as f64 * step, exit as f64 * step, diam)
    };
    let rest = &classes[exit..];
    let boundary_run = rest.iter().take_while(|m| **m == Membership::Boundary).count();
    let after = &rest[boundary_run..];
    let shape = match after.iter().position(|m| *m == Membership::Exterior) {
        Some(first_ext) => {
            if after[first_ext..].iter().any(|m| *m != Membership::Exterior) {
                RayShape::Gap
            } else if boundary_run >= 2 || first_ext > 0 {
                RayShape::BoundarySegment
            } else {
                RayShape::Simple
            }
        }
        // closure all the way to the box edge
        None if !after.is_empty() || boundary_run >= 2 => RayShape::BoundarySegment,
        None => RayShape::Simple,
    };
    RayProfile {
        shape,
        theta: Some(theta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StarVerdict {
    Strict,
    StarNotStrict,
    NotStar,
}

#[derive(Clone, Debug)]
pub struct StarCertificate {
    pub center: Point,
    pub kernel_radius: f64,
    pub directions_tested: usize,
    /// First crossing distance per tested direction.
    pub theta_table: Vec<(Direction, f64)>,
    pub verdict: StarVerdict,
    /// A direction showing why the verdict is not `Strict`.
    pub witness: Option<Direction>,
}

impl StarCertificate {
    /// Tabulated θ for the tested direction closest to `v`.
    pub fn theta_near(&self, v: &Direction) -> Option<(f64, f64)> {
        self.theta_table
            .iter()
            .map(|(d, t)| (d.angle_to(v), *t))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn require_interior(domain: &Domain, p: &Point) -> Result<()> {
    if !domain.has_interior() {
        return Err(Error::EmptyInterior);
    }
    if p.len() != domain.dim() {
        return Err(Error::Dimension {
            expected: domain.dim(),
            got: p.len(),
        });
    }
    if domain.membership(p) != Membership::Interior {
        return Err(Error::NotInterior(p.iter().copied().collect()));
    }
    Ok(())
}

/// Lattice directions plus every corner direction and its small tilts.
pub fn star_test_directions(domain: &Domain, p: &Point, n_dirs: usize) -> Vec<Direction> {
    let mut dirs = sphere_directions(domain.dim(), n_dirs);
    for c in domain.corners() {
        let Ok(v) = Direction::new(&c.point - p) else { continue };
        let comp = orthonormal_complement(&v);
        for w in &comp {
            for a in CORNER_TILTS {
                dirs.push(tilt(&v, w, a));
                dirs.push(tilt(&v, w, -a));
            }
        }
        dirs.push(v);
    }
    dirs
}

/// Ray-by-ray test of strict star-shapedness with respect to `p`.
pub fn strict_star_check(domain: &Domain, p: &Point, n_dirs: usize) -> Result<StarCertificate> {
    require_interior(domain, p)?;
    let dirs = star_test_directions(domain, p, n_dirs);
    let profiles = par_map(&dirs, |v| scan_ray(domain, p, v));
    let mut verdict = StarVerdict::Strict;
    let mut witness = None;
    let mut table = Vec::with_capacity(dirs.len());
    for (v, prof) in dirs.iter().zip(&profiles) {
        let this = match prof.shape {
            RayShape::Simple => StarVerdict::Strict,
            RayShape::BoundarySegment => StarVerdict::StarNotStrict,
            RayShape::Gap | RayShape::NoCrossing => StarVerdict::NotStar,
        };
        if rank(this) > rank(verdict) {
            verdict = this;
            witness = Some(v.clone());
        }
        if let Some(t) = prof.theta {
            table.push((v.clone(), t));
        }
    }
    Ok(StarCertificate {
        center: p.clone(),
        kernel_radius: 0.0,
        directions_tested: dirs.len(),
        theta_table: table,
        verdict,
        witness,
    })
}

fn rank(v: StarVerdict) -> u8 {
    match v {
        StarVerdict::Strict => 0,
        StarVerdict::StarNotStrict => 1,
        StarVerdict::NotStar => 2,
    }
}

#[derive(Clone, Debug)]
pub enum KernelCheck {
    Pass { centers: usize },
    Fail { center: Point, certificate: Box<StarCertificate> },
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        matches!(self, KernelCheck::Pass { .. })
    }
}

/// Centers of `B[p, δ]`: `p`, the `2N` axis points on the sphere, then
/// Halton points of the ball.
pub fn kernel_centers(p: &Point, delta: f64, n_centers: usize) -> Vec<Point> {
    let n = p.len();
    let mut out = vec![p.clone()];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut q = p.clone();
            q[i] += s * delta;
            out.push(q);
        }
    }
    let mut idx = 0u64;
    while out.len() < n_centers && idx < 100 * n_centers as u64 {
        let s = halton_point(idx, n);
        idx += 1;
        let x = Point::from_iterator(n, s.iter().map(|v| 2.0 * v - 1.0));
        if x.norm() <= 1.0 {
            out.push(p + x * delta);
        }
    }
    out
}

/// Strict star-shapedness with respect to sampled centers of `B[p, δ]`.
pub fn kernel_ball_check(
    domain: &Domain,
    p: &Point,
    delta: f64,
    n_centers: usize,
    n_dirs: usize,
) -> Result<KernelCheck> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("kernel radius must be positive".into()));
    }
    require_interior(domain, p)?;
    let centers = kernel_centers(p, delta, n_centers);
    if let Some(bad) = centers.iter().find(|c| domain.membership(c) != Membership::Interior) {
        return Err(Error::BallNotInterior(bad.iter().copied().collect()));
    }
    for c in &centers {
        let mut cert = strict_star_check(domain, c, n_dirs)?;
        if cert.verdict != StarVerdict::Strict {
            cert.kernel_radius = delta;
            return Ok(KernelCheck::Fail {
                center: c.clone(),
                certificate: Box::new(cert),
            });
        }
    }
    Ok(KernelCheck::Pass {
        centers: centers.len(),
    })
}

/// A domain together with a center it is strictly star-shaped about.
#[derive(Clone, Debug)]
pub struct StarBody<'a> {
    domain: &'a Domain,
    center: Point,
}

impl<'a> StarBody<'a> {
    /// Uses the domain's `StarShaped` tag.
    pub fn new(domain: &'a Domain) -> Result<Self> {
        let center = domain
            .star_center()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("{} carries no star center", domain.name)))?;
        Self::with_center(domain, center)
    }

    pub fn with_center(domain: &'a Domain, center: Point) -> Result<Self> {
        require_interior(domain, &center)?;
        Ok(StarBody { domain, center })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn domain(&self) -> &Domain {
        self.domain
    }

    /// Unique boundary distance along `v`.
    pub fn theta(&self, v: &Direction) -> Result<f64> {
        let prof = scan_ray(self.domain, &self.center, v);
        let dir = || v.as_point().iter().copied().collect::<Vec<_>>();
        match (prof.shape, prof.theta) {
            (RayShape::Simple, Some(t)) => Ok(t),
            (RayShape::NoCrossing, _) | (_, None) => Err(Error::NoCrossing { direction: dir() }),
            _ => Err(Error::MultipleCrossings { direction: dir() }),
        }
    }

    pub fn psi(&self, x: &Point) -> Result<Point> {
        let r = x.norm();
        if r > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("psi expects |x| <= 1, got {r}")));
        }
        if r == 0.0 {
            return Ok(self.center.clone());
        }
        let v = Direction::unchecked(x / r);
        Ok(&self.center + x * self.theta(&v)?)
    }

    pub fn psi_inverse(&self, y: &Point) -> Result<Point> {
        if self.domain.membership(y) == Membership::Exterior {
            return Err(Error::Exterior(y.iter().copied().collect()));
        }
        let d = y - &self.center;
        let r = d.norm();
        if r == 0.0 {
            return Ok(Point::zeros(y.len()));
        }
        let v = Direction::unchecked(&d / r);
        Ok(d / self.theta(&v)?)
    }

    /// Radial retraction of any point onto the closure: `Ψ(x/max(1,|x|))`
    /// with `x = (y-p)/θ`.
    pub fn retract(&self, y: &Point) -> Result<Point> {
        let d = y - &self.center;
        let r = d.norm();
        if r == 0.0 {
            return Ok(y.clone());
        }
        let v = Direction::unchecked(&d / r);
        let theta = self.theta(&v)?;
        Ok(if r > theta { &self.center + v.as_point() * theta } else { y.clone() })
    }
}

pub fn radial_theta(domain: &Domain, v: &Direction) -> Result<f64> {
    StarBody::new(domain)?.theta(v)
}

pub fn psi(domain: &Domain, x: &Point) -> Result<Point> {
    StarBody::new(domain)?.psi(x)
}

pub fn psi_inverse(domain: &Domain, y: &Point) -> Result<Point> {
    StarBody::new(domain)?.psi_inverse(y)
}

#[derive(Clone, Debug)]
pub enum SublevelStar {
    Pass { margin: f64, samples: usize },
    Fail { witness: Point, margin: f64 },
}

impl SublevelStar {
    pub fn passed(&self) -> bool {
        matches!(self, SublevelStar::Pass { .. })
    }

    pub fn margin(&self) -> f64 {
        match self {
            SublevelStar::Pass { margin, .. } | SublevelStar::Fail { margin, .. } => *margin,
        }
    }
}

/// Checks `<∇V(u), p - u> < 0` on the level set `V = c`, sampled by
/// root-finding along rays from `p`.
pub fn sublevel_star_check(
    v: &ScalarField,
    c: f64,
    p: &Point,
    bbox: &BoundingBox,
    n_samples: usize,
) -> Result<SublevelStar> {
    if !(v.eval(p) < c) {
        return Err(Error::NotInterior(p.iter().copied().collect()));
    }
    let reach = bbox.max_distance_from(p);
    let step = tol::RAY_STEP * bbox.diameter();
    let dirs = sphere_directions(p.len(), n_samples.max(1));
    let roots = par_map(&dirs, |d| {
        first_crossing(&|t| v.eval(&(p + d.as_point() * t)) - c, reach, step).map(|t| p + d.as_point() * t)
    });
    if roots.iter().all(|r| r.is_none()) {
        return Err(Error::LevelSetEmpty);
    }
    if let Some(i) = roots.iter().position(|r| r.is_none()) {
        return Err(Error::LevelSetUnbounded(dirs[i].as_point().iter().copied().collect()));
    }
    let mut worst: Option<(f64, Point)> = None;
    for u in roots.into_iter().flatten() {
        let m = v.gradient(&u).dot(&(p - &u));
        if worst.as_ref().is_none_or(|(w, _)| m > *w) {
            worst = Some((m, u));
        }
    }
    let (margin, witness) = worst.expect("at least one root");
    Ok(if margin < -tol::STRICT {
        SublevelStar::Pass {
            margin,
            samples: dirs.len(),
        }
    } else {
        SublevelStar::Fail { witness, margin }
    })
}
