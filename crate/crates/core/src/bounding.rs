//! Families `u ↦ V_u` of local bounding functions on the boundary.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::conditions::{ConditionKind, ConditionReport, MarginRecord};
use crate::error::{Error, Result};
use crate::geometry::{bony_normals, BoundaryPoint, Domain, Predicate};
use crate::lattice::{halton_point, par_map, sphere_map};
use crate::types::{tol, Direction, Membership, Point, ScalarField};

/// `V_u` anchored at a boundary point, negative on the domain inside
/// `B(anchor, radius)`.
#[derive(Clone, Debug)]
pub struct BoundingFunction {
    pub anchor: Point,
    pub radius: f64,
    pub patch_id: Option<usize>,
    field: ScalarField,
}

impl BoundingFunction {
    pub fn new(anchor: Point, radius: f64, patch_id: Option<usize>, field: ScalarField) -> Self {
        BoundingFunction {
            anchor,
            radius,
            patch_id,
            field,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.field.eval(x)
    }

    pub fn gradient(&self, x: &Point) -> Point {
        self.field.gradient(x)
    }

    pub fn anchor_gradient(&self) -> Point {
        self.field.gradient(&self.anchor)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }
}

/// `V_u(x) = ½(|ν|² - |x - (u + ν)|²)`: zero at `u`, gradient `ν` there,
/// negative off the closed ball `B[u + ν, |ν|]`.
pub fn from_bony(u: &BoundaryPoint, nu: &Point) -> BoundingFunction {
    let c = &u.point + nu;
    let r2 = nu.norm_squared();
    let (cv, cg) = (c.clone(), c);
    let field = ScalarField::with_gradient(
        move |x: &Point| 0.5 * (r2 - (x - &cv).norm_squared()),
        move |x: &Point| -(x - &cg),
    );
    BoundingFunction::new(u.point.clone(), nu.norm(), Some(u.primary_patch()), field)
}

/// One declared `V^i` with the predicate selecting where it applies.
#[derive(Clone)]
pub struct PatchFunction {
    pub id: usize,
    pub v: ScalarField,
    pub radius: f64,
    valid: Predicate,
}

impl PatchFunction {
    pub fn new(id: usize, v: ScalarField, radius: f64, valid: impl Fn(&Point) -> bool + Send + Sync + 'static) -> Self {
        PatchFunction {
            id,
            v,
            radius,
            valid: Arc::new(valid),
        }
    }
}

pub type NormalMap = Arc<dyn Fn(&BoundaryPoint) -> Option<Point> + Send + Sync>;
pub type Resolver = Arc<dyn Fn(&BoundaryPoint) -> Option<BoundingFunction> + Send + Sync>;

#[derive(Clone)]
pub enum FamilySource {
    /// `V_u = V - c` for every `u`.
    FromSublevel { v: ScalarField, c: f64 },
    /// `V_u(x) = <x - u, ν(u)>` with `ν` normalized.
    FromHalfspaces { normal: NormalMap },
    /// Quadratic function of the external ball `B[u + λν_u, λ]`.
    FromBonyNormals { lambda: f64, normal: NormalMap },
    /// Declared functions; ties go to the lowest id.
    ExplicitPatches(Vec<PatchFunction>),
    Custom(Resolver),
}

impl fmt::Debug for FamilySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySource::FromSublevel { c, .. } => write!(f, "FromSublevel(c = {c})"),
            FamilySource::FromHalfspaces { .. } => write!(f, "FromHalfspaces"),
            FamilySource::FromBonyNormals { lambda, .. } => write!(f, "FromBonyNormals(λ = {lambda})"),
            FamilySource::ExplicitPatches(p) => write!(f, "ExplicitPatches({} functions)", p.len()),
            FamilySource::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundingFamily {
    pub source: FamilySource,
    /// Radius used where the source has none.
    pub default_radius: f64,
    normalized: bool,
}

impl BoundingFamily {
    pub fn new(source: FamilySource, default_radius: f64) -> Self {
        BoundingFamily {
            source,
            default_radius,
            normalized: false,
        }
    }

    pub fn sublevel(v: ScalarField, c: f64, domain: &Domain) -> Self {
        Self::new(FamilySource::FromSublevel { v, c }, 0.25 * domain.diameter())
    }

    /// Family of a domain tagged convex, using its outer normal field.
    pub fn halfspace(domain: &Domain) -> Result<Self> {
        if !domain.is_convex() {
            return Err(Error::InvalidArgument(format!("{} carries no convex normal field", domain.name)));
        }
        let d = domain.clone();
        let normal: NormalMap = Arc::new(move |u| d.convex_normal(u).map(Direction::into_point));
        Ok(Self::new(FamilySource::FromHalfspaces { normal }, domain.diameter()))
    }

    pub fn halfspace_with(normal: impl Fn(&BoundaryPoint) -> Option<Point> + Send + Sync + 'static, radius: f64) -> Self {
        Self::new(
            FamilySource::FromHalfspaces {
                normal: Arc::new(normal),
            },
            radius,
        )
    }

    /// The patch functions `h_i` of the domain itself.
    pub fn from_domain_patches(domain: &Domain, radius: f64) -> Self {
        let fns = domain
            .patches()
            .iter()
            .map(|p| {
                let q = p.clone();
                PatchFunction::new(p.id, p.h.clone(), radius, move |x| q.is_valid(x))
            })
            .collect();
        Self::new(FamilySource::ExplicitPatches(fns), radius)
    }

    /// Chosen normal `ν_u` per point, scaled by `λ`.
    pub fn bony(lambda: f64, normal: impl Fn(&BoundaryPoint) -> Option<Point> + Send + Sync + 'static) -> Self {
        Self::new(
            FamilySource::FromBonyNormals {
                lambda,
                normal: Arc::new(normal),
            },
            lambda,
        )
    }

    /// Bony family picking, at each point, the listed normal closest to the
    /// patch gradient.
    pub fn bony_auto(domain: &Domain, lambda: f64, n_candidates: usize) -> Self {
        let d = domain.clone();
        Self::bony(lambda, move |u| pick_bony_normal(&d, u, lambda, n_candidates).map(Direction::into_point))
    }

    pub fn custom(resolver: impl Fn(&BoundaryPoint) -> Option<BoundingFunction> + Send + Sync + 'static, radius: f64) -> Self {
        Self::new(FamilySource::Custom(Arc::new(resolver)), radius)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn resolve(&self, u: &BoundaryPoint) -> Result<BoundingFunction> {
        let raw = self.resolve_raw(u)?;
        if !self.normalized {
            return Ok(raw);
        }
        let g = raw.anchor_gradient().norm();
        if g < tol::GRAD {
            return Err(Error::DegenerateFamily {
                eta_minus: g,
                point: u.point.iter().copied().collect(),
            });
        }
        Ok(BoundingFunction {
            field: raw.field.scaled(1.0 / g),
            ..raw
        })
    }

    fn resolve_raw(&self, u: &BoundaryPoint) -> Result<BoundingFunction> {
        let unresolved = || Error::Unresolved(u.point.iter().copied().collect());
        let patch = Some(u.primary_patch());
        match &self.source {
            FamilySource::FromSublevel { v, c } => {
                let r = sublevel_radius(v, *c, &u.point, self.default_radius);
                Ok(BoundingFunction::new(u.point.clone(), r, patch, v.shifted(*c)))
            }
            FamilySource::FromHalfspaces { normal } => {
                let nu = normal(u).ok_or_else(unresolved)?;
                let nu = Direction::new(nu).map_err(|_| unresolved())?.into_point();
                let (a, b) = (u.point.clone(), nu.clone());
                let field = ScalarField::with_gradient(move |x: &Point| (x - &a).dot(&b), move |_: &Point| nu.clone());
                Ok(BoundingFunction::new(u.point.clone(), self.default_radius, patch, field))
            }
            FamilySource::FromBonyNormals { lambda, normal } => {
                let nu = normal(u).ok_or_else(unresolved)?;
                let nu = Direction::new(nu).map_err(|_| unresolved())?.into_point() * *lambda;
                Ok(from_bony(u, &nu))
            }
            FamilySource::ExplicitPatches(fns) => {
                let scale = 1e-7 * (1.0 + u.point.norm());
                fns.iter()
                    .filter(|p| (p.valid)(&u.point) && p.v.eval(&u.point).abs() <= scale)
                    .min_by_key(|p| p.id)
                    .map(|p| BoundingFunction::new(u.point.clone(), p.radius, Some(p.id), p.v.clone()))
                    .ok_or_else(unresolved)
            }
            FamilySource::Custom(r) => r(u).ok_or_else(unresolved),
        }
    }

    /// `W_u = V_u / |∇V_u(u)|`, after checking non-degeneracy on samples.
    pub fn normalized(&self, domain: &Domain, n: usize, seed: u64) -> Result<BoundingFamily> {
        let rep = nondegeneracy(self, domain, n, seed)?;
        if rep.verdict == Degeneracy::Degenerate {
            return Err(Error::DegenerateFamily {
                eta_minus: rep.eta_minus,
                point: rep.worst_point.point.iter().copied().collect(),
            });
        }
        Ok(BoundingFamily {
            normalized: true,
            ..self.clone()
        })
    }
}

/// Listed Bony normal at `u` closest to the patch gradient there.
pub fn pick_bony_normal(domain: &Domain, u: &BoundaryPoint, lambda: f64, n_candidates: usize) -> Option<Direction> {
    let normals = bony_normals(domain, u, n_candidates, lambda);
    let hint = u
        .outward_hint
        .clone()
        .map(Direction::into_point)
        .or_else(|| domain.patch(u.patch_id).map(|p| p.h.gradient(&u.point)))
        .unwrap_or_else(|| Point::zeros(domain.dim()));
    normals
        .into_iter()
        .max_by(|a, b| a.as_point().dot(&hint).total_cmp(&b.as_point().dot(&hint)))
}

/// Largest dyadic radius below `r_max` on which `|∇V| >= τ_grad` at every
/// sampled point of `{V <= c}`.
fn sublevel_radius(v: &ScalarField, c: f64, u: &Point, r_max: f64) -> f64 {
    let n = u.len();
    let samples: Vec<Vec<f64>> = (1..=32).map(|i| halton_point(i, n + 1)).collect();
    let mut r = r_max;
    for _ in 0..20 {
        let ok = samples.iter().all(|s| {
            let dir = sphere_map(&s[..n.saturating_sub(1).max(1)], n);
            let x = u + dir * (r * s[n]);
            v.eval(&x) > c || v.gradient(&x).norm() >= tol::GRAD
        });
        if ok {
            return r;
        }
        r *= 0.5;
    }
    r
}

/// Sample points of `G ∩ B(u, r)` on a Halton pattern.
pub(crate) fn interior_near(domain: &Domain, u: &Point, r: f64, n: usize) -> Vec<Point> {
    let dim = u.len();
    let mut out = Vec::with_capacity(n);
    let mut i = 1u64;
    while out.len() < n && i <= 20 * n as u64 + 20 {
        let s = halton_point(i, dim + 1);
        i += 1;
        let dir = sphere_map(&s[..dim.saturating_sub(1).max(1)], dim);
        // radius ~ s^(1/dim) gives uniform density in the ball
        let x = u + dir * (r * s[dim].powf(1.0 / dim as f64));
        if domain.membership(&x) == Membership::Interior {
            out.push(x);
        }
    }
    out
}

/// Checks `V_u(u) ≈ 0` and `V_u < 0` on interior samples of `B(u, r_u)`.
pub fn verify_bounding(
    family: &BoundingFamily,
    domain: &Domain,
    n_boundary: usize,
    n_interior_per_u: usize,
    seed: u64,
) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(n_boundary, seed)?;
    verify_bounding_at(family, domain, &pts, n_interior_per_u)
}

pub fn verify_bounding_at(
    family: &BoundingFamily,
    domain: &Domain,
    points: &[BoundaryPoint],
    n_interior_per_u: usize,
) -> Result<ConditionReport> {
    let per_point = par_map(points, |u| -> Result<Vec<MarginRecord>> {
        let v = family.resolve(u)?;
        let patch_id = u.primary_patch();
        let anchor = v.eval(&u.point).abs();
        let mut out = Vec::new();
        if anchor > tol::BOUNDARY {
            out.push(MarginRecord::new(&u.point, patch_id, 0.0, anchor));
        }
        for x in interior_near(domain, &u.point, v.radius, n_interior_per_u) {
            out.push(MarginRecord::new(&x, patch_id, 0.0, v.eval(&x)));
        }
        Ok(out)
    });
    let mut margins = Vec::new();
    for m in per_point {
        margins.extend(m?);
    }
    Ok(ConditionReport::build(ConditionKind::Bounding, points.len(), 1, margins))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    NonDegenerate,
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub worst_point: BoundaryPoint,
    pub verdict: Degeneracy,
}

/// Range of `|∇V_u(u)|` over boundary samples, corners included.
pub fn nondegeneracy(family: &BoundingFamily, domain: &Domain, n: usize, seed: u64) -> Result<NondegeneracyReport> {
    let pts = domain.sample_boundary(n, seed)?;
    let norms = par_map(&pts, |u| family.resolve_raw(u).map(|v| v.anchor_gradient().norm()));
    let mut eta_minus = f64::INFINITY;
    let mut eta_plus: f64 = 0.0;
    let mut worst = 0;
    for (i, g) in norms.into_iter().enumerate() {
        let g = g?;
        if g < eta_minus {
            eta_minus = g;
            worst = i;
        }
        eta_plus = eta_plus.max(g);
    }
    Ok(NondegeneracyReport {
        eta_minus,
        eta_plus,
        worst_point: pts[worst].clone(),
        verdict: if eta_minus < tol::GRAD {
            Degeneracy::Degenerate
        } else {
            Degeneracy::NonDegenerate
        },
    })
}

/// Worst relative disagreement between analytic and central-difference
/// anchor gradients over boundary samples.
pub fn gradient_fidelity(family: &BoundingFamily, domain: &Domain, n: usize, seed: u64) -> Result<f64> {
    let pts = domain.sample_boundary(n, seed)?;
    let errs = par_map(&pts, |u| family.resolve(u).map(|v| v.field().gradient_check(&u.point)));
    errs.into_iter().try_fold(0.0f64, |acc, e| Ok(acc.max(e?)))
}
