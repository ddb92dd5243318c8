use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::halton_point;
use crate::types::{tol, BoundingBox, Direction, Membership, Point, ScalarField};

pub type LevelFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&Point) -> bool + Send + Sync>;
pub type PatchMap = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;
/// Outer normal field of a convex body, evaluated at boundary points.
pub type NormalFn = Arc<dyn Fn(&BoundaryPoint) -> Option<Point> + Send + Sync>;

/// How points on a patch are generated.
#[derive(Clone)]
pub enum PatchShape {
    /// Image of `[0,1]^dim` (dim 0 is a single point).
    Param { dim: usize, map: PatchMap },
    /// Newton projection of random box points onto `h = 0`.
    Projected,
}

/// One smooth piece `{h = 0}` of the boundary, restricted by a validity predicate.
#[derive(Clone)]
pub struct BoundaryPatch {
    pub id: usize,
    pub label: String,
    pub h: ScalarField,
    valid: Predicate,
    shape: PatchShape,
}

impl fmt::Debug for BoundaryPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryPatch")
            .field("id", &self.id)
            .field("label", &self.label)
            .finish()
    }
}

impl BoundaryPatch {
    pub fn new(
        id: usize,
        label: impl Into<String>,
        h: ScalarField,
        valid: impl Fn(&Point) -> bool + Send + Sync + 'static,
        shape: PatchShape,
    ) -> Self {
        BoundaryPatch {
            id,
            label: label.into(),
            h,
            valid: Arc::new(valid),
            shape,
        }
    }

    pub fn is_valid(&self, x: &Point) -> bool {
        (self.valid)(x)
    }

    pub fn shape(&self) -> &PatchShape {
        &self.shape
    }
}

/// Optional structural facts about a domain.
#[derive(Clone)]
pub enum Structure {
    Convex {
        inscribed_radius: f64,
        normal: Option<NormalFn>,
    },
    StarShaped {
        center: Point,
    },
    Sublevel {
        v: ScalarField,
        level: f64,
    },
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Convex { inscribed_radius, .. } => {
                write!(f, "Convex(r = {inscribed_radius})")
            }
            Structure::StarShaped { center } => write!(f, "StarShaped({:?})", center.as_slice()),
            Structure::Sublevel { level, .. } => write!(f, "Sublevel(c = {level})"),
        }
    }
}

/// A sampled point of the boundary together with the patch it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub patch_id: usize,
    /// Second patch when the point is a corner.
    pub other_patch: Option<usize>,
    pub outward_hint: Option<Direction>,
}

impl BoundaryPoint {
    pub fn is_corner(&self) -> bool {
        self.other_patch.is_some()
    }

    /// Lowest patch id the point belongs to.
    pub fn primary_patch(&self) -> usize {
        match self.other_patch {
            Some(o) => o.min(self.patch_id),
            None => self.patch_id,
        }
    }
}

/// Compact region given by an implicit classifier `level` (negative inside),
/// boundary patches and a bounding box.
#[derive(Clone)]
pub struct Domain {
    pub name: String,
    dim: usize,
    level: LevelFn,
    patches: Vec<BoundaryPatch>,
    bbox: BoundingBox,
    structure: Vec<Structure>,
    eps_bd: f64,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("patches", &self.patches)
            .field("bbox", &self.bbox)
            .field("structure", &self.structure)
            .finish()
    }
}

const PATCH_TOL: f64 = 1e-7;
const CORNER_TOL: f64 = 1e-9;

impl Domain {
    pub fn new(
        name: impl Into<String>,
        bbox: BoundingBox,
        level: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        patches: Vec<BoundaryPatch>,
    ) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::NoPatches);
        }
        Ok(Domain {
            name: name.into(),
            dim: bbox.dim(),
            level: Arc::new(level),
            patches,
            bbox,
            structure: Vec::new(),
            eps_bd: tol::BOUNDARY,
        })
    }

    pub fn with_structure(mut self, s: Structure) -> Self {
        self.structure.push(s);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn diameter(&self) -> f64 {
        self.bbox.diameter()
    }

    pub fn patches(&self) -> &[BoundaryPatch] {
        &self.patches
    }

    pub fn patch(&self, id: usize) -> Option<&BoundaryPatch> {
        self.patches.iter().find(|p| p.id == id)
    }

    pub fn structure(&self) -> &[Structure] {
        &self.structure
    }

    pub fn eps_bd(&self) -> f64 {
        self.eps_bd
    }

    /// Signed classifier value; negative inside.
    pub fn level(&self, x: &Point) -> f64 {
        (self.level)(x)
    }

    pub fn membership(&self, x: &Point) -> Membership {
        Membership::classify(self.level(x), self.eps_bd)
    }

    pub fn star_center(&self) -> Option<&Point> {
        self.structure.iter().find_map(|s| match s {
            Structure::StarShaped { center } => Some(center),
            _ => None,
        })
    }

    pub fn is_convex(&self) -> bool {
        self.structure.iter().any(|s| matches!(s, Structure::Convex { .. }))
    }

    pub fn convex_normal(&self, u: &BoundaryPoint) -> Option<Direction> {
        self.structure.iter().find_map(|s| match s {
            Structure::Convex { normal: Some(n), .. } => n(u).and_then(|v| Direction::new(v).ok()),
            _ => None,
        })
    }

    pub fn inscribed_radius(&self) -> Option<f64> {
        self.structure.iter().find_map(|s| match s {
            Structure::Convex { inscribed_radius, .. } => Some(*inscribed_radius),
            _ => None,
        })
    }

    /// Whether some point classifies as interior; convex bodies tagged with
    /// zero inscribed radius answer `false` directly.
    pub fn has_interior(&self) -> bool {
        if let Some(r) = self.inscribed_radius() {
            if r <= 0.0 {
                return false;
            }
        }
        if let Some(c) = self.star_center() {
            if self.membership(c) == Membership::Interior {
                return true;
            }
        }
        self.interior_lattice(4096).into_iter().next().is_some()
    }

    /// Patches containing `x` (within a small band), ordered by id.
    pub fn locate_patches(&self, x: &Point) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .patches
            .iter()
            .filter(|p| p.h.eval(x).abs() <= PATCH_TOL * (1.0 + x.norm()) && p.is_valid(x))
            .map(|p| p.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Wraps an arbitrary closure point as a [`BoundaryPoint`].
    pub fn boundary_point(&self, x: &Point) -> Option<BoundaryPoint> {
        if self.membership(x) != Membership::Boundary {
            return None;
        }
        let ids = self.locate_patches(x);
        let (&first, rest) = ids.split_first()?;
        Some(BoundaryPoint {
            point: x.clone(),
            patch_id: first,
            other_patch: rest.first().copied(),
            outward_hint: self.hint(first, x),
        })
    }

    fn hint(&self, patch_id: usize, x: &Point) -> Option<Direction> {
        let g = self.patch(patch_id)?.h.gradient(x);
        if g.iter().all(|v| v.is_finite()) {
            Direction::new(g).ok()
        } else {
            None
        }
    }

    /// Uniform rejection samples of the interior.
    pub fn sample_interior(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a7e);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n && attempts < 1000 * n.max(1) {
            attempts += 1;
            let s: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>()).collect();
            let x = self.bbox.from_unit(&s);
            if self.membership(&x) == Membership::Interior {
                out.push(x);
            }
        }
        out
    }

    /// Interior nodes of a regular lattice with an odd number of nodes per
    /// axis, so a symmetric box always contains its center.
    pub fn interior_lattice(&self, n: usize) -> Vec<Point> {
        let mut k = (n.max(1) as f64).powf(1.0 / self.dim as f64).ceil() as usize;
        if k.is_multiple_of(2) {
            k += 1;
        }
        let total = k.pow(self.dim as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let s: Vec<f64> = (0..self.dim)
                .map(|_| {
                    let i = rem % k;
                    rem /= k;
                    (i + 1) as f64 / (k + 1) as f64
                })
                .collect();
            let x = self.bbox.from_unit(&s);
            if self.membership(&x) == Membership::Interior {
                out.push(x);
            }
        }
        out
    }

    /// Deterministic boundary sample of at least `n` points spread over the
    /// patches in proportion to their estimated measure. Corners (points
    /// shared by two patches) are always appended, once per pair.
    pub fn sample_boundary(&self, n: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
        if n == 0 {
            return Err(Error::InvalidArgument("boundary sample size must be positive".into()));
        }
        let measures: Vec<Option<f64>> = self.patches.iter().map(|p| self.patch_measure(p)).collect();
        let total: f64 = measures.iter().flatten().sum();
        let n_projected = measures.iter().filter(|m| m.is_none()).count();
        let mut out = Vec::with_capacity(n + 8);
        for (patch, measure) in self.patches.iter().zip(&measures) {
            let count = match measure {
                Some(m) if total > 0.0 => ((n as f64) * m / total).ceil().max(1.0) as usize,
                Some(_) => 1,
                None => n.div_ceil(n_projected.max(1)).max(1),
            };
            let pts = self.sample_patch(patch, count, seed)?;
            if pts.is_empty() {
                return Err(Error::PatchEmpty(patch.id));
            }
            out.extend(pts);
        }
        out.extend(self.corners());
        Ok(out)
    }

    fn patch_measure(&self, patch: &BoundaryPatch) -> Option<f64> {
        match &patch.shape {
            PatchShape::Projected => None,
            PatchShape::Param { dim: 0, .. } => Some(0.0),
            PatchShape::Param { dim: 1, map } => {
                let m = 256;
                let mut prev = map(&[0.0]);
                let mut len = 0.0;
                for i in 1..=m {
                    let x = map(&[i as f64 / m as f64]);
                    len += (&x - &prev).norm();
                    prev = x;
                }
                Some(len)
            }
            PatchShape::Param { dim, map } => {
                // sqrt(det(J^T J)) summed over a coarse parameter grid
                let k = *dim;
                let per_axis = ((4096f64).powf(1.0 / k as f64).floor() as usize).max(2);
                let cell = 1.0 / per_axis as f64;
                let h = cell * 1e-3;
                let mut area = 0.0;
                for idx in 0..per_axis.pow(k as u32) {
                    let mut rem = idx;
                    let s: Vec<f64> = (0..k)
                        .map(|_| {
                            let i = rem % per_axis;
                            rem /= per_axis;
                            (i as f64 + 0.5) * cell
                        })
                        .collect();
                    let cols: Vec<Point> = (0..k)
                        .map(|j| {
                            let mut sp = s.clone();
                            let mut sm = s.clone();
                            sp[j] += h;
                            sm[j] -= h;
                            (map(&sp) - map(&sm)) / (2.0 * h)
                        })
                        .collect();
                    let gram = nalgebra::DMatrix::from_fn(k, k, |a, b| cols[a].dot(&cols[b]));
                    area += gram.determinant().max(0.0).sqrt() * cell.powi(k as i32);
                }
                Some(area)
            }
        }
    }

    fn accept(&self, patch: &BoundaryPatch, x: Point) -> Option<BoundaryPoint> {
        let x = if self.on_patch(patch, &x) { x } else { self.project(patch, x, 8)? };
        if !self.on_patch(patch, &x) {
            return None;
        }
        Some(BoundaryPoint {
            outward_hint: self.hint(patch.id, &x),
            point: x,
            patch_id: patch.id,
            other_patch: None,
        })
    }

    fn on_patch(&self, patch: &BoundaryPatch, x: &Point) -> bool {
        x.iter().all(|v| v.is_finite()) && patch.is_valid(x) && self.membership(x) == Membership::Boundary
    }

    fn project(&self, patch: &BoundaryPatch, mut x: Point, iters: usize) -> Option<Point> {
        for _ in 0..iters {
            let h = patch.h.eval(&x);
            if h.abs() <= 1e-13 * (1.0 + x.norm()) {
                break;
            }
            let g = patch.h.gradient(&x);
            let g2 = g.norm_squared();
            if !(g2 > 0.0) || !g2.is_finite() {
                return None;
            }
            x -= g * (h / g2);
        }
        Some(x)
    }

    fn sample_patch(&self, patch: &BoundaryPatch, count: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ patch.id as u64);
        let mut out = Vec::with_capacity(count);
        match &patch.shape {
            PatchShape::Param { dim: 0, map } => {
                out.extend(self.accept(patch, map(&[])));
            }
            PatchShape::Param { dim: 1, map } => {
                let offset: f64 = rng.gen();
                for j in 0..count {
                    let s = (j as f64 + offset) / count as f64;
                    out.extend(self.accept(patch, map(&[s])));
                }
            }
            PatchShape::Param { dim, map } => {
                let shift: Vec<f64> = (0..*dim).map(|_| rng.gen()).collect();
                for j in 0..count {
                    let s: Vec<f64> = halton_point(j as u64, *dim)
                        .iter()
                        .zip(&shift)
                        .map(|(a, b)| (a + b).fract())
                        .collect();
                    out.extend(self.accept(patch, map(&s)));
                }
            }
            PatchShape::Projected => {
                let mut attempts = 0;
                while out.len() < count && attempts < 50 * count {
                    attempts += 1;
                    let s: Vec<f64> = (0..self.dim).map(|_| rng.gen()).collect();
                    if let Some(x) = self.project(patch, self.bbox.from_unit(&s), 60) {
                        out.extend(self.accept(patch, x));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Points shared by two patches, found among the images of the parameter
    /// cube vertices.
    pub fn corners(&self) -> Vec<BoundaryPoint> {
        let mut found: Vec<BoundaryPoint> = Vec::new();
        for patch in &self.patches {
            let PatchShape::Param { dim, map } = &patch.shape else { continue };
            if *dim == 0 {
                continue;
            }
            for v in 0..(1usize << dim) {
                let s: Vec<f64> = (0..*dim).map(|j| ((v >> j) & 1) as f64).collect();
                let x = map(&s);
                if self.membership(&x) != Membership::Boundary {
                    continue;
                }
                for other in &self.patches {
                    if other.id == patch.id
                        || other.h.eval(&x).abs() > CORNER_TOL * (1.0 + x.norm())
                        || !other.is_valid(&x)
                    {
                        continue;
                    }
                    let (a, b) = (patch.id.min(other.id), patch.id.max(other.id));
                    let dup = found.iter().any(|c| {
                        c.patch_id == a && c.other_patch == Some(b) && (&c.point - &x).norm() <= 1e-9
                    });
                    if !dup {
                        found.push(BoundaryPoint {
                            point: x.clone(),
                            patch_id: a,
                            other_patch: Some(b),
                            outward_hint: self.hint(a, &x),
                        });
                    }
                }
            }
        }
        found.sort_by_key(|p| (p.patch_id, p.other_patch));
        found
    }
}
