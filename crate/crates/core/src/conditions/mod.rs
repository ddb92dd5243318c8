//! Sampled boundary conditions and their verdicts.

mod applicability;

pub use applicability::{
    theorem_applicability, ChosenNormals, HypothesisCheck, HypothesisStatus, InwardField, Problem, Theorem, TheoremVerdict,
};

use std::fmt;

use serde::Serialize;

use crate::bounding::{interior_near, BoundingFamily};
use crate::error::{Error, Result};
use crate::flow::VectorField;
use crate::geometry::{default_lambda, is_bony_normal, outer_normals, BoundaryPoint, Domain};
use crate::lattice::par_map;
use crate::types::{tol, Direction, Point};

/// Boundary samples, time samples and the sampling seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Grid {
    pub n_boundary: usize,
    pub n_times: usize,
    pub seed: u64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_boundary: 400,
            n_times: 11,
            seed: 0,
        }
    }
}

impl Grid {
    pub fn new(n_boundary: usize, n_times: usize, seed: u64) -> Self {
        Grid {
            n_boundary,
            n_times,
            seed,
        }
    }

    pub fn doubled(self) -> Self {
        Grid {
            n_boundary: 2 * self.n_boundary,
            n_times: 2 * self.n_times.max(1) - 1,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionKind {
    /// `<f, ν> <= 0` for every sampled outer normal of a convex set.
    ConvexAllNormals,
    /// `<f, ν> <= 0` for one supplied normal field.
    ConvexSomeNormal,
    /// `<f(t,u), ∇V_u(u)> <= 0` on the boundary.
    BoundWeak,
    /// `<f(t,u), ∇V_u(u)> < 0` on the boundary.
    BoundStrict,
    /// `<f(t,x), ∇V_u(x)> <= 0` on the domain near each `u`.
    BoundLocal,
    /// `sup <g(u), ∇V_u(u)> < 0`.
    Inwardness,
    BonyAll,
    BonySome,
    /// `V_u(u) = 0` and `V_u < 0` near `u` inside the domain.
    Bounding,
}

impl ConditionKind {
    pub fn is_strict(self) -> bool {
        matches!(self, ConditionKind::BoundStrict | ConditionKind::Inwardness)
    }

    pub fn label(self) -> &'static str {
        match self {
            ConditionKind::ConvexAllNormals => "convex-all-normals",
            ConditionKind::ConvexSomeNormal => "convex-some-normal",
            ConditionKind::BoundWeak => "bound-weak",
            ConditionKind::BoundStrict => "bound-strict",
            ConditionKind::BoundLocal => "bound-local",
            ConditionKind::Inwardness => "inwardness",
            ConditionKind::BonyAll => "bony-all",
            ConditionKind::BonySome => "bony-some",
            ConditionKind::Bounding => "bounding",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL_KINDS.iter().copied().find(|k| k.label() == s)
    }
}

pub const ALL_KINDS: [ConditionKind; 9] = [
    ConditionKind::ConvexAllNormals,
    ConditionKind::ConvexSomeNormal,
    ConditionKind::BoundWeak,
    ConditionKind::BoundStrict,
    ConditionKind::BoundLocal,
    ConditionKind::Inwardness,
    ConditionKind::BonyAll,
    ConditionKind::BonySome,
    ConditionKind::Bounding,
];

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One evaluated margin; positive means the inequality fails.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginRecord {
    pub point: Point,
    pub patch_id: usize,
    pub t: f64,
    pub margin: f64,
}

impl MarginRecord {
    pub fn new(point: &Point, patch_id: usize, t: f64, margin: f64) -> Self {
        MarginRecord {
            point: point.clone(),
            patch_id,
            t,
            margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    Certified { tolerance: f64 },
    Indeterminate { reason: String },
    Violated,
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified { .. })
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Certified { tolerance } => write!(f, "Certified (tol {tolerance:e})"),
            Verdict::Indeterminate { reason } => write!(f, "Indeterminate ({reason})"),
            Verdict::Violated => write!(f, "Violated"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub n_samples: usize,
    pub n_times: usize,
    pub worst_margin: f64,
    pub worst: Option<MarginRecord>,
    /// Every evaluated margin, in sample order.
    pub margins: Vec<MarginRecord>,
    pub violations: Vec<MarginRecord>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Applies the verdict rule. Weak kinds fail above `τ_cond`; strict kinds
    /// fail above `-τ_cond` and certify only below `-τ_strict`.
    pub fn build(kind: ConditionKind, n_samples: usize, n_times: usize, mut margins: Vec<MarginRecord>) -> Self {
        // stable: keeps sample and time order inside a patch
        margins.sort_by_key(|m| m.patch_id);
        let worst = margins.iter().max_by(|a, b| a.margin.total_cmp(&b.margin)).cloned();
        let worst_margin = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.margin);
        let fail_above = if kind.is_strict() { -tol::COND } else { tol::COND };
        let violations: Vec<MarginRecord> = margins.iter().filter(|m| m.margin > fail_above).cloned().collect();
        let verdict = if margins.is_empty() {
            Verdict::Indeterminate {
                reason: "no constraints were sampled".into(),
            }
        } else if !violations.is_empty() {
            Verdict::Violated
        } else if kind.is_strict() {
            if worst_margin <= -tol::STRICT {
                Verdict::Certified { tolerance: tol::STRICT }
            } else {
                Verdict::Indeterminate {
                    reason: format!("worst margin {worst_margin:e} inside the strictness band"),
                }
            }
        } else {
            Verdict::Certified { tolerance: tol::COND }
        };
        ConditionReport {
            kind,
            n_samples,
            n_times,
            worst_margin,
            worst,
            margins,
            violations,
            verdict,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Margins on samples of one patch.
    pub fn margins_on(&self, patch_id: usize) -> impl Iterator<Item = &MarginRecord> {
        self.margins.iter().filter(move |m| m.patch_id == patch_id)
    }

    /// Rows `patch_id, t, x_1..x_N, margin`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.margins.first().map_or(0, |m| m.point.len());
        let mut header = String::from("patch_id,t");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header},margin")?;
        for m in &self.margins {
            let mut line = format!("{},{:.12e}", m.patch_id, m.t);
            for v in m.point.iter() {
                line.push_str(&format!(",{v:.12e}"));
            }
            writeln!(w, "{line},{:.12e}", m.margin)?;
        }
        Ok(())
    }
}

fn collect(kind: ConditionKind, n_samples: usize, n_times: usize, per_point: Vec<Result<Vec<MarginRecord>>>) -> Result<ConditionReport> {
    let mut margins = Vec::new();
    for m in per_point {
        margins.extend(m?);
    }
    Ok(ConditionReport::build(kind, n_samples, n_times, margins))
}

fn bound_margins(
    kind: ConditionKind,
    family: &BoundingFamily,
    field: &VectorField,
    points: &[BoundaryPoint],
    times: &[f64],
) -> Result<ConditionReport> {
    let per_point = par_map(points, |u| -> Result<Vec<MarginRecord>> {
        let grad = family.resolve(u)?.anchor_gradient();
        Ok(times
            .iter()
            .map(|&t| MarginRecord::new(&u.point, u.primary_patch(), t, field.eval(t, &u.point).dot(&grad)))
            .collect())
    });
    collect(kind, points.len(), times.len(), per_point)
}

/// `<f(t,u), ∇V_u(u)> <= 0` over boundary samples and the time grid.
pub fn check_weak(family: &BoundingFamily, field: &VectorField, domain: &Domain, grid: Grid) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    check_weak_at(family, field, &pts, &field.time_grid(grid.n_times))
}

pub fn check_weak_at(family: &BoundingFamily, field: &VectorField, points: &[BoundaryPoint], times: &[f64]) -> Result<ConditionReport> {
    bound_margins(ConditionKind::BoundWeak, family, field, points, times)
}

/// Strict version of [`check_weak`].
pub fn check_strict(family: &BoundingFamily, field: &VectorField, domain: &Domain, grid: Grid) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    check_strict_at(family, field, &pts, &field.time_grid(grid.n_times))
}

pub fn check_strict_at(family: &BoundingFamily, field: &VectorField, points: &[BoundaryPoint], times: &[f64]) -> Result<ConditionReport> {
    bound_margins(ConditionKind::BoundStrict, family, field, points, times)
}

/// `<f(t,x), ∇V_u(x)> <= 0` on interior samples of `B(u, ρ r_u)`.
pub fn check_local(
    family: &BoundingFamily,
    field: &VectorField,
    domain: &Domain,
    rho_fraction: f64,
    n_interior_per_u: usize,
    grid: Grid,
) -> Result<ConditionReport> {
    if !(rho_fraction > 0.0 && rho_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho fraction {rho_fraction} outside (0, 1]")));
    }
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    let times = field.time_grid(grid.n_times);
    let per_point = par_map(&pts, |u| -> Result<(Vec<MarginRecord>, bool)> {
        let v = family.resolve(u)?;
        let degenerate = v.anchor_gradient().norm() < tol::GRAD;
        let mut out = Vec::new();
        for x in interior_near(domain, &u.point, rho_fraction * v.radius, n_interior_per_u) {
            let g = v.gradient(&x);
            for &t in &times {
                out.push(MarginRecord::new(&x, u.primary_patch(), t, field.eval(t, &x).dot(&g)));
            }
        }
        Ok((out, degenerate))
    });
    let mut margins = Vec::new();
    let mut degenerate = Vec::new();
    for (r, u) in per_point.into_iter().zip(&pts) {
        let (m, d) = r?;
        margins.extend(m);
        if d {
            degenerate.push(u.point.clone());
        }
    }
    let mut rep = ConditionReport::build(ConditionKind::BoundLocal, pts.len(), times.len(), margins);
    for p in degenerate {
        rep = rep.note(format!("degenerate anchor gradient at {:?}", p.as_slice()));
    }
    Ok(rep)
}

/// `sup <g(u), ∇V_u(u)> < 0`.
pub fn check_inwardness(
    family: &BoundingFamily,
    g: &(dyn Fn(&Point) -> Point + Sync),
    domain: &Domain,
    grid: Grid,
) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    check_inwardness_at(family, g, &pts)
}

pub fn check_inwardness_at(
    family: &BoundingFamily,
    g: &(dyn Fn(&Point) -> Point + Sync),
    points: &[BoundaryPoint],
) -> Result<ConditionReport> {
    let per_point = par_map(points, |u| -> Result<Vec<MarginRecord>> {
        let grad = family.resolve(u)?.anchor_gradient();
        Ok(vec![MarginRecord::new(&u.point, u.primary_patch(), 0.0, g(&u.point).dot(&grad))])
    });
    collect(ConditionKind::Inwardness, points.len(), 1, per_point)
}

/// `<f(t,u), ν(u)> <= 0` for a supplied outer normal field.
pub fn check_convex_some(
    domain: &Domain,
    field: &VectorField,
    normal: &(dyn Fn(&BoundaryPoint) -> Option<Point> + Sync),
    grid: Grid,
) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    let times = field.time_grid(grid.n_times);
    let per_point = par_map(&pts, |u| -> Result<Vec<MarginRecord>> {
        let nu = normal(u)
            .and_then(|n| Direction::new(n).ok())
            .ok_or_else(|| Error::Unresolved(u.point.iter().copied().collect()))?;
        Ok(times
            .iter()
            .map(|&t| MarginRecord::new(&u.point, u.primary_patch(), t, field.eval(t, &u.point).dot(nu.as_point())))
            .collect())
    });
    let rep = collect(ConditionKind::ConvexSomeNormal, pts.len(), times.len(), per_point)?;
    Ok(if domain.has_interior() {
        rep
    } else {
        rep.note("empty interior: the condition carries no existence conclusion")
    })
}

/// Convex condition over every sampled normal of the normal cone. Bodies
/// with empty interior are reported Indeterminate unless violated.
pub fn check_convex_all(domain: &Domain, field: &VectorField, grid: Grid, n_normals: usize) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    let times = field.time_grid(grid.n_times);
    let mut rep = all_normals(ConditionKind::ConvexAllNormals, domain, field, &pts, &times, n_normals, default_lambda(domain));
    if !domain.has_interior() && !rep.verdict.is_violated() {
        rep.verdict = Verdict::Indeterminate {
            reason: "empty interior: outer normal fields cannot be enumerated".into(),
        };
    }
    Ok(rep)
}

fn all_normals(
    kind: ConditionKind,
    domain: &Domain,
    field: &VectorField,
    points: &[BoundaryPoint],
    times: &[f64],
    n_normals: usize,
    lambda: f64,
) -> ConditionReport {
    let per_point = par_map(points, |u| {
        let normals = outer_normals(domain, u, n_normals, lambda);
        let mut out = Vec::new();
        for &t in times {
            let f = field.eval(t, &u.point);
            for nu in &normals {
                out.push(MarginRecord::new(&u.point, u.primary_patch(), t, f.dot(nu.as_point())));
            }
        }
        (out, normals.is_empty())
    });
    let mut margins = Vec::new();
    let mut empty = Vec::new();
    for ((m, e), u) in per_point.into_iter().zip(points) {
        margins.extend(m);
        if e {
            empty.push(u.point.clone());
        }
    }
    let mut rep = ConditionReport::build(kind, points.len(), times.len(), margins);
    for p in empty {
        rep = rep.note(format!("no outer normal at {:?}: no constraint", p.as_slice()));
    }
    rep
}

/// `<f(t,u), ν> <= 0` for every Bony normal found at each sample.
pub fn check_bony_all(domain: &Domain, field: &VectorField, grid: Grid, n_normals: usize) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    let mut rep = check_bony_all_at(domain, field, &pts, &field.time_grid(grid.n_times), n_normals, default_lambda(domain));
    // The whole body is boundary; patch samples miss endpoints and reversed normals.
    if !domain.has_interior() && !rep.verdict.is_violated() {
        rep.verdict = Verdict::Indeterminate {
            reason: "empty interior: patch samples do not cover every proximal normal".into(),
        };
    }
    Ok(rep)
}

pub fn check_bony_all_at(
    domain: &Domain,
    field: &VectorField,
    points: &[BoundaryPoint],
    times: &[f64],
    n_normals: usize,
    lambda: f64,
) -> ConditionReport {
    all_normals(ConditionKind::BonyAll, domain, field, points, times, n_normals, lambda)
}

/// `<f(t,u), ν_u> <= 0` for one chosen Bony normal per sample. Every chosen
/// normal is re-verified at the resolution of `n_verify` directions.
pub fn check_bony_some(
    domain: &Domain,
    field: &VectorField,
    chosen: &(dyn Fn(&BoundaryPoint) -> Option<Direction> + Sync),
    grid: Grid,
    n_verify: usize,
) -> Result<ConditionReport> {
    let pts = domain.sample_boundary(grid.n_boundary, grid.seed)?;
    check_bony_some_at(domain, field, chosen, &pts, &field.time_grid(grid.n_times), n_verify, default_lambda(domain))
}

#[allow(clippy::too_many_arguments)]
pub fn check_bony_some_at(
    domain: &Domain,
    field: &VectorField,
    chosen: &(dyn Fn(&BoundaryPoint) -> Option<Direction> + Sync),
    points: &[BoundaryPoint],
    times: &[f64],
    n_verify: usize,
    lambda: f64,
) -> Result<ConditionReport> {
    let per_point = par_map(points, |u| -> Result<Vec<MarginRecord>> {
        let not_normal = || Error::NotAnOuterNormal {
            point: u.point.iter().copied().collect(),
        };
        let nu = chosen(u).ok_or_else(not_normal)?;
        if !is_bony_normal(domain, &u.point, &nu, lambda, n_verify) {
            return Err(not_normal());
        }
        Ok(times
            .iter()
            .map(|&t| MarginRecord::new(&u.point, u.primary_patch(), t, field.eval(t, &u.point).dot(nu.as_point())))
            .collect())
    });
    collect(ConditionKind::BonySome, points.len(), times.len(), per_point)
}
