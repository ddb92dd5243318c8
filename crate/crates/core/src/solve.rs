//! Equilibria and `T`-periodic solutions by perturbation and continuation.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bounding::BoundingFamily;
use crate::conditions::{check_inwardness, Grid, Theorem, TheoremVerdict};
use crate::error::{Error, Result};
use crate::flow::{integrate, IntegratorConfig, Trajectory, VectorField};
use crate::geometry::{strict_star_check, Domain, StarBody, StarVerdict};
use crate::lattice::par_map;
use crate::types::{Membership, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Converged,
    MaxIterations,
}

/// One step of a perturbation or continuation schedule.
#[derive(Clone, Debug)]
pub struct Stage {
    /// `n` for `f + g/n`, or `1/ε` for continuation; infinite for the
    /// unperturbed problem.
    pub n: f64,
    pub z: Point,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub z: Point,
    /// `|f(z)|` for the unperturbed field.
    pub residual: f64,
    pub tol_eq: f64,
    pub trace: Vec<Stage>,
    pub status: Status,
    pub notes: Vec<String>,
}

/// Largest `|f|` over interior and boundary samples.
pub fn max_field_norm(field: &VectorField, domain: &Domain, n: usize, seed: u64) -> f64 {
    let mut pts = domain.interior_lattice(n);
    if let Ok(b) = domain.sample_boundary(n, seed) {
        pts.extend(b.into_iter().map(|u| u.point));
    }
    let times = field.time_grid(11);
    pts.iter()
        .flat_map(|x| times.iter().map(move |&t| field.eval(t, x).norm()))
        .fold(0.0, f64::max)
}

pub fn default_tol_eq(field: &VectorField, domain: &Domain) -> f64 {
    1e-8 * (1.0 + max_field_norm(field, domain, 400, 0))
}

fn jacobian(f: &dyn Fn(&Point) -> Point, z: &Point) -> DMatrix<f64> {
    let n = z.len();
    let h = 1e-7 * (1.0 + z.norm());
    let mut j = DMatrix::zeros(n, n);
    let mut y = z.clone();
    for k in 0..n {
        y[k] = z[k] + h;
        let fp = f(&y);
        y[k] = z[k] - h;
        let fm = f(&y);
        y[k] = z[k];
        j.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// Zero of `F` in the closure: damped Newton steps kept in the closure, with
/// flow-following along `x' = F(x)` when Newton stalls.
fn solve_zero(f: &dyn Fn(&Point) -> Point, z0: &Point, domain: &Domain, tol: f64) -> Point {
    let mut z = z0.clone();
    let mut r = f(&z).norm();
    let mut stalls = 0;
    for _ in 0..200 {
        if r <= tol {
            break;
        }
        let step = jacobian(f, &z).lu().solve(&(-f(&z)));
        let mut improved = false;
        if let Some(dz) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
            let mut a = 1.0;
            for _ in 0..30 {
                let cand = &z + &dz * a;
                if domain.membership(&cand).in_closure() {
                    let rc = f(&cand).norm();
                    if rc < r {
                        z = cand;
                        r = rc;
                        improved = true;
                        break;
                    }
                }
                a *= 0.5;
            }
        }
        if !improved {
            stalls += 1;
            if stalls > 5 {
                break;
            }
            let (zf, rf) = flow_follow(f, &z, domain);
            if rf < r {
                z = zf;
                r = rf;
            } else {
                break;
            }
        }
    }
    z
}

/// Integrates `x' = F(x)` and keeps the in-closure state of least `|F|`.
fn flow_follow(f: &dyn Fn(&Point) -> Point, z: &Point, domain: &Domain) -> (Point, f64) {
    let h = 1e-2;
    let mut x = z.clone();
    let mut best = (x.clone(), f(&x).norm());
    for _ in 0..2000 {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !x.iter().all(|v| v.is_finite()) || !domain.membership(&x).in_closure() {
            break;
        }
        let r = f(&x).norm();
        if r < best.1 {
            best = (x.clone(), r);
        }
    }
    best
}

/// Zeros of `f + g/n` for `n = 1, 2, 4, ..., n_max`, then of `f` itself,
/// each warm-started from the previous stage.
pub fn find_equilibrium_perturbed(
    field: &VectorField,
    domain: &Domain,
    family: &BoundingFamily,
    g: &(dyn Fn(&Point) -> Point + Sync),
    n_max: usize,
    tol_eq: Option<f64>,
    grid: Grid,
) -> Result<EquilibriumResult> {
    let cert = check_inwardness(family, g, domain, grid)?;
    if !cert.verdict.is_certified() {
        return Err(Error::NoInwardCertificate(cert.worst_margin));
    }
    let tol_eq = tol_eq.unwrap_or_else(|| default_tol_eq(field, domain));
    let f = |x: &Point| field.eval(0.0, x);

    let starts = domain.interior_lattice(256);
    let f1 = |x: &Point| f(x) + g(x);
    let mut z = starts
        .iter()
        .filter(|x| domain.membership(x) == Membership::Interior)
        .min_by(|a, b| f1(a).norm().total_cmp(&f1(b).norm()))
        .cloned()
        .or_else(|| domain.star_center().cloned())
        .unwrap_or_else(|| domain.bbox().center());

    let mut trace = Vec::new();
    let mut n = 1usize;
    while n <= n_max.max(1) {
        let k = n as f64;
        let fn_ = |x: &Point| f(x) + g(x) / k;
        z = solve_zero(&fn_, &z, domain, 0.1 * tol_eq);
        trace.push(Stage {
            n: k,
            z: z.clone(),
            residual: fn_(&z).norm(),
        });
        n *= 2;
    }
    z = solve_zero(&f, &z, domain, 0.1 * tol_eq);
    let residual = f(&z).norm();
    trace.push(Stage {
        n: f64::INFINITY,
        z: z.clone(),
        residual,
    });
    let ok = residual <= tol_eq && domain.membership(&z).in_closure();
    Ok(EquilibriumResult {
        z,
        residual,
        tol_eq,
        trace,
        status: if ok { Status::Converged } else { Status::MaxIterations },
        notes: vec!["field evaluated directly; no Lipschitz smoothing of f".into()],
    })
}

/// Grid local minima of `|f|` inside the closure.
#[derive(Clone, Debug)]
pub struct OracleScan {
    pub zeros: Vec<(Point, f64)>,
    /// Smallest `|f|` over scanned closure points.
    pub min_norm: f64,
    pub scanned: usize,
    /// Largest cell edge.
    pub cell: f64,
    pub threshold: f64,
}

/// Scans `(resolution + 1)^N` nodes of the bounding box and keeps closure
/// nodes whose `|f|` is a local minimum below `L * cell diagonal`, with `L`
/// a difference-quotient estimate of the Lipschitz constant. Minima within
/// two cells of a smaller one are merged.
pub fn grid_zero_oracle(field: &VectorField, domain: &Domain, resolution: usize) -> Result<OracleScan> {
    let n = domain.dim();
    if n > 3 {
        return Err(Error::InvalidArgument("grid oracle needs dimension at most 3".into()));
    }
    let res = resolution.max(1);
    let nodes = res + 1;
    let bb = domain.bbox();
    let widths: Vec<f64> = (0..n).map(|i| (bb.hi[i] - bb.lo[i]) / res as f64).collect();
    let total = nodes.pow(n as u32);
    let idx_to_point = |mut k: usize| {
        let mut p = Point::zeros(n);
        for i in 0..n {
            p[i] = bb.lo[i] + (k % nodes) as f64 * widths[i];
            k /= nodes;
        }
        p
    };
    let ids: Vec<usize> = (0..total).collect();
    let vals: Vec<Option<(Point, f64)>> = par_map(&ids, |&k| {
        let p = idx_to_point(k);
        domain
            .membership(&p)
            .in_closure()
            .then(|| {
                let v = field.eval(0.0, &p);
                (v.clone(), v.norm())
            })
    });
    let neighbors = |k: usize| {
        let mut out = Vec::new();
        let mut stride = 1;
        for _ in 0..n {
            let c = (k / stride) % nodes;
            if c > 0 {
                out.push(k - stride);
            }
            if c + 1 < nodes {
                out.push(k + stride);
            }
            stride *= nodes;
        }
        out
    };
    let diag = widths.iter().map(|w| w * w).sum::<f64>().sqrt();
    let cell = widths.iter().copied().fold(0.0, f64::max);
    let mut lip: f64 = 0.0;
    let mut min_norm = f64::INFINITY;
    let mut scanned = 0;
    for k in 0..total {
        if let Some((fk, nk)) = &vals[k] {
            scanned += 1;
            min_norm = min_norm.min(*nk);
            let mut stride = 1;
            for w in &widths {
                if let Some(Some((fj, _))) = vals.get(k + stride) {
                    if (k / stride) % nodes + 1 < nodes {
                        lip = lip.max((fk - fj).norm() / w);
                    }
                }
                stride *= nodes;
            }
        }
    }
    let threshold = lip * diag;
    let mut minima: Vec<(usize, f64)> = (0..total)
        .filter_map(|k| {
            let (_, nk) = vals[k].as_ref()?;
            let local = neighbors(k)
                .into_iter()
                .all(|j| vals[j].as_ref().is_none_or(|(_, nj)| *nk <= *nj));
            (local && *nk <= threshold).then_some((k, *nk))
        })
        .collect();
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut zeros: Vec<(Point, f64)> = Vec::new();
    for (k, v) in minima {
        let p = idx_to_point(k);
        if zeros.iter().all(|(q, _)| (q - &p).norm() > 2.0 * diag) {
            zeros.push((p, v));
        }
    }
    Ok(OracleScan {
        zeros,
        min_norm,
        scanned,
        cell,
        threshold,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    /// `x <- Φ(x)`.
    Direct,
    /// `x <- (1-α)x + αΦ(x)`, halving `α` when the residual grows.
    Averaged { alpha: f64 },
    /// Fixed points for `f + ε(p - x)` with `ε = 1, 1/2, ..., 2^-20, 0`.
    Continuation { center: Option<Point> },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Continuation { center: None }
    }
}

/// Who allowed the periodic search to run.
#[derive(Clone, Copy, Debug)]
pub enum Gate<'a> {
    Theorems(&'a TheoremVerdict),
    Forced,
}

#[derive(Clone, Debug)]
pub struct PeriodicOptions {
    pub tol_per: Option<f64>,
    /// Poincaré evaluations per stage.
    pub max_evals: usize,
    pub start: Option<Point>,
    pub integrator: IntegratorConfig,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            tol_per: None,
            max_evals: 500,
            start: None,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicResult {
    pub y0: Point,
    /// `|Φ(y0) - y0|`.
    pub residual: f64,
    pub tol_per: f64,
    pub trajectory: Trajectory,
    pub status: Status,
    pub scheme: Scheme,
    pub evaluations: usize,
    pub trace: Vec<Stage>,
    pub granted_by: Option<Theorem>,
    pub forced: bool,
    pub notes: Vec<String>,
}

/// Pulls exterior iterates back into the closure.
enum Retraction<'a> {
    Star(StarBody<'a>),
    Nearest(Vec<Point>),
}

impl<'a> Retraction<'a> {
    fn for_domain(domain: &'a Domain) -> Self {
        if let Some(p) = domain.star_center() {
            if domain.has_interior() {
                if let Ok(c) = strict_star_check(domain, p, 360) {
                    if c.verdict == StarVerdict::Strict {
                        if let Ok(b) = StarBody::with_center(domain, p.clone()) {
                            return Retraction::Star(b);
                        }
                    }
                }
            }
        }
        let pts = domain
            .sample_boundary(512, 0)
            .map(|v| v.into_iter().map(|u| u.point).collect())
            .unwrap_or_default();
        Retraction::Nearest(pts)
    }

    fn apply(&self, domain: &Domain, y: Point) -> Point {
        if domain.membership(&y).in_closure() {
            return y;
        }
        match self {
            Retraction::Star(b) => b.retract(&y).unwrap_or(y),
            Retraction::Nearest(pts) => pts
                .iter()
                .min_by(|a, b| (*a - &y).norm().total_cmp(&(*b - &y).norm()))
                .cloned()
                .unwrap_or(y),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Retraction::Star(_) => "radial retraction",
            Retraction::Nearest(_) => "nearest boundary sample",
        }
    }
}

struct Poincare<'a> {
    field: VectorField,
    domain: &'a Domain,
    cfg: IntegratorConfig,
    evals: usize,
}

impl Poincare<'_> {
    fn map(&mut self, x: &Point) -> Result<Point> {
        self.evals += 1;
        Ok(integrate(&self.field, x, (0.0, self.field.period), &self.cfg)?.last().clone())
    }
}

/// Fixed point of `Φ` for one field: Newton on `Φ(x) - x` with
/// difference Jacobians, averaged steps when Newton fails. Stops on
/// tolerance, budget, or 25 evaluations without a 1% improvement.
fn fixed_point(pm: &mut Poincare, retr: &Retraction, x0: &Point, tol: f64, budget: usize) -> Result<(Point, f64)> {
    let n = x0.len();
    let start = pm.evals;
    let mut x = x0.clone();
    let mut px = pm.map(&x)?;
    let mut r = (&px - &x).norm();
    let (mut best_r, mut best_at) = (r, pm.evals);
    let mut alpha: f64 = 0.5;
    while r > tol && pm.evals - start < budget && pm.evals - best_at < 25 {
        let h = 1e-7 * (1.0 + x.norm());
        let mut jac = DMatrix::zeros(n, n);
        let base = &px - &x;
        for k in 0..n {
            let mut y = x.clone();
            y[k] += h;
            let py = pm.map(&y)?;
            jac.set_column(k, &((&py - &y - &base) / h));
        }
        let mut moved = false;
        if let Some(dx) = jac.lu().solve(&(-&base)).filter(|d| d.iter().all(|v| v.is_finite())) {
            let mut a = 1.0;
            for _ in 0..6 {
                let cand = retr.apply(pm.domain, &x + &dx * a);
                let pc = pm.map(&cand)?;
                let rc = (&pc - &cand).norm();
                if rc < r {
                    (x, px, r) = (cand, pc, rc);
                    moved = true;
                    break;
                }
                a *= 0.5;
            }
        }
        if !moved {
            let cand = retr.apply(pm.domain, &x * (1.0 - alpha) + &px * alpha);
            let pc = pm.map(&cand)?;
            let rc = (&pc - &cand).norm();
            if rc >= r {
                alpha = (alpha * 0.5).max(1.0 / 64.0);
            }
            (x, px, r) = (cand, pc, rc);
        }
        if r < 0.99 * best_r {
            best_r = r;
            best_at = pm.evals;
        }
    }
    Ok((x, r))
}

fn gate_check(gate: Gate) -> Result<(Option<Theorem>, bool)> {
    match gate {
        Gate::Forced => Ok((None, true)),
        Gate::Theorems(v) => v.grants_periodic().map(|t| (Some(t), false)).ok_or(Error::NotApplicable),
    }
}

/// `y0` with `|Φ(y0) - y0| <= tol_per`, `Φ` the period map of `field`.
pub fn find_periodic(
    field: &VectorField,
    domain: &Domain,
    family: Option<&BoundingFamily>,
    scheme: Scheme,
    gate: Gate,
    opts: &PeriodicOptions,
) -> Result<PeriodicResult> {
    let (granted_by, forced) = gate_check(gate)?;
    let tol_per = opts.tol_per.unwrap_or(1e-8 * domain.diameter());
    let retr = Retraction::for_domain(domain);
    let center = domain.star_center().cloned().unwrap_or_else(|| domain.bbox().center());
    let x0 = opts.start.clone().unwrap_or_else(|| center.clone());
    let mut pm = Poincare {
        field: field.clone(),
        domain,
        cfg: opts.integrator,
        evals: 0,
    };
    let mut trace = Vec::new();
    let mut notes = vec![format!("exterior iterates: {}", retr.label())];
    if forced {
        notes.push("applicability gate overridden".into());
    }
    if let Some(s) = field.smoothness.scope_note() {
        notes.push(s.into());
    }
    if family.is_none() {
        notes.push("no bounding family supplied".into());
    }

    let (y0, _) = match &scheme {
        Scheme::Direct | Scheme::Averaged { .. } => {
            let mut alpha = match scheme {
                Scheme::Averaged { alpha } => alpha.clamp(1e-6, 1.0),
                _ => 1.0,
            };
            let averaged = alpha < 1.0;
            let mut x = x0;
            let mut px = pm.map(&x)?;
            let mut r = (&px - &x).norm();
            // once within tolerance, keep going towards tol/10 while it still pays
            let mut improving = true;
            while (r > tol_per || (r > 0.1 * tol_per && improving)) && pm.evals < opts.max_evals {
                x = retr.apply(domain, &x * (1.0 - alpha) + &px * alpha);
                px = pm.map(&x)?;
                let rn = (&px - &x).norm();
                if averaged && rn > r {
                    alpha *= 0.5;
                }
                improving = rn < 0.99 * r;
                r = rn;
            }
            trace.push(Stage {
                n: f64::INFINITY,
                z: x.clone(),
                residual: r,
            });
            (x, r)
        }
        Scheme::Continuation { center: c } => {
            let p = c.clone().unwrap_or(center);
            let mut x = x0;
            let mut r = f64::INFINITY;
            let eps_schedule = (0..=20).map(|k| 0.5f64.powi(k)).chain(std::iter::once(0.0));
            for eps in eps_schedule {
                let pp = p.clone();
                let g: Arc<dyn Fn(&Point) -> Point + Send + Sync> = Arc::new(move |y: &Point| &pp - y);
                pm.field = if eps > 0.0 { field.perturbed(g, eps) } else { field.clone() };
                let stage_tol = if eps > 0.0 { tol_per.max(1e-3 * eps * domain.diameter()) } else { tol_per };
                (x, r) = fixed_point(&mut pm, &retr, &x, if eps > 0.0 { stage_tol } else { 0.1 * tol_per }, opts.max_evals)?;
                trace.push(Stage {
                    n: if eps > 0.0 { 1.0 / eps } else { f64::INFINITY },
                    z: x.clone(),
                    residual: r,
                });
            }
            pm.field = field.clone();
            (x, r)
        }
    };

    let trajectory = integrate(field, &y0, (0.0, field.period), &opts.integrator)?;
    let residual = (trajectory.last() - &y0).norm();
    let inside = trajectory.stays_in_closure(domain);
    if !inside {
        notes.push("trajectory leaves the closure".into());
    }
    Ok(PeriodicResult {
        y0,
        residual,
        tol_per,
        status: if residual <= tol_per && inside {
            Status::Converged
        } else {
            Status::MaxIterations
        },
        trajectory,
        scheme,
        evaluations: pm.evals,
        trace,
        granted_by,
        forced,
        notes,
    })
}

/// Per-period record of [`short_period_limit`].
#[derive(Clone, Debug)]
pub struct ShortPeriodStep {
    pub period: f64,
    pub y0: Point,
    pub residual: f64,
    pub status: Status,
    /// `max_t |ζ(t) - ζ(0)|`.
    pub deviation: f64,
    /// `T K`.
    pub bound: f64,
}

impl ShortPeriodStep {
    pub fn bound_holds(&self) -> bool {
        self.deviation <= self.bound * (1.0 + 1e-9) + 1e-12
    }
}

#[derive(Clone, Debug)]
pub struct ShortPeriodResult {
    pub equilibrium: EquilibriumResult,
    pub steps: Vec<ShortPeriodStep>,
    /// Largest sampled `|f|` on the closure.
    pub k_bound: f64,
}

/// `T_k = 2^-k` for `k = 0..=12`.
pub fn default_schedule() -> Vec<f64> {
    (0..=12).map(|k| 0.5f64.powi(k)).collect()
}

/// Periodic solutions for shrinking periods; their initial values should
/// approach an equilibrium.
pub fn short_period_limit(
    field: &VectorField,
    domain: &Domain,
    family: Option<&BoundingFamily>,
    schedule: &[f64],
    gate: Gate,
    opts: &PeriodicOptions,
) -> Result<ShortPeriodResult> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|t| *t <= 0.0) {
        return Err(Error::InvalidArgument("period schedule must be positive and strictly decreasing".into()));
    }
    if !field.autonomous {
        return Err(Error::InvalidArgument("short-period limit needs an autonomous field".into()));
    }
    let k_bound = max_field_norm(field, domain, 400, 0);
    let tol_eq = 1e-8 * (1.0 + k_bound);
    let mut steps = Vec::new();
    let mut trace = Vec::new();
    let mut start = opts.start.clone();
    let mut last_status = Status::MaxIterations;
    for &period in schedule {
        let fk = field.clone().with_period(period);
        let o = PeriodicOptions {
            start: start.clone(),
            ..opts.clone()
        };
        let res = find_periodic(&fk, domain, family, Scheme::default(), gate, &o)?;
        let fz = field.eval(0.0, &res.y0).norm();
        trace.push(Stage {
            n: 1.0 / period,
            z: res.y0.clone(),
            residual: fz,
        });
        steps.push(ShortPeriodStep {
            period,
            y0: res.y0.clone(),
            residual: res.residual,
            status: res.status,
            deviation: res.trajectory.max_deviation(),
            bound: period * k_bound,
        });
        last_status = res.status;
        start = Some(res.y0);
    }
    let z = start.expect("schedule is nonempty");
    let residual = field.eval(0.0, &z).norm();
    let ok = last_status == Status::Converged && residual <= tol_eq && domain.membership(&z).in_closure();
    Ok(ShortPeriodResult {
        equilibrium: EquilibriumResult {
            z,
            residual,
            tol_eq,
            trace,
            status: if ok { Status::Converged } else { Status::MaxIterations },
            notes: vec![format!("K = {k_bound:.6e}")],
        },
        steps,
        k_bound,
    })
}
