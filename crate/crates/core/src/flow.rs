//! Trajectories of `y' = f(t, y)`, escape detection and the Poincaré map.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::bounding::BoundingFamily;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::Domain;
use crate::lattice::par_map;
use crate::types::{tol, Membership, Point};

type FieldFn = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Smoothness {
    Lipschitz,
    /// Solutions may branch; integration picks one of them.
    ContinuousOnly,
}

impl Smoothness {
    /// Note attached to every report built from integrated trajectories.
    pub fn scope_note(self) -> Option<&'static str> {
        match self {
            Smoothness::Lipschitz => None,
            Smoothness::ContinuousOnly => Some("selection of a possibly non-unique funnel"),
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Lipschitz => write!(f, "lipschitz"),
            Smoothness::ContinuousOnly => write!(f, "continuous-only"),
        }
    }
}

/// Right-hand side `f(t, x)` with its period and smoothness tag.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    f: FieldFn,
    pub period: f64,
    pub smoothness: Smoothness,
    pub autonomous: bool,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("smoothness", &self.smoothness)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl VectorField {
    /// Time-independent field with period 1 and the Lipschitz tag.
    pub fn autonomous(dim: usize, f: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        VectorField {
            dim,
            f: Arc::new(move |_, x| f(x)),
            period: 1.0,
            smoothness: Smoothness::Lipschitz,
            autonomous: true,
        }
    }

    /// `T`-periodic field.
    pub fn periodic(dim: usize, period: f64, f: impl Fn(f64, &Point) -> Point + Send + Sync + 'static) -> Self {
        VectorField {
            dim,
            f: Arc::new(f),
            period,
            smoothness: Smoothness::Lipschitz,
            autonomous: false,
        }
    }

    /// Field from one expression per component; autonomous unless `t` occurs.
    pub fn from_exprs(components: Vec<Expr>, period: f64, smoothness: Smoothness) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("field needs at least one component".into()));
        }
        if let Some(e) = components.iter().find(|e| e.arity() > dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: e.arity(),
            });
        }
        let autonomous = components.iter().all(|e| !e.uses_time());
        let comps = Arc::new(components);
        Ok(VectorField {
            dim,
            f: Arc::new(move |t, x| Point::from_iterator(dim, comps.iter().map(|e| e.eval(t, x.as_slice())))),
            period,
            smoothness,
            autonomous,
        })
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64, x: &Point) -> Point {
        (self.f)(t, x)
    }

    /// `f + eps * g`.
    pub fn perturbed(&self, g: Arc<dyn Fn(&Point) -> Point + Send + Sync>, eps: f64) -> Self {
        let f = self.f.clone();
        VectorField {
            dim: self.dim,
            f: Arc::new(move |t, x| f(t, x) + g(x) * eps),
            period: self.period,
            smoothness: self.smoothness,
            autonomous: self.autonomous,
        }
    }

    /// Uniform time grid on `[0, T]` including both ends; a single instant
    /// for autonomous fields.
    pub fn time_grid(&self, n_times: usize) -> Vec<f64> {
        if self.autonomous || n_times <= 1 {
            return vec![0.0];
        }
        (0..n_times)
            .map(|k| self.period * k as f64 / (n_times - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Method {
    /// Classical fourth-order scheme; `None` means span / 2000.
    Rk4 { h: Option<f64> },
    /// Dormand–Prince 5(4).
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub h_max: Option<f64>,
    /// Time tolerance for escape bisection.
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4 { h: None },
            h_max: None,
            event_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(h: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { h: Some(h) },
            ..Default::default()
        }
    }

    pub fn rk45() -> Self {
        IntegratorConfig {
            method: Method::Rk45 { rtol: 1e-8, atol: 1e-10 },
            ..Default::default()
        }
    }

    pub fn with_steps(steps: usize, span: f64) -> Self {
        Self::rk4(span / steps.max(1) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EscapeMethod {
    /// Bisection on `η(t) = V_u(y(t))`.
    BoundingFunction,
    /// Bisection on the domain classifier.
    Membership,
}

#[derive(Clone, Debug)]
pub struct Escape {
    pub t_exit: f64,
    pub u_exit: Point,
    pub patch_id: Option<usize>,
    /// Earliest stored time after the exit at which the state is exterior.
    pub t_probe: f64,
    pub method: EscapeMethod,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    derivs: Vec<Point>,
    pub escape: Option<Escape>,
    pub smoothness: Smoothness,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &Point {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn scope_note(&self) -> Option<&'static str> {
        self.smoothness.scope_note()
    }

    /// Cubic Hermite interpolation between stored steps.
    pub fn state_at(&self, t: f64) -> Point {
        let k = match self.times.partition_point(|s| *s <= t) {
            0 => return self.states[0].clone(),
            k if k >= self.times.len() => return self.last().clone(),
            k => k - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.states[k] * h00 + &self.derivs[k] * (h10 * h) + &self.states[k + 1] * h01 + &self.derivs[k + 1] * (h11 * h)
    }

    /// Largest distance from the initial state.
    pub fn max_deviation(&self) -> f64 {
        self.states
            .iter()
            .map(|x| (x - &self.states[0]).norm())
            .fold(0.0, f64::max)
    }

    pub fn stays_in_closure(&self, domain: &Domain) -> bool {
        self.states.iter().all(|x| domain.membership(x).in_closure())
    }

    /// Columns `t, x_1..x_N, inside`.
    pub fn write_csv<W: Write>(&self, domain: Option<&Domain>, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        header.push_str(",inside");
        writeln!(w, "{header}")?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut line = format!("{t:.12e}");
            for v in x.iter() {
                line.push_str(&format!(",{v:.12e}"));
            }
            let inside = domain.is_none_or(|d| d.membership(x).in_closure());
            line.push_str(if inside { ",1" } else { ",0" });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn check_finite(x: &Point, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(t))
    }
}

/// Integrates from `x0` over `[t0, t1]`.
pub fn integrate(field: &VectorField, x0: &Point, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty time span [{t0}, {t1}]")));
    }
    if x0.len() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    check_finite(x0, t0)?;
    let span = t1 - t0;
    let h_max = cfg.h_max.unwrap_or(span).min(span);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.clone()],
        derivs: vec![field.eval(t0, x0)],
        escape: None,
        smoothness: field.smoothness,
    };
    match cfg.method {
        Method::Rk4 { h } => {
            let h = h.unwrap_or(span / 2000.0).min(h_max);
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("step must be positive".into()));
            }
            let steps = (span / h).ceil() as usize;
            let h = span / steps as f64;
            let mut x = x0.clone();
            for k in 0..steps {
                let t = t0 + k as f64 * h;
                let k1 = traj.derivs.last().expect("seeded").clone();
                let k2 = field.eval(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
                let k3 = field.eval(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
                let k4 = field.eval(t + h, &(&x + &k3 * h));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                let tn = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
                check_finite(&x, tn)?;
                traj.times.push(tn);
                traj.derivs.push(field.eval(tn, &x));
                traj.states.push(x.clone());
            }
        }
        Method::Rk45 { rtol, atol } => dopri(field, &mut traj, t1, h_max, rtol, atol)?,
    }
    Ok(traj)
}

// Dormand–Prince coefficients
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri(field: &VectorField, traj: &mut Trajectory, t1: f64, h_max: f64, rtol: f64, atol: f64) -> Result<()> {
    let mut t = traj.times[0];
    let mut x = traj.states[0].clone();
    let mut h = (h_max * 0.01).max(1e-6).min(h_max);
    let mut k: Vec<Point> = vec![traj.derivs[0].clone(); 7];
    while t < t1 {
        if h < 1e-14 {
            return Err(Error::StepUnderflow(t));
        }
        let last = t + h >= t1;
        let h_step = if last { t1 - t } else { h };
        for s in 1..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    xs += kj * (h_step * A[s][j]);
                }
            }
            k[s] = field.eval(t + C[s] * h_step, &xs);
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for s in 0..7 {
            x5 += &k[s] * (h_step * B5[s]);
            x4 += &k[s] * (h_step * B4[s]);
        }
        let err = (0..x.len())
            .map(|i| {
                let sc = atol + rtol * x[i].abs().max(x5[i].abs());
                ((x5[i] - x4[i]) / sc).powi(2)
            })
            .sum::<f64>()
            .sqrt()
            / (x.len() as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h_step };
            x = x5;
            check_finite(&x, t)?;
            // first-same-as-last
            k[0] = k[6].clone();
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.derivs.push(k[0].clone());
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_step * factor).min(h_max);
    }
    Ok(())
}

fn bisect_time(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    while hi - lo > tol {
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
    (lo, hi)
}

/// First exit of the trajectory from the closure. The crossing time is
/// refined on `η(t) = V_u(y(t))` when that changes sign with a
/// non-degenerate gradient, and on the classifier otherwise.
pub fn detect_escape(
    traj: &Trajectory,
    domain: &Domain,
    family: Option<&BoundingFamily>,
    event_tol: f64,
) -> Option<Escape> {
    let k = traj
        .states
        .iter()
        .position(|x| domain.membership(x) == Membership::Exterior)?;
    if k == 0 {
        return Some(Escape {
            t_exit: traj.times[0],
            u_exit: traj.states[0].clone(),
            patch_id: None,
            t_probe: traj.times[0],
            method: EscapeMethod::Membership,
        });
    }
    let (ta, tb) = (traj.times[k - 1], traj.times[k]);
    let level = |t: f64| domain.level(&traj.state_at(t));
    // locate the crossing on the classifier first
    let (lo, hi) = bisect_time(level, ta, tb, event_tol);
    let pick = |lo: f64, hi: f64| {
        let (yl, yh) = (traj.state_at(lo), traj.state_at(hi));
        if domain.membership(&yh) == Membership::Boundary || domain.level(&yh).abs() <= domain.level(&yl).abs() {
            (hi, yh)
        } else {
            (lo, yl)
        }
    };
    let (t_m, y_m) = pick(lo, hi);
    let bp = domain.boundary_point(&y_m);
    let patch_id = bp.as_ref().map(|b| b.primary_patch());

    if let (Some(fam), Some(bp)) = (family, bp.as_ref()) {
        if let Ok(v) = fam.resolve(bp) {
            let eta = |t: f64| v.eval(&traj.state_at(t));
            if v.anchor_gradient().norm() >= tol::GRAD && eta(ta) < 0.0 && eta(tb) > 0.0 {
                let (lo, hi) = bisect_time(eta, ta, tb, event_tol);
                let (t_exit, u_exit) = pick(lo, hi);
                return Some(Escape {
                    t_exit,
                    u_exit,
                    patch_id,
                    t_probe: tb,
                    method: EscapeMethod::BoundingFunction,
                });
            }
        }
    }
    Some(Escape {
        t_exit: t_m,
        u_exit: y_m,
        patch_id,
        t_probe: tb,
        method: EscapeMethod::Membership,
    })
}

/// Integrates and fills in the escape record.
pub fn integrate_in(
    field: &VectorField,
    domain: &Domain,
    family: Option<&BoundingFamily>,
    x0: &Point,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = integrate(field, x0, t_span, cfg)?;
    traj.escape = detect_escape(&traj, domain, family, cfg.event_tol);
    Ok(traj)
}

#[derive(Clone, Debug)]
pub struct PoincareResult {
    pub end: Point,
    pub stayed_inside: bool,
    pub trajectory: Trajectory,
}

/// `y(T)` for the solution through `x0` at time 0.
pub fn poincare(field: &VectorField, x0: &Point, domain: &Domain, cfg: &IntegratorConfig) -> Result<PoincareResult> {
    let trajectory = integrate(field, x0, (0.0, field.period), cfg)?;
    Ok(PoincareResult {
        end: trajectory.last().clone(),
        stayed_inside: trajectory.stays_in_closure(domain),
        trajectory,
    })
}

#[derive(Clone, Debug)]
pub struct EscapeRecord {
    pub index: usize,
    pub x0: Point,
    pub from_boundary: bool,
    pub escape: Escape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InvarianceVerdict {
    NoEscapeObserved,
    EscapeFound,
}

#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub verdict: InvarianceVerdict,
    pub horizon: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Escapes from interior starts, ordered by start index.
    pub escapes: Vec<EscapeRecord>,
    /// Boundary starts whose integrated selection left the closure. These
    /// do not refute weak invariance.
    pub selection_escapes: Vec<EscapeRecord>,
    pub smoothness: Smoothness,
}

impl InvarianceReport {
    /// Interior-start escape closest to a given exit point.
    pub fn escape_near(&self, u: &Point) -> Option<&EscapeRecord> {
        self.escapes
            .iter()
            .min_by(|a, b| (&a.escape.u_exit - u).norm().total_cmp(&(&b.escape.u_exit - u).norm()))
    }
}

/// Integrates from interior lattice points, `extra` starts and a few
/// boundary samples over `[0, horizon]` and records every exit.
#[allow(clippy::too_many_arguments)]
pub fn verify_invariance(
    field: &VectorField,
    domain: &Domain,
    family: Option<&BoundingFamily>,
    n_initial: usize,
    horizon: f64,
    extra: &[Point],
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<InvarianceReport> {
    let mut starts: Vec<(Point, bool)> = domain
        .interior_lattice(n_initial)
        .into_iter()
        .chain(extra.iter().cloned())
        .filter(|x| domain.membership(x) == Membership::Interior)
        .map(|x| (x, false))
        .collect();
    let n_interior = starts.len();
    let boundary = domain.sample_boundary((n_initial / 4).max(1), seed)?;
    starts.extend(boundary.into_iter().map(|b| (b.point, true)));
    let n_boundary = starts.len() - n_interior;

    let runs = par_map(&starts, |(x0, _)| integrate_in(field, domain, family, x0, (0.0, horizon), cfg));
    let mut escapes = Vec::new();
    let mut selection_escapes = Vec::new();
    for (index, ((x0, from_boundary), run)) in starts.iter().zip(runs).enumerate() {
        if let Some(escape) = run?.escape {
            let rec = EscapeRecord {
                index,
                x0: x0.clone(),
                from_boundary: *from_boundary,
                escape,
            };
            if *from_boundary {
                selection_escapes.push(rec);
            } else {
                escapes.push(rec);
            }
        }
    }
    Ok(InvarianceReport {
        verdict: if escapes.is_empty() {
            InvarianceVerdict::NoEscapeObserved
        } else {
            InvarianceVerdict::EscapeFound
        },
        horizon,
        n_interior,
        n_boundary,
        escapes,
        selection_escapes,
        smoothness: field.smoothness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::point;

    #[test]
    fn hermite_reproduces_cubic() {
        // y' = 3t^2 is integrated exactly by RK4
        let f = VectorField::periodic(1, 1.0, |t, _| point(&[3.0 * t * t]));
        let tr = integrate(&f, &point(&[0.0]), (0.0, 1.0), &IntegratorConfig::rk4(0.25)).unwrap();
        assert!((tr.state_at(0.6)[0] - 0.216).abs() < 1e-12);
    }

    #[test]
    fn dopri_matches_exponential() {
        let f = VectorField::autonomous(1, |x| -x);
        let tr = integrate(&f, &point(&[1.0]), (0.0, 2.0), &IntegratorConfig::rk45()).unwrap();
        assert!((tr.last()[0] - (-2f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn time_grid_includes_ends() {
        let f = VectorField::periodic(1, 2.0, |t, _| point(&[t]));
        assert_eq!(f.time_grid(3), vec![0.0, 1.0, 2.0]);
        assert_eq!(VectorField::autonomous(1, |x| x.clone()).time_grid(5), vec![0.0]);
    }
}
