//! Built-in scenarios, each with a checklist of expected outcomes.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::bounding::{nondegeneracy, Degeneracy};
use crate::conditions::{
    check_bony_all, check_bony_all_at, check_bony_some_at, check_convex_some, check_local, check_strict,
    check_weak, theorem_applicability, ConditionReport, Grid, Theorem, TheoremVerdict, Verdict,
};
use crate::error::{Error, Result};
use crate::flow::{integrate, integrate_in, verify_invariance, IntegratorConfig, InvarianceVerdict, Trajectory};
use crate::geometry::{
    bony_normals, default_lambda, kernel_ball_check, psi, psi_inverse, radial_theta, strict_star_check, Domain,
    StarVerdict,
};
use crate::report::fmt_point;
use crate::scenario::Scenario;
use crate::solve::{find_equilibrium_perturbed, find_periodic, grid_zero_oracle, Gate, PeriodicOptions, Scheme, Status};
use crate::types::{point, tol, Direction, Point};

pub const GALLERY_IDS: [&str; 10] = [
    "remark-2-2",
    "example-3-1",
    "d-set",
    "a-set",
    "example-3-3",
    "g1",
    "g2",
    "rotation-disk",
    "cor-3-2-demo",
    "linear-periodic",
];

const SOURCES: [&str; 10] = [
    include_str!("../scenarios/remark-2-2.toml"),
    include_str!("../scenarios/example-3-1.toml"),
    include_str!("../scenarios/d-set.toml"),
    include_str!("../scenarios/a-set.toml"),
    include_str!("../scenarios/example-3-3.toml"),
    include_str!("../scenarios/g1.toml"),
    include_str!("../scenarios/g2.toml"),
    include_str!("../scenarios/rotation-disk.toml"),
    include_str!("../scenarios/cor-3-2-demo.toml"),
    include_str!("../scenarios/linear-periodic.toml"),
];

pub fn scenario_source(id: &str) -> Result<&'static str> {
    GALLERY_IDS
        .iter()
        .position(|g| *g == id)
        .map(|k| SOURCES[k])
        .ok_or_else(|| Error::UnknownGallery(id.to_string()))
}

pub fn scenario(id: &str) -> Result<Scenario> {
    Scenario::parse(scenario_source(id)?, &format!("{id}.toml"))
}

/// Sample density for the condition checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Density {
    Base,
    Doubled,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub label: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
    /// Set for sampled boundary conditions.
    pub verdict: Option<Verdict>,
}

pub struct GalleryRun {
    pub id: String,
    pub scenario: Scenario,
    pub checks: Vec<Check>,
    pub reports: Vec<ConditionReport>,
    pub trajectories: Vec<Trajectory>,
    pub applicability: Option<TheoremVerdict>,
}

impl GalleryRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn push(&mut self, label: impl Into<String>, expected: impl Into<String>, observed: impl Into<String>, pass: bool) {
        self.checks.push(Check {
            label: label.into(),
            expected: expected.into(),
            observed: observed.into(),
            pass,
            verdict: None,
        });
    }

    /// Records a condition verdict check and keeps the report.
    fn verdict(&mut self, label: impl Into<String>, rep: ConditionReport, want: &str) {
        let got = verdict_name(&rep.verdict);
        self.checks.push(Check {
            label: label.into(),
            expected: want.to_string(),
            observed: format!("{got} (worst margin {:.3e})", rep.worst_margin),
            pass: got == want,
            verdict: Some(rep.verdict.clone()),
        });
        self.reports.push(rep);
    }

    fn theorem(&mut self, v: &TheoremVerdict, t: Theorem, applies: bool) {
        let got = v.applies(t);
        self.push(
            format!("{} applicable", t.id()),
            if applies { "yes" } else { "no" },
            if got { "yes" } else { "no" },
            got == applies,
        );
    }
}

pub fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Certified { .. } => "Certified",
        Verdict::Indeterminate { .. } => "Indeterminate",
        Verdict::Violated => "Violated",
    }
}

/// Runs entry `id` and fills its checklist.
pub fn run(id: &str, density: Density) -> Result<GalleryRun> {
    let sc = scenario(id)?;
    let grid = match density {
        Density::Base => sc.grid(),
        Density::Doubled => sc.grid().doubled(),
    };
    let mut run = GalleryRun {
        id: id.to_string(),
        scenario: sc,
        checks: Vec::new(),
        reports: Vec::new(),
        trajectories: Vec::new(),
        applicability: None,
    };
    match id {
        "remark-2-2" => remark_2_2(&mut run, grid)?,
        "example-3-1" => example_3_1(&mut run, grid)?,
        "d-set" => d_set(&mut run)?,
        "a-set" => a_set(&mut run)?,
        "example-3-3" => example_3_3(&mut run, grid)?,
        "g1" => g1(&mut run, grid)?,
        "g2" => g2(&mut run, grid)?,
        "rotation-disk" => rotation_disk(&mut run, grid)?,
        "cor-3-2-demo" => cor_3_2(&mut run, grid)?,
        "linear-periodic" => linear_periodic(&mut run)?,
        _ => unreachable!("scenario() rejects unknown ids"),
    }
    Ok(run)
}

fn applicability(run: &mut GalleryRun, grid: Grid) -> TheoremVerdict {
    let pb = run.scenario.to_problem().with_grid(grid);
    let v = theorem_applicability(&pb);
    run.applicability = Some(v.clone());
    v
}

fn remark_2_2(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let normal = sc.normal.clone().ok_or_else(|| Error::InvalidArgument("remark-2-2 needs a normal".into()))?;
    let nf = move |u: &crate::geometry::BoundaryPoint| {
        Some(Point::from_iterator(normal.len(), normal.iter().map(|e| e.eval(0.0, u.point.as_slice()))))
    };
    let rep = check_convex_some(&sc.domain, &sc.field, &nf, grid)?;
    let spread = rep.margins.iter().map(|m| m.margin.abs()).fold(0.0, f64::max);
    run.push("chosen-normal margins", "|margin| <= 1e-12", format!("max |margin| = {spread:.3e}"), spread <= 1e-12);
    run.verdict("convex-some", rep, "Certified");

    let v = applicability(run, grid);
    run.theorem(&v, Theorem::ConvexInteriorEquilibrium, false);
    let noted = v.notes.iter().any(|n| n.contains("no existence conclusion"));
    run.push("empty-interior note", "present", if noted { "present" } else { "missing" }, noted);
    let ids: Vec<&str> = v.applicable.iter().map(|t| t.id()).collect();
    run.push(
        "applicable theorems",
        "none",
        if ids.is_empty() { "none".to_string() } else { ids.join(", ") },
        ids.is_empty(),
    );

    let scan = grid_zero_oracle(&sc.field, &sc.domain, sc.params.resolution)?;
    run.push(
        "grid zero oracle",
        "no zeros, min |f| >= 1 - 1e-9",
        format!("{} zeros, min |f| = {:.12}", scan.zeros.len(), scan.min_norm),
        scan.zeros.is_empty() && scan.min_norm >= 1.0 - 1e-9,
    );
    Ok(())
}

fn example_3_1(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let fam = sc.family.clone().expect("example-3-1 declares a family");
    let nd = nondegeneracy(&fam, &sc.domain, 8, sc.seed)?;
    let u = nd.worst_point.point[0];
    run.push(
        "nondegeneracy",
        "Degenerate at u = 1 with |∇V| <= 1e-9",
        format!("{:?} at u = {u:.9}, |∇V| = {:.3e}", nd.verdict, nd.eta_minus),
        nd.verdict == Degeneracy::Degenerate && (u - 1.0).abs() <= 1e-9 && nd.eta_minus <= 1e-9,
    );
    run.verdict("bound-weak", check_weak(&fam, &sc.field, &sc.domain, grid)?, "Certified");
    run.verdict(
        "bound-local",
        check_local(&fam, &sc.field, &sc.domain, sc.params.rho_fraction, 16, grid)?,
        "Violated",
    );
    let tr = integrate_in(&sc.field, &sc.domain, Some(&fam), &point(&[0.0]), (0.0, sc.horizon()), &IntegratorConfig::default())?;
    let t_exit = tr.escape.as_ref().map(|e| e.t_exit);
    run.push(
        "escape from 0",
        "t_exit = 1 ± 1e-4",
        t_exit.map_or("none".into(), |t| format!("t_exit = {t:.9}")),
        t_exit.is_some_and(|t| (t - 1.0).abs() <= 1e-4),
    );
    run.trajectories.push(tr);
    Ok(())
}

fn d_set(run: &mut GalleryRun) -> Result<()> {
    let d = run.scenario.domain.clone();
    let p = Point::zeros(2);
    let cert = strict_star_check(&d, &p, run.scenario.params.n_dirs)?;
    run.push(
        "strict star check about 0",
        "Strict",
        format!("{:?} ({} rays)", cert.verdict, cert.directions_tested),
        cert.verdict == StarVerdict::Strict,
    );
    let axis = radial_theta(&d, &Direction::from_slice(&[1.0, 0.0])?)?;
    run.push("θ along (1,0)", "1 ± 1e-8", format!("{axis:.12}"), (axis - 1.0).abs() <= 1e-8);
    let diag = radial_theta(&d, &Direction::from_slice(&[1.0, 1.0])?)?;
    let want = SQRT_2 / 4.0;
    run.push("θ along the diagonal", "√2/4 ± 1e-6", format!("{diag:.12}"), (diag - want).abs() <= 1e-6);

    let ball = Domain::ball(Point::zeros(2), 1.0)?;
    let mut worst: f64 = 0.0;
    for x in ball.sample_interior(1000, run.scenario.seed) {
        let y = psi(&d, &x)?;
        worst = worst.max((psi_inverse(&d, &y)? - &x).norm());
    }
    run.push("Ψ round trip over 1000 samples", "<= 1e-6", format!("{worst:.3e}"), worst <= 1e-6);
    Ok(())
}

fn a_set(run: &mut GalleryRun) -> Result<()> {
    let d = run.scenario.domain.clone();
    let cert = strict_star_check(&d, &Point::zeros(2), run.scenario.params.n_dirs)?;
    let left = Direction::from_slice(&[-1.0, 0.0])?;
    let angle = cert.witness.as_ref().map(|w| w.angle_to(&left).to_degrees());
    run.push(
        "strict star check about 0",
        "StarNotStrict, witness within 1° of (-1,0)",
        format!("{:?}, witness angle {}", cert.verdict, angle.map_or("none".into(), |a| format!("{a:.3}°"))),
        cert.verdict == StarVerdict::StarNotStrict && angle.is_some_and(|a| a <= 1.0),
    );
    Ok(())
}

fn example_3_3(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let fam = sc.family.clone().expect("example-3-3 declares a family");
    let weak = check_weak(&fam, &sc.field, &sc.domain, grid)?;
    let flat = weak.margins.iter().filter(|m| matches!(m.patch_id, 1 | 5)).all(|m| m.margin.abs() <= 1e-9);
    let strict_elsewhere = weak
        .margins
        .iter()
        .filter(|m| !matches!(m.patch_id, 1 | 5))
        .all(|m| m.margin <= -tol::STRICT);
    run.push(
        "margins by patch",
        "0 ± 1e-9 on Γ1, Γ5; <= -1e-6 elsewhere",
        format!("flat on Γ1/Γ5: {flat}, strict elsewhere: {strict_elsewhere}"),
        flat && strict_elsewhere,
    );
    let worst_ok = weak.worst_margin <= 1e-9;
    run.push("weak worst margin", "<= 1e-9", format!("{:.3e}", weak.worst_margin), worst_ok);
    run.verdict("bound-weak", weak, "Certified");
    run.verdict("bound-strict", check_strict(&fam, &sc.field, &sc.domain, grid)?, "Violated");

    let mut all_fail = true;
    let mut seen = Vec::new();
    for cx in [-0.75, -0.5, -0.25] {
        for delta in [0.1, 0.05] {
            let ok = kernel_ball_check(&sc.domain, &point(&[cx, 0.0]), delta, 9, sc.params.n_dirs)?.passed();
            all_fail &= !ok;
            seen.push(format!("B[({cx},0),{delta}]: {}", if ok { "pass" } else { "fail" }));
        }
    }
    run.push("kernel ball checks", "every ball fails", seen.join("; "), all_fail);

    let v = applicability(run, grid);
    run.theorem(&v, Theorem::InwardPeriodic, false);
    run.theorem(&v, Theorem::KernelPeriodic, false);

    let origin = Point::zeros(2);
    let rep = verify_invariance(
        &sc.field,
        &sc.domain,
        Some(&fam),
        sc.params.n_initial,
        sc.horizon(),
        std::slice::from_ref(&origin),
        &IntegratorConfig::default(),
        sc.seed,
    )?;
    let w = rep.escapes.iter().find(|e| e.x0.norm() < 1e-12);
    let ok = rep.verdict == InvarianceVerdict::EscapeFound
        && w.is_some_and(|w| (w.escape.t_exit - 1.0).abs() <= 1e-3 && (&w.escape.u_exit - point(&[1.0, 0.0])).norm() <= 1e-3);
    run.push(
        "invariance",
        "EscapeFound, t_exit = 1 ± 1e-3 through (1,0)",
        match w {
            Some(w) => format!("{:?}, t_exit = {:.6} at {}", rep.verdict, w.escape.t_exit, fmt_point(&w.escape.u_exit)),
            None => format!("{:?}, no escape from the origin", rep.verdict),
        },
        ok,
    );
    run.trajectories
        .push(integrate_in(&sc.field, &sc.domain, Some(&fam), &origin, (0.0, sc.horizon()), &IntegratorConfig::default())?);
    Ok(())
}

fn g1(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let g = &sc.domain;
    let lambda = default_lambda(g);
    let o = g
        .boundary_point(&Point::zeros(2))
        .ok_or_else(|| Error::InvalidArgument("origin is not on ∂G1".into()))?;
    let (a, b) = (bony_normals(g, &o, 2000, lambda), bony_normals(g, &o, 2000, 0.5 * lambda));
    run.push(
        "Bony normals at (0,0)",
        "none at λ and λ/2",
        format!("{} at λ, {} at λ/2", a.len(), b.len()),
        a.is_empty() && b.is_empty(),
    );
    corner_cone(run, g, lambda)?;
    run.verdict("bony-all", check_bony_all(g, &sc.field, grid, sc.params.n_normals)?, "Certified");
    let rep = verify_invariance(&sc.field, g, None, sc.params.n_initial, sc.horizon(), &[], &IntegratorConfig::default(), sc.seed)?;
    run.push(
        "invariance",
        "NoEscapeObserved",
        format!("{:?} ({} interior starts)", rep.verdict, rep.n_interior),
        rep.verdict == InvarianceVerdict::NoEscapeObserved,
    );
    for x0 in [point(&[-0.3, 0.5]), point(&[0.1, 0.8]), point(&[-0.9, -0.1])] {
        run.trajectories.push(integrate(&sc.field, &x0, (0.0, sc.horizon()), &IntegratorConfig::default())?);
    }
    Ok(())
}

fn corner_cone(run: &mut GalleryRun, g: &Domain, lambda: f64) -> Result<()> {
    let c = g
        .boundary_point(&point(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]))
        .ok_or_else(|| Error::InvalidArgument("corner is not on the boundary".into()))?;
    let cone = bony_normals(g, &c, 2000, lambda);
    let e1 = Direction::from_slice(&[1.0, 0.0])?;
    let angle = cone.iter().map(|n| n.angle_to(&e1)).fold(f64::INFINITY, f64::min).to_degrees();
    run.push(
        "Bony cone at (1/√2,1/√2)",
        "nonempty, contains (1,0) within 3°",
        format!("{} normals, nearest to (1,0) at {angle:.3}°", cone.len()),
        !cone.is_empty() && angle <= 3.0,
    );
    Ok(())
}

fn g2(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let g = &sc.domain;
    let lambda = default_lambda(g);
    corner_cone(run, g, lambda)?;
    let corner = vec![g
        .boundary_point(&point(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]))
        .ok_or_else(|| Error::InvalidArgument("corner is not on the boundary".into()))?];
    let times = sc.field.time_grid(grid.n_times);
    run.verdict(
        "bony-all at the corner",
        check_bony_all_at(g, &sc.field, &corner, &times, 720, lambda),
        "Violated",
    );
    let a = PI / 6.0;
    let chosen = move |_: &crate::geometry::BoundaryPoint| Direction::from_slice(&[a.cos(), a.sin()]).ok();
    run.verdict(
        "bony-some at the corner, ν at 30°",
        check_bony_some_at(g, &sc.field, &chosen, &corner, &times, 720, lambda)?,
        "Certified",
    );
    Ok(())
}

fn rotation_disk(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let fam = sc.family.clone().expect("rotation-disk declares a family");
    run.verdict("bound-strict", check_strict(&fam, &sc.field, &sc.domain, grid)?, "Violated");
    run.verdict("bound-weak", check_weak(&fam, &sc.field, &sc.domain, grid)?, "Certified");
    let v = applicability(run, grid);
    run.theorem(&v, Theorem::InwardPeriodic, true);

    let g = sc.inward_fn().expect("rotation-disk declares an inward field");
    let eq = find_equilibrium_perturbed(&sc.field, &sc.domain, &fam, &*g, sc.params.n_max, sc.params.tol, grid)?;
    let scan = grid_zero_oracle(&sc.field, &sc.domain, sc.params.resolution)?;
    let near = scan.zeros.iter().any(|(z, _)| (z - &eq.z).norm() <= scan.cell * SQRT_2);
    run.push(
        "equilibrium",
        "Converged at (0,0), residual <= 1e-8, within one oracle cell",
        format!("{:?} at {}, residual {:.3e}", eq.status, fmt_point(&eq.z), eq.residual),
        eq.status == Status::Converged && eq.residual <= 1e-8 && near,
    );
    let opts = PeriodicOptions {
        start: Some(point(&[0.3, 0.4])),
        tol_per: sc.params.tol,
        ..Default::default()
    };
    let per = find_periodic(&sc.field, &sc.domain, Some(&fam), Scheme::Direct, Gate::Theorems(&v), &opts)?;
    run.push(
        "2π-periodic solution",
        "Converged",
        format!("{:?}, residual {:.3e}", per.status, per.residual),
        per.status == Status::Converged,
    );
    run.trajectories.push(per.trajectory);
    Ok(())
}

fn cor_3_2(run: &mut GalleryRun, grid: Grid) -> Result<()> {
    let sc = run.scenario.clone();
    let fam = sc.family.clone().expect("cor-3-2-demo declares a family");
    run.verdict("bound-weak", check_weak(&fam, &sc.field, &sc.domain, grid)?, "Certified");
    let v = applicability(run, grid);
    run.theorem(&v, Theorem::RadialSublevelPeriodic, true);
    let per = find_periodic(
        &sc.field,
        &sc.domain,
        Some(&fam),
        Scheme::default(),
        Gate::Theorems(&v),
        &PeriodicOptions {
            tol_per: sc.params.tol,
            ..Default::default()
        },
    )?;
    run.push(
        "periodic solution",
        "Converged inside the set",
        format!("{:?} at {}, residual {:.3e}", per.status, fmt_point(&per.y0), per.residual),
        per.status == Status::Converged,
    );
    run.trajectories.push(per.trajectory);
    Ok(())
}

fn linear_periodic(run: &mut GalleryRun) -> Result<()> {
    let sc = run.scenario.clone();
    let v = applicability(run, sc.grid());
    let granted = v.grants_periodic();
    run.push(
        "periodic theorem",
        "some theorem grants a periodic solution",
        granted.map_or("none".into(), |t| t.id().to_string()),
        granted.is_some(),
    );
    let gate = if granted.is_some() { Gate::Theorems(&v) } else { Gate::Forced };
    let opts = PeriodicOptions {
        tol_per: sc.params.tol,
        ..Default::default()
    };
    let per = find_periodic(&sc.field, &sc.domain, sc.family.as_ref(), Scheme::default(), gate, &opts)?;
    let exact = -2.0 * PI / (1.0 + 4.0 * PI * PI);
    run.push(
        "periodic initial value",
        "residual <= 1e-8, y0 = -2π/(1+4π²) ± 1e-6",
        format!("y0 = {:.9}, residual {:.3e}", per.y0[0], per.residual),
        per.residual <= 1e-8 && (per.y0[0] - exact).abs() <= 1e-6,
    );
    let half = integrate(&sc.field, &per.y0, (0.0, sc.field.period), &IntegratorConfig::rk4(sc.field.period / 4000.0))?;
    let r = (half.last() - &per.y0).norm();
    run.push("half-step re-integration", "residual <= 10 tol_per", format!("{r:.3e}"), r <= 10.0 * per.tol_per);
    run.trajectories.push(per.trajectory);
    Ok(())
}
