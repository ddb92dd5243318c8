use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use invflow::conditions::{
    check_bony_all, check_bony_some, check_convex_all, check_convex_some, check_inwardness, check_local, check_strict,
    check_weak, theorem_applicability, ConditionKind, ConditionReport, Problem,
};
use invflow::flow::{verify_invariance, IntegratorConfig, InvarianceVerdict};
use invflow::gallery::{self, Density, GALLERY_IDS};
use invflow::geometry::{bony_cone, default_lambda, kernel_ball_check, strict_star_check, StarVerdict};
use invflow::report::{phase_svg, write_margins_csv, Report};
use invflow::scenario::Scenario;
use invflow::solve::{find_equilibrium_perturbed, find_periodic, Gate, PeriodicOptions, Scheme, Status};
use invflow::{Direction, Point};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] invflow::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

#[derive(Parser, Debug)]
#[command(name = "invflow", version, about = "Flow invariance, equilibria and periodic orbits on sampled domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Boundary samples per check.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Time-grid points per period.
    #[arg(long, global = true)]
    times: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver tolerance (tol_eq or tol_per).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for report.txt, margins.csv, trajectory_<k>.csv and phase.svg.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    format: Format,
    /// Run the periodic solver even if no theorem grants it.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Boundary conditions and theorem applicability.
    Check {
        /// Scenario file or gallery id.
        target: String,
        /// Condition kinds, e.g. bound-weak,bony-all. Defaults depend on the scenario.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
    },
    /// Strict star-shapedness and the θ table.
    Star {
        target: String,
        /// Center, comma separated; defaults to the declared star center.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Vec<f64>,
    },
    /// Bony normal cones at boundary samples.
    Bony { target: String },
    /// Trajectory sweep looking for escapes.
    Invariance { target: String },
    /// Perturbation schedule toward a zero of f.
    Equilibrium { target: String },
    /// Fixed point of the period map.
    Periodic { target: String },
    /// Runs a gallery entry and compares with its checklist; `list` prints the ids.
    Gallery { id: String },
    /// Everything in one document.
    Report { target: String },
}

struct Ctx {
    out: Option<PathBuf>,
    format: Format,
    force: bool,
    tol: Option<f64>,
}

impl Ctx {
    fn write(&self, name: &str, body: impl AsRef<[u8]>) -> Result<()> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    fn csv(&self) -> bool {
        matches!(self.format, Format::Csv | Format::Both)
    }

    fn svg(&self) -> bool {
        matches!(self.format, Format::Svg | Format::Both)
    }
}

fn load(target: &str, cli: &Cli) -> Result<Scenario> {
    let mut sc = if Path::new(target).exists() {
        Scenario::load(Path::new(target))?
    } else if GALLERY_IDS.contains(&target) {
        gallery::scenario(target)?
    } else {
        return Err(CliError::Usage(format!("`{target}` is neither a file nor a gallery id")));
    };
    if let Some(n) = cli.samples {
        sc.params.samples = n;
    }
    if let Some(n) = cli.times {
        sc.params.times = n;
    }
    if let Some(s) = cli.seed {
        sc.seed = s;
    }
    if cli.tol.is_some() {
        sc.params.tol = cli.tol;
    }
    Ok(sc)
}

fn default_kinds(sc: &Scenario) -> Vec<ConditionKind> {
    let mut kinds = Vec::new();
    if sc.family.is_some() {
        kinds.extend([ConditionKind::BoundWeak, ConditionKind::BoundStrict]);
    }
    if sc.normal.is_some() {
        kinds.push(ConditionKind::ConvexSomeNormal);
    }
    if sc.family.is_none() && sc.normal.is_none() {
        if sc.domain.is_convex() {
            kinds.push(ConditionKind::ConvexAllNormals);
        } else {
            kinds.push(ConditionKind::BonyAll);
        }
    }
    kinds
}

fn run_condition(kind: ConditionKind, pb: &Problem, sc: &Scenario) -> Result<ConditionReport> {
    let (d, f, grid) = (&pb.domain, &pb.field, pb.grid);
    let fam = pb.effective_family();
    let rep = match kind {
        ConditionKind::BoundWeak => check_weak(&fam, f, d, grid)?,
        ConditionKind::BoundStrict => check_strict(&fam, f, d, grid)?,
        ConditionKind::BoundLocal => check_local(&fam, f, d, sc.params.rho_fraction, 16, grid)?,
        ConditionKind::Inwardness => {
            let g = pb.inward_field().ok_or_else(|| CliError::Usage("inwardness needs a star center or `inward`".into()))?;
            check_inwardness(&fam, &*g, d, grid)?
        }
        ConditionKind::ConvexAllNormals => check_convex_all(d, f, grid, sc.params.n_normals)?,
        ConditionKind::ConvexSomeNormal => match &pb.normal {
            Some(n) => check_convex_some(d, f, &**n, grid)?,
            None => check_convex_some(d, f, &|u| d.convex_normal(u).map(Direction::into_point), grid)?,
        },
        ConditionKind::BonyAll => check_bony_all(d, f, grid, sc.params.n_normals)?,
        ConditionKind::BonySome => match &pb.chosen_normals {
            Some(c) => check_bony_some(d, f, &**c, grid, sc.params.n_normals)?,
            None => return Err(CliError::Usage("bony-some needs `chosen` normals in the scenario".into())),
        },
        ConditionKind::Bounding => invflow::bounding::verify_bounding(&fam, d, grid.n_boundary, 16, grid.seed)?,
    };
    Ok(rep)
}

fn check(sc: &Scenario, kinds: &[String], ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let kinds = if kinds.is_empty() {
        default_kinds(sc)
    } else {
        kinds
            .iter()
            .map(|k| ConditionKind::parse(k).ok_or_else(|| CliError::Usage(format!("unknown condition kind `{k}`"))))
            .collect::<Result<Vec<_>>>()?
    };
    let pb = sc.to_problem();
    let mut reports = Vec::new();
    let mut violated = false;
    for k in kinds {
        let rep = run_condition(k, &pb, sc)?;
        println!("{:<14} {:<45} worst {:.3e}", k.label(), rep.verdict.to_string(), rep.worst_margin);
        violated |= rep.verdict.is_violated();
        doc.condition(&rep);
        reports.push(rep);
    }
    let v = theorem_applicability(&pb);
    let ids: Vec<&str> = v.applicable.iter().map(|t| t.id()).collect();
    println!("applicable: {}", if ids.is_empty() { "none".into() } else { ids.join(", ") });
    for n in &v.notes {
        println!("note: {n}");
    }
    doc.applicability(&v);
    if ctx.csv() {
        let mut buf = Vec::new();
        write_margins_csv(&reports, &mut buf)?;
        ctx.write("margins.csv", buf)?;
    }
    Ok(!violated)
}

fn star(sc: &Scenario, center: &[f64], ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let p = if center.is_empty() {
        sc.to_problem()
            .star_point()
            .ok_or_else(|| CliError::Usage("no star center declared; pass --center".into()))?
    } else {
        Point::from_column_slice(center)
    };
    let cert = strict_star_check(&sc.domain, &p, sc.params.n_dirs)?;
    let mut lines = vec![
        format!("center: {:?}", p.as_slice()),
        format!("verdict: {:?} ({} rays)", cert.verdict, cert.directions_tested),
    ];
    if let Some(w) = &cert.witness {
        lines.push(format!("witness direction: {:?}", w.as_point().as_slice()));
    }
    let mut ok = cert.verdict == StarVerdict::Strict;
    if let Some((kp, delta)) = &sc.kernel {
        let k = kernel_ball_check(&sc.domain, kp, *delta, 16, sc.params.n_dirs)?;
        lines.push(format!("kernel ball B[{:?}, {delta}]: {}", kp.as_slice(), if k.passed() { "pass" } else { "fail" }));
        ok &= k.passed();
    }
    for l in &lines {
        println!("{l}");
    }
    let mut table = String::from("direction,theta\n");
    for (d, t) in &cert.theta_table {
        let v: Vec<String> = d.as_point().iter().map(|c| format!("{c:.9}")).collect();
        table.push_str(&format!("\"{}\",{t:.12}\n", v.join(" ")));
    }
    let step = (cert.theta_table.len() / 8).max(1);
    for (d, t) in cert.theta_table.iter().step_by(step) {
        lines.push(format!("θ{:?} = {t:.9}", d.as_point().as_slice()));
    }
    doc.section("star check", lines);
    if ctx.csv() {
        ctx.write("theta.csv", table)?;
    }
    Ok(ok)
}

fn bony(sc: &Scenario, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let lambda = default_lambda(&sc.domain);
    let pts = sc.domain.sample_boundary(sc.params.samples.min(200), sc.seed)?;
    let mut table = String::from("x_1,x_2,normals,normals_half,lambda_sensitive\n");
    let mut empty = 0;
    for u in &pts {
        let cone = bony_cone(&sc.domain, u, sc.params.n_normals, lambda);
        if cone.is_empty() {
            empty += 1;
            println!("no Bony normal at {:?}", u.point.as_slice());
        }
        let coords: Vec<String> = u.point.iter().map(|v| format!("{v:.9}")).collect();
        table.push_str(&format!(
            "{},{},{},{}\n",
            coords.join(","),
            cone.normals.len(),
            cone.normals_half.len(),
            cone.lambda_sensitive
        ));
    }
    let summary = format!("{} boundary samples, λ = {lambda:.4}, {empty} without a Bony normal", pts.len());
    println!("{summary}");
    doc.section("Bony normals", vec![summary]);
    if ctx.csv() {
        ctx.write("bony.csv", table)?;
    }
    Ok(true)
}

fn invariance(sc: &Scenario, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let fam = sc.to_problem().effective_family();
    let rep = verify_invariance(
        &sc.field,
        &sc.domain,
        Some(&fam),
        sc.params.n_initial,
        sc.horizon(),
        &[],
        &IntegratorConfig::default(),
        sc.seed,
    )?;
    let mut lines = vec![
        format!("verdict: {:?}", rep.verdict),
        format!("{} interior starts, {} boundary starts, horizon {}", rep.n_interior, rep.n_boundary, rep.horizon),
    ];
    for e in rep.escapes.iter().take(10) {
        lines.push(format!(
            "escape from {:?} at t = {:.6} through {:?}",
            e.x0.as_slice(),
            e.escape.t_exit,
            e.escape.u_exit.as_slice()
        ));
    }
    if !rep.selection_escapes.is_empty() {
        lines.push(format!("{} boundary starts left the set (selection escaped)", rep.selection_escapes.len()));
    }
    if let Some(s) = rep.smoothness.scope_note() {
        lines.push(format!("note: {s}"));
    }
    for l in &lines {
        println!("{l}");
    }
    doc.section("invariance", lines);
    let cfg = IntegratorConfig::default();
    let mut trajs = Vec::new();
    for e in rep.escapes.iter().take(6) {
        trajs.push(invflow::flow::integrate_in(&sc.field, &sc.domain, Some(&fam), &e.x0, (0.0, sc.horizon()), &cfg)?);
    }
    emit_trajectories(sc, &trajs, ctx)?;
    Ok(rep.verdict == InvarianceVerdict::NoEscapeObserved)
}

fn emit_trajectories(sc: &Scenario, trajs: &[invflow::flow::Trajectory], ctx: &Ctx) -> Result<()> {
    if ctx.out.is_none() {
        return Ok(());
    }
    if ctx.csv() {
        for (k, t) in trajs.iter().enumerate() {
            let mut buf = Vec::new();
            t.write_csv(Some(&sc.domain), &mut buf)?;
            ctx.write(&format!("trajectory_{k}.csv"), buf)?;
        }
    }
    if ctx.svg() && sc.domain.dim() == 2 {
        ctx.write("phase.svg", phase_svg(&sc.domain, trajs, 480)?)?;
    }
    Ok(())
}

fn equilibrium(sc: &Scenario, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let pb = sc.to_problem();
    let g = pb
        .inward_field()
        .ok_or_else(|| CliError::Usage("equilibrium search needs `inward` or a star center".into()))?;
    let res = match find_equilibrium_perturbed(&sc.field, &sc.domain, &pb.effective_family(), &*g, sc.params.n_max, ctx.tol.or(sc.params.tol), pb.grid) {
        Ok(r) => r,
        Err(invflow::Error::NoInwardCertificate(m)) => {
            let l = format!("inward field not certified (worst margin {m:.3e})");
            println!("{l}");
            doc.section("equilibrium", vec![l]);
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let mut lines = vec![format!("{:>10}  {:>14}  z", "n", "residual")];
    for s in &res.trace {
        let n = if s.n.is_finite() { format!("{}", s.n) } else { "f".into() };
        lines.push(format!("{n:>10}  {:>14.6e}  {:?}", s.residual, s.z.as_slice()));
    }
    lines.push(format!("status: {:?}, |f(z)| = {:.3e} (tol {:.1e})", res.status, res.residual, res.tol_eq));
    lines.extend(res.notes.iter().map(|n| format!("note: {n}")));
    for l in &lines {
        println!("{l}");
    }
    doc.section("equilibrium", lines);
    Ok(res.status == Status::Converged)
}

fn periodic(sc: &Scenario, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let v;
    let gate = if ctx.force {
        Gate::Forced
    } else {
        v = theorem_applicability(&sc.to_problem());
        Gate::Theorems(&v)
    };
    let opts = PeriodicOptions {
        tol_per: ctx.tol.or(sc.params.tol),
        ..Default::default()
    };
    let res = match find_periodic(&sc.field, &sc.domain, sc.family.as_ref(), Scheme::default(), gate, &opts) {
        Ok(r) => r,
        Err(invflow::Error::NotApplicable) => {
            let l = "no periodic-orbit theorem applies; rerun with --force to search anyway".to_string();
            println!("{l}");
            doc.section("periodic", vec![l]);
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let mut lines = vec![format!("{:>12}  {:>14}  y", "1/ε", "residual")];
    for s in &res.trace {
        let n = if s.n.is_finite() { format!("{}", s.n) } else { "f".into() };
        lines.push(format!("{n:>12}  {:>14.6e}  {:?}", s.residual, s.z.as_slice()));
    }
    lines.push(format!(
        "status: {:?}, |Φ(y0) - y0| = {:.3e} (tol {:.1e}), {} evaluations",
        res.status, res.residual, res.tol_per, res.evaluations
    ));
    match res.granted_by {
        Some(t) => lines.push(format!("granted by {}", t.id())),
        None => lines.push("forced: applicability gate overridden".into()),
    }
    lines.extend(res.notes.iter().map(|n| format!("note: {n}")));
    for l in &lines {
        println!("{l}");
    }
    doc.section("periodic", lines);
    emit_trajectories(sc, std::slice::from_ref(&res.trajectory), ctx)?;
    Ok(res.status == Status::Converged)
}

fn gallery_cmd(id: &str, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    if id == "list" {
        for g in GALLERY_IDS {
            println!("{g}");
        }
        return Ok(true);
    }
    let run = gallery::run(id, Density::Base)?;
    for c in &run.checks {
        println!(
            "[{}] {}: expected {}; observed {}",
            if c.pass { "ok" } else { "FAIL" },
            c.label,
            c.expected,
            c.observed
        );
    }
    for r in &run.reports {
        doc.condition(r);
    }
    if let Some(v) = &run.applicability {
        doc.applicability(v);
    }
    doc.checklist(&run.checks);
    if ctx.csv() {
        let mut buf = Vec::new();
        write_margins_csv(&run.reports, &mut buf)?;
        ctx.write("margins.csv", buf)?;
    }
    emit_trajectories(&run.scenario, &run.trajectories, ctx)?;
    Ok(run.passed())
}

fn report(sc: &Scenario, ctx: &Ctx, doc: &mut Report) -> Result<bool> {
    let mut ok = check(sc, &[], ctx, doc)?;
    ok &= invariance(sc, ctx, doc)?;
    Ok(ok)
}

fn execute(cli: &Cli) -> Result<bool> {
    let ctx = Ctx {
        out: cli.out.clone(),
        format: cli.format,
        force: cli.force,
        tol: cli.tol,
    };
    let (title, ok, doc) = match &cli.command {
        Command::Gallery { id } => {
            if id != "list" && !GALLERY_IDS.contains(&id.as_str()) {
                return Err(invflow::Error::UnknownGallery(id.clone()).into());
            }
            let mut doc = Report::new(format!("gallery {id}"));
            let ok = gallery_cmd(id, &ctx, &mut doc)?;
            (id.clone(), ok, doc)
        }
        Command::Check { target, kinds } => with_scenario(target, cli, |sc, doc| check(sc, kinds, &ctx, doc))?,
        Command::Star { target, center } => with_scenario(target, cli, |sc, doc| star(sc, center, &ctx, doc))?,
        Command::Bony { target } => with_scenario(target, cli, |sc, doc| bony(sc, &ctx, doc))?,
        Command::Invariance { target } => with_scenario(target, cli, |sc, doc| invariance(sc, &ctx, doc))?,
        Command::Equilibrium { target } => with_scenario(target, cli, |sc, doc| equilibrium(sc, &ctx, doc))?,
        Command::Periodic { target } => with_scenario(target, cli, |sc, doc| periodic(sc, &ctx, doc))?,
        Command::Report { target } => with_scenario(target, cli, |sc, doc| report(sc, &ctx, doc))?,
    };
    if let Some(dir) = &ctx.out {
        ctx.write("report.txt", doc.render())?;
        eprintln!("wrote artifacts for {title} to {}", dir.display());
    }
    Ok(ok)
}

fn with_scenario(
    target: &str,
    cli: &Cli,
    f: impl FnOnce(&Scenario, &mut Report) -> Result<bool>,
) -> Result<(String, bool, Report)> {
    let sc = load(target, cli)?;
    let mut doc = Report::new(format!("scenario {}", sc.name));
    doc.section(
        "scenario",
        vec![
            format!("domain: {}", sc.domain_kind),
            format!("field: [{}], period {}", sc.field_src.join(", "), sc.field.period),
            format!("bounding: {}", sc.family_kind.as_deref().unwrap_or("default")),
            format!("seed: {}", sc.seed),
        ],
    );
    let ok = f(&sc, &mut doc)?;
    Ok((sc.name.clone(), ok, doc))
}

fn init_threads() {
    if let Some(n) = std::env::var("INVFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_threads();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use invflow::conditions::Grid;

    #[test]
    fn parses_global_flags_after_command() {
        let cli = Cli::try_parse_from(["invflow", "check", "g1", "--samples", "50", "--format", "csv", "--force"]).unwrap();
        assert_eq!(cli.samples, Some(50));
        assert_eq!(cli.format, Format::Csv);
        assert!(cli.force);
    }

    #[test]
    fn default_kinds_follow_the_scenario() {
        let sc = gallery::scenario("g1").unwrap();
        assert_eq!(default_kinds(&sc), vec![ConditionKind::BonyAll]);
        let sc = gallery::scenario("rotation-disk").unwrap();
        assert_eq!(default_kinds(&sc), vec![ConditionKind::BoundWeak, ConditionKind::BoundStrict]);
    }

    #[test]
    fn grid_overrides() {
        let cli = Cli::try_parse_from(["invflow", "check", "g2", "--samples", "30", "--times", "3", "--seed", "9"]).unwrap();
        let sc = load("g2", &cli).unwrap();
        assert_eq!(sc.grid(), Grid::new(30, 3, 9));
    }
}
