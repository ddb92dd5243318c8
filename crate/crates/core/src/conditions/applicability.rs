//! Which existence and invariance results a scenario's sampled facts support.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{
    check_bony_all, check_bony_some, check_convex_all, check_convex_some, check_inwardness, check_local, check_weak,
    ConditionReport, Grid, Verdict,
};
use crate::bounding::{nondegeneracy, pick_bony_normal, verify_bounding, BoundingFamily, Degeneracy, NormalMap};
use crate::flow::{Smoothness, VectorField};
use crate::geometry::{
    default_lambda, kernel_ball_check, strict_star_check, sublevel_star_check, BoundaryPoint, Domain, StarVerdict,
    Structure,
};
use crate::types::{Direction, Point, ScalarField};

pub type InwardField = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type ChosenNormals = Arc<dyn Fn(&BoundaryPoint) -> Option<Direction> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Theorem {
    /// Convex compact set, condition for every outer normal field: equilibrium.
    ConvexEquilibrium,
    /// Convex body, one normal field: weak invariance.
    ConvexWeakInvariance,
    /// Convex body, one normal field: equilibrium.
    ConvexInteriorEquilibrium,
    /// Local condition near the boundary: strong invariance.
    BoundingInvariance,
    /// Local condition, uniqueness and a ball-like closure: periodic solution.
    BoundingPeriodic,
    /// Weak boundary condition plus an inward field: periodic solution.
    InwardPeriodic,
    /// Sub-level set with non-vanishing gradient: periodic solution.
    SublevelPeriodic,
    /// Strong kernel containing a ball: periodic solution.
    KernelPeriodic,
    /// Every Bony normal: positive invariance.
    BonyInvariance,
    /// Kernel ball and one Bony normal per point: periodic solution.
    BonyKernelPeriodic,
    /// Radially decreasing sub-level set: periodic solution.
    RadialSublevelPeriodic,
}

pub const ALL_THEOREMS: [Theorem; 11] = [
    Theorem::ConvexEquilibrium,
    Theorem::ConvexWeakInvariance,
    Theorem::ConvexInteriorEquilibrium,
    Theorem::BoundingInvariance,
    Theorem::BoundingPeriodic,
    Theorem::InwardPeriodic,
    Theorem::SublevelPeriodic,
    Theorem::KernelPeriodic,
    Theorem::BonyInvariance,
    Theorem::BonyKernelPeriodic,
    Theorem::RadialSublevelPeriodic,
];

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::ConvexEquilibrium => "th-cm",
            Theorem::ConvexWeakInvariance => "th-fz",
            Theorem::ConvexInteriorEquilibrium => "th-cm1",
            Theorem::BoundingInvariance => "th-3.1",
            Theorem::BoundingPeriodic => "th-3.1(iii)",
            Theorem::InwardPeriodic => "th-main",
            Theorem::SublevelPeriodic => "cor-3.1",
            Theorem::KernelPeriodic => "th-starshaped",
            Theorem::BonyInvariance => "th-Bony",
            Theorem::BonyKernelPeriodic => "th-starshaped1",
            Theorem::RadialSublevelPeriodic => "cor-3.2",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        ALL_THEOREMS.iter().copied().find(|t| t.id() == s)
    }

    /// Results whose conclusion is a `T`-periodic solution.
    pub fn gives_periodic(self) -> bool {
        matches!(
            self,
            Theorem::BoundingPeriodic
                | Theorem::InwardPeriodic
                | Theorem::SublevelPeriodic
                | Theorem::KernelPeriodic
                | Theorem::BonyKernelPeriodic
                | Theorem::RadialSublevelPeriodic
        )
    }

    pub fn conclusion(self) -> &'static str {
        match self {
            Theorem::ConvexEquilibrium | Theorem::ConvexInteriorEquilibrium => "equilibrium in the set",
            Theorem::ConvexWeakInvariance => "weak flow invariance",
            Theorem::BoundingInvariance => "strong invariance of the open set, weak invariance of its closure",
            Theorem::BonyInvariance => "positive invariance",
            _ => "T-periodic solution in the closure",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HypothesisStatus {
    Certified,
    Failed,
    Indeterminate,
}

impl fmt::Display for HypothesisStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisStatus::Certified => f.write_str("Certified"),
            HypothesisStatus::Failed => f.write_str("Failed"),
            HypothesisStatus::Indeterminate => f.write_str("Indeterminate"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub theorem: Theorem,
    pub hypothesis: &'static str,
    pub status: HypothesisStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremVerdict {
    pub applicable: Vec<Theorem>,
    pub trace: Vec<HypothesisCheck>,
    pub notes: Vec<String>,
}

impl TheoremVerdict {
    pub fn applies(&self, t: Theorem) -> bool {
        self.applicable.contains(&t)
    }

    pub fn checks_for(&self, t: Theorem) -> impl Iterator<Item = &HypothesisCheck> {
        self.trace.iter().filter(move |c| c.theorem == t)
    }

    pub fn grants_periodic(&self) -> Option<Theorem> {
        self.applicable.iter().copied().find(|t| t.gives_periodic())
    }
}

/// Everything a scenario provides to the hypothesis checks.
#[derive(Clone)]
pub struct Problem {
    pub domain: Domain,
    pub field: VectorField,
    pub family: Option<BoundingFamily>,
    /// Outer normal field for the single-field convex condition.
    pub normal: Option<NormalMap>,
    pub inward: Option<InwardField>,
    pub chosen_normals: Option<ChosenNormals>,
    /// Kernel ball `B[p, δ]`.
    pub kernel: Option<(Point, f64)>,
    pub grid: Grid,
    /// Boundary samples for the Bony sweeps, which are costlier per point.
    pub n_bony_boundary: usize,
    pub n_normals: usize,
    pub n_dirs: usize,
    pub n_centers: usize,
}

impl Problem {
    pub fn new(domain: Domain, field: VectorField) -> Self {
        Problem {
            domain,
            field,
            family: None,
            normal: None,
            inward: None,
            chosen_normals: None,
            kernel: None,
            grid: Grid::default(),
            n_bony_boundary: 100,
            n_normals: 360,
            n_dirs: 720,
            n_centers: 16,
        }
    }

    pub fn with_family(mut self, f: BoundingFamily) -> Self {
        self.family = Some(f);
        self
    }

    pub fn with_normal(mut self, n: impl Fn(&BoundaryPoint) -> Option<Point> + Send + Sync + 'static) -> Self {
        self.normal = Some(Arc::new(n));
        self
    }

    pub fn with_inward(mut self, g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.inward = Some(Arc::new(g));
        self
    }

    pub fn with_chosen_normals(mut self, c: impl Fn(&BoundaryPoint) -> Option<Direction> + Send + Sync + 'static) -> Self {
        self.chosen_normals = Some(Arc::new(c));
        self
    }

    pub fn with_kernel(mut self, p: Point, delta: f64) -> Self {
        self.kernel = Some((p, delta));
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    /// Declared family, else one derived from the domain's structure.
    pub fn effective_family(&self) -> BoundingFamily {
        if let Some(f) = &self.family {
            return f.clone();
        }
        if let Some((v, c)) = self.sublevel() {
            return BoundingFamily::sublevel(v, c, &self.domain);
        }
        if let Ok(f) = BoundingFamily::halfspace(&self.domain) {
            return f;
        }
        BoundingFamily::from_domain_patches(&self.domain, 0.25 * self.domain.diameter())
    }

    /// Kernel center if declared, else the domain's star center.
    pub fn star_point(&self) -> Option<Point> {
        self.kernel
            .as_ref()
            .map(|k| k.0.clone())
            .or_else(|| self.domain.star_center().cloned())
    }

    /// `g(x) = p - x` about the star point unless declared.
    pub fn inward_field(&self) -> Option<InwardField> {
        self.inward.clone().or_else(|| {
            let p = self.star_point()?;
            let g: InwardField = Arc::new(move |x: &Point| &p - x);
            Some(g)
        })
    }

    pub fn sublevel(&self) -> Option<(ScalarField, f64)> {
        self.domain.structure().iter().find_map(|s| match s {
            Structure::Sublevel { v, level } => Some((v.clone(), *level)),
            _ => None,
        })
    }

    pub fn kernel_ball(&self) -> Option<(Point, f64)> {
        self.kernel
            .clone()
            .or_else(|| Some((self.domain.star_center()?.clone(), 0.05 * self.domain.diameter())))
    }
}

type Fact = (HypothesisStatus, String);

fn from_report(rep: &ConditionReport) -> Fact {
    let status = match rep.verdict {
        Verdict::Certified { .. } => HypothesisStatus::Certified,
        Verdict::Violated => HypothesisStatus::Failed,
        Verdict::Indeterminate { .. } => HypothesisStatus::Indeterminate,
    };
    (
        status,
        format!("{}: {} (worst margin {:.3e}, {} samples)", rep.kind, rep.verdict, rep.worst_margin, rep.n_samples),
    )
}

fn from_result(r: crate::Result<ConditionReport>) -> Fact {
    match r {
        Ok(rep) => from_report(&rep),
        Err(e) => (HypothesisStatus::Failed, e.to_string()),
    }
}

fn flag(ok: bool, yes: impl Into<String>, no: impl Into<String>) -> Fact {
    if ok {
        (HypothesisStatus::Certified, yes.into())
    } else {
        (HypothesisStatus::Failed, no.into())
    }
}

struct Facts {
    convex: Fact,
    interior: Fact,
    autonomous: Fact,
    lipschitz: Fact,
    ball: Fact,
    family: Fact,
    nondegenerate: Fact,
    weak: Fact,
    local: Fact,
    inward: Fact,
    kernel: Fact,
    convex_all: Fact,
    convex_some: Fact,
    bony_all: Fact,
    bony_some: Fact,
    sublevel: Fact,
    dim2: Fact,
    sublevel_nondegenerate: Fact,
    sublevel_weak: Fact,
    radial: Fact,
}

fn gather(pb: &Problem) -> Facts {
    let d = &pb.domain;
    let grid = pb.grid;
    let bony_grid = Grid {
        n_boundary: pb.n_bony_boundary,
        ..grid
    };
    let interior = d.has_interior();
    let convex = flag(d.is_convex(), "declared convex", "no convexity tag");
    let interior_fact = flag(interior, "interior point found", "empty interior");
    let autonomous = flag(pb.field.autonomous, "autonomous field", "field depends on t");
    let lipschitz = flag(
        pb.field.smoothness == Smoothness::Lipschitz,
        "field tagged locally Lipschitz",
        "field tagged continuous only",
    );

    let star = pb.star_point();
    let ball = match (&star, interior) {
        (_, false) => (HypothesisStatus::Failed, "empty interior".to_string()),
        (Some(p), true) => match strict_star_check(d, p, pb.n_dirs) {
            Ok(c) if c.verdict == StarVerdict::Strict => (
                HypothesisStatus::Certified,
                format!("strictly star-shaped about {:?} ({} rays)", p.as_slice(), c.directions_tested),
            ),
            Ok(c) => (HypothesisStatus::Indeterminate, format!("star test about {:?}: {:?}", p.as_slice(), c.verdict)),
            Err(e) => (HypothesisStatus::Indeterminate, e.to_string()),
        },
        (None, true) => (HypothesisStatus::Indeterminate, "no star center to build a radial homeomorphism".into()),
    };

    let fam = pb.effective_family();
    let family = match verify_bounding(&fam, d, grid.n_boundary.min(200), 16, grid.seed) {
        Ok(rep) => from_report(&rep),
        Err(e) => (HypothesisStatus::Failed, e.to_string()),
    };
    let nondegenerate = match nondegeneracy(&fam, d, grid.n_boundary, grid.seed) {
        Ok(r) => flag(
            r.verdict == Degeneracy::NonDegenerate,
            format!("gradient norms in [{:.3e}, {:.3e}]", r.eta_minus, r.eta_plus),
            format!("gradient norm {:.3e} at {:?}", r.eta_minus, r.worst_point.point.as_slice()),
        ),
        Err(e) => (HypothesisStatus::Failed, e.to_string()),
    };
    let weak = from_result(check_weak(&fam, &pb.field, d, grid));
    let local = from_result(check_local(&fam, &pb.field, d, 0.5, 16, Grid {
        n_boundary: grid.n_boundary.min(200),
        ..grid
    }));
    let inward = match pb.inward_field() {
        Some(g) => from_result(check_inwardness(&fam, &*g, d, grid)),
        None => (HypothesisStatus::Indeterminate, "no inward field supplied".into()),
    };
    let kernel = match (pb.kernel_ball(), interior) {
        (_, false) => (HypothesisStatus::Failed, "empty interior".into()),
        (Some((p, delta)), true) => match kernel_ball_check(d, &p, delta, pb.n_centers, pb.n_dirs) {
            Ok(k) if k.passed() => (
                HypothesisStatus::Certified,
                format!("B[{:?}, {delta}] lies in the strong kernel", p.as_slice()),
            ),
            Ok(_) => (HypothesisStatus::Failed, format!("B[{:?}, {delta}] leaves the strong kernel", p.as_slice())),
            Err(e) => (HypothesisStatus::Failed, e.to_string()),
        },
        (None, true) => (HypothesisStatus::Indeterminate, "no kernel ball declared".into()),
    };

    let convex_all = if d.is_convex() {
        from_result(check_convex_all(d, &pb.field, bony_grid, pb.n_normals))
    } else {
        (HypothesisStatus::Failed, "not convex".into())
    };
    let convex_some = match (&pb.normal, d.is_convex()) {
        (Some(n), _) => from_result(check_convex_some(d, &pb.field, &**n, grid)),
        (None, true) => from_result(check_convex_some(d, &pb.field, &|u| d.convex_normal(u).map(Direction::into_point), grid)),
        (None, false) => (HypothesisStatus::Failed, "no outer normal field".into()),
    };
    let bony_all = from_result(check_bony_all(d, &pb.field, bony_grid, pb.n_normals));
    let bony_some = match &pb.chosen_normals {
        Some(c) => from_result(check_bony_some(d, &pb.field, &**c, bony_grid, pb.n_normals)),
        None => {
            let lambda = default_lambda(d);
            let n = pb.n_normals;
            from_result(check_bony_some(d, &pb.field, &|u| pick_bony_normal(d, u, lambda, n), bony_grid, n))
        }
    };

    let sub = pb.sublevel();
    let sublevel = flag(sub.is_some(), "sub-level set {V <= c}", "not declared as a sub-level set");
    let dim2 = flag(d.dim() >= 2, "dimension at least 2", "dimension 1");
    let (sublevel_nondegenerate, sublevel_weak, radial) = match &sub {
        None => {
            let na = (HypothesisStatus::Failed, "not a sub-level set".to_string());
            (na.clone(), na.clone(), na)
        }
        Some((v, c)) => {
            let sf = BoundingFamily::sublevel(v.clone(), *c, d);
            let nd = match nondegeneracy(&sf, d, grid.n_boundary, grid.seed) {
                Ok(r) => flag(
                    r.verdict == Degeneracy::NonDegenerate,
                    format!("|∇V| in [{:.3e}, {:.3e}] on the level set", r.eta_minus, r.eta_plus),
                    format!("∇V vanishes near {:?}", r.worst_point.point.as_slice()),
                ),
                Err(e) => (HypothesisStatus::Failed, e.to_string()),
            };
            let wk = from_result(check_weak(&sf, &pb.field, d, grid));
            let p = star.clone().unwrap_or_else(|| d.bbox().center());
            let rad = match sublevel_star_check(v, *c, &p, d.bbox(), grid.n_boundary) {
                Ok(s) => flag(
                    s.passed(),
                    format!("<∇V(u), p - u> <= {:.3e} about {:?}", s.margin(), p.as_slice()),
                    format!("radial condition fails about {:?} (margin {:.3e})", p.as_slice(), s.margin()),
                ),
                Err(e) => (HypothesisStatus::Failed, e.to_string()),
            };
            (nd, wk, rad)
        }
    };

    Facts {
        convex,
        interior: interior_fact,
        autonomous,
        lipschitz,
        ball,
        family,
        nondegenerate,
        weak,
        local,
        inward,
        kernel,
        convex_all,
        convex_some,
        bony_all,
        bony_some,
        sublevel,
        dim2,
        sublevel_nondegenerate,
        sublevel_weak,
        radial,
    }
}

/// Runs every hypothesis check once and lists the results whose whole
/// hypothesis list is certified.
pub fn theorem_applicability(pb: &Problem) -> TheoremVerdict {
    let f = gather(pb);
    let lists: Vec<(Theorem, Vec<(&'static str, &Fact)>)> = vec![
        (
            Theorem::ConvexEquilibrium,
            vec![
                ("closed bounded convex set", &f.convex),
                ("autonomous field", &f.autonomous),
                ("condition for each outer normal", &f.convex_all),
            ],
        ),
        (
            Theorem::ConvexWeakInvariance,
            vec![
                ("convex set", &f.convex),
                ("nonempty interior", &f.interior),
                ("condition for one outer normal field", &f.convex_some),
            ],
        ),
        (
            Theorem::ConvexInteriorEquilibrium,
            vec![
                ("convex set", &f.convex),
                ("nonempty interior", &f.interior),
                ("autonomous field", &f.autonomous),
                ("condition for one outer normal field", &f.convex_some),
            ],
        ),
        (
            Theorem::BoundingInvariance,
            vec![
                ("bounding family", &f.family),
                ("local condition near the boundary", &f.local),
            ],
        ),
        (
            Theorem::BoundingPeriodic,
            vec![
                ("bounding family", &f.family),
                ("local condition near the boundary", &f.local),
                ("closure homeomorphic to a ball", &f.ball),
                ("uniqueness of solutions", &f.lipschitz),
            ],
        ),
        (
            Theorem::InwardPeriodic,
            vec![
                ("bounding family", &f.family),
                ("non-degenerate family", &f.nondegenerate),
                ("weak boundary condition", &f.weak),
                ("inward field", &f.inward),
                ("closure homeomorphic to a ball", &f.ball),
            ],
        ),
        (
            Theorem::SublevelPeriodic,
            vec![
                ("sub-level set", &f.sublevel),
                ("compact with nonempty interior", &f.interior),
                ("gradient non-vanishing on the level set", &f.sublevel_nondegenerate),
                ("boundary condition on the level set", &f.sublevel_weak),
                ("closure homeomorphic to a ball", &f.ball),
            ],
        ),
        (
            Theorem::KernelPeriodic,
            vec![
                ("bounding family", &f.family),
                ("non-degenerate family", &f.nondegenerate),
                ("ball in the strong kernel", &f.kernel),
                ("weak boundary condition", &f.weak),
            ],
        ),
        (
            Theorem::BonyInvariance,
            vec![
                ("locally Lipschitz in x", &f.lipschitz),
                ("condition for every Bony normal", &f.bony_all),
            ],
        ),
        (
            Theorem::BonyKernelPeriodic,
            vec![
                ("ball in the strong kernel", &f.kernel),
                ("condition for one Bony normal per point", &f.bony_some),
            ],
        ),
        (
            Theorem::RadialSublevelPeriodic,
            vec![
                ("sub-level set", &f.sublevel),
                ("dimension at least 2", &f.dim2),
                ("bounded level set around p", &f.radial),
                ("boundary condition on the level set", &f.sublevel_weak),
                ("radial condition", &f.radial),
            ],
        ),
    ];

    let mut applicable = Vec::new();
    let mut trace = Vec::new();
    for (theorem, hyps) in lists {
        let mut all = true;
        for (hypothesis, (status, detail)) in hyps {
            all &= *status == HypothesisStatus::Certified;
            trace.push(HypothesisCheck {
                theorem,
                hypothesis,
                status: *status,
                detail: detail.clone(),
            });
        }
        if all {
            applicable.push(theorem);
        }
    }

    let mut notes = Vec::new();
    if f.convex.0 == HypothesisStatus::Certified
        && f.convex_some.0 == HypothesisStatus::Certified
        && f.interior.0 != HypothesisStatus::Certified
    {
        notes.push("one-normal condition holds but the interior is empty: no existence conclusion".into());
    }
    if let Some(s) = pb.field.smoothness.scope_note() {
        notes.push(s.into());
    }
    TheoremVerdict {
        applicable,
        trace,
        notes,
    }
}
