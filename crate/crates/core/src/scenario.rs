//! TOML scenario files.
//!
//! ```toml
//! name = "spiral"
//! seed = 0
//!
//! [domain]
//! kind = "ball"
//! center = [0.0, 0.0]
//! radius = 1.0
//!
//! [field]
//! f = ["-x2 - 0.1*x1", "x1 - 0.1*x2"]
//! period = 1.0
//!
//! [bounding]
//! kind = "halfspace"
//! ```
//!
//! Expressions use `+ - * / ^`, `sin cos exp sqrt abs sign`, `t` and
//! `x1..xN`. Every semantic error points at the line of the offending key.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::bounding::BoundingFamily;
use crate::conditions::{Grid, InwardField, Problem};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flow::{Smoothness, VectorField};
use crate::geometry::{default_lambda, Domain};
use crate::types::{BoundingBox, Direction, Point};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    seed: u64,
    domain: RawDomain,
    field: RawField,
    bounding: Option<RawBounding>,
    conditions: Option<RawConditions>,
    #[serde(default)]
    params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: Spanned<String>,
    center: Option<Spanned<Vec<f64>>>,
    radius: Option<Spanned<f64>>,
    lo: Option<Spanned<Vec<f64>>>,
    hi: Option<Spanned<Vec<f64>>>,
    normals: Option<Spanned<Vec<Vec<f64>>>>,
    offsets: Option<Spanned<Vec<f64>>>,
    v: Option<Spanned<String>>,
    #[serde(default)]
    level: f64,
    /// Radial function of the unit direction `(x1, ..., xN)`.
    r: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    f: Spanned<Vec<String>>,
    period: Option<Spanned<f64>>,
    smoothness: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounding {
    kind: Spanned<String>,
    radius: Option<f64>,
    lambda: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConditions {
    normal: Option<Spanned<Vec<String>>>,
    inward: Option<Spanned<Vec<String>>>,
    chosen: Option<Spanned<Vec<String>>>,
    kernel_center: Option<Spanned<Vec<f64>>>,
    kernel_delta: Option<f64>,
}

/// Sampling and solver parameters; every key is optional.
#[derive(Clone, Debug, Deserialize, serde::Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub samples: usize,
    pub times: usize,
    pub n_initial: usize,
    pub horizon: Option<f64>,
    pub n_max: usize,
    pub resolution: usize,
    pub rho_fraction: f64,
    pub n_normals: usize,
    pub n_dirs: usize,
    pub tol: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            samples: 400,
            times: 11,
            n_initial: 100,
            horizon: None,
            n_max: 64,
            resolution: 200,
            rho_fraction: 0.5,
            n_normals: 360,
            n_dirs: 720,
            tol: None,
        }
    }
}

/// A parsed scenario: domain, field, optional family and extra condition data.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub domain_kind: String,
    pub domain: Domain,
    pub field_src: Vec<String>,
    pub field: VectorField,
    pub family_kind: Option<String>,
    pub family: Option<BoundingFamily>,
    pub normal: Option<Vec<Expr>>,
    pub inward: Option<Vec<Expr>>,
    pub chosen: Option<Vec<Expr>>,
    pub kernel: Option<(Point, f64)>,
    pub params: Params,
}

struct Ctx<'a> {
    file: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].bytes().filter(|b| *b == b'\n').count() + 1
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        Error::Scenario {
            file: self.file.to_string(),
            line: self.line(span),
            message: message.into(),
        }
    }

    fn wrap(&self, span: Range<usize>, e: Error) -> Error {
        self.err(span, e.to_string())
    }

    fn exprs(&self, v: &Spanned<Vec<String>>, dim: usize, what: &str) -> Result<Vec<Expr>> {
        if v.get_ref().len() != dim {
            return Err(self.err(
                v.span(),
                format!("{what} needs {dim} components, got {}", v.get_ref().len()),
            ));
        }
        v.get_ref()
            .iter()
            .map(|s| {
                let e = Expr::parse(s).map_err(|e| self.err(v.span(), format!("`{s}`: {e}")))?;
                if e.arity() > dim {
                    return Err(self.err(v.span(), format!("`{s}` uses x{} in dimension {dim}", e.arity())));
                }
                Ok(e)
            })
            .collect()
    }

    fn need<'b, T>(&self, v: &'b Option<Spanned<T>>, kind: &Spanned<String>, key: &str) -> Result<&'b Spanned<T>> {
        v.as_ref()
            .ok_or_else(|| self.err(kind.span(), format!("domain kind `{}` needs `{key}`", kind.get_ref())))
    }
}

fn point_of(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

fn bbox_of(cx: &Ctx, d: &RawDomain, dim: usize) -> Result<Option<BoundingBox>> {
    match (&d.lo, &d.hi) {
        (Some(lo), Some(hi)) => {
            if lo.get_ref().len() != dim || hi.get_ref().len() != dim {
                return Err(cx.err(lo.span(), format!("`lo` and `hi` need {dim} entries")));
            }
            BoundingBox::new(point_of(lo.get_ref()), point_of(hi.get_ref()))
                .map(Some)
                .map_err(|e| cx.wrap(lo.span(), e))
        }
        (None, None) => Ok(None),
        (Some(s), None) | (None, Some(s)) => Err(cx.err(s.span(), "`lo` and `hi` go together")),
    }
}

fn build_domain(cx: &Ctx, d: &RawDomain) -> Result<Domain> {
    let kind = &d.kind;
    let at = |e: Error| cx.wrap(kind.span(), e);
    match kind.get_ref().as_str() {
        "ball" => {
            let c = cx.need(&d.center, kind, "center")?;
            let r = cx.need(&d.radius, kind, "radius")?;
            Domain::ball(point_of(c.get_ref()), *r.get_ref()).map_err(|e| cx.wrap(r.span(), e))
        }
        "box" => {
            let lo = cx.need(&d.lo, kind, "lo")?;
            let bb = bbox_of(cx, d, lo.get_ref().len())?.expect("lo present");
            Domain::cuboid(bb.lo.clone(), bb.hi.clone()).map_err(at)
        }
        "halfspaces" => {
            let ns = cx.need(&d.normals, kind, "normals")?;
            let off = cx.need(&d.offsets, kind, "offsets")?;
            let dim = ns.get_ref().first().map_or(0, Vec::len);
            if dim == 0 || ns.get_ref().iter().any(|n| n.len() != dim) {
                return Err(cx.err(ns.span(), "normals must be nonempty rows of equal length"));
            }
            let bb = bbox_of(cx, d, dim)?.ok_or_else(|| cx.err(kind.span(), "halfspaces need `lo` and `hi`"))?;
            let normals = ns.get_ref().iter().map(|n| point_of(n)).collect();
            Domain::halfspaces(normals, off.get_ref().clone(), bb).map_err(|e| cx.wrap(ns.span(), e))
        }
        "sublevel" => {
            let v = cx.need(&d.v, kind, "v")?;
            let c = cx.need(&d.center, kind, "center")?;
            let dim = c.get_ref().len();
            let e = Expr::parse(v.get_ref()).map_err(|e| cx.err(v.span(), format!("`{}`: {e}", v.get_ref())))?;
            if e.uses_time() || e.arity() > dim {
                return Err(cx.err(v.span(), format!("`v` must be a function of x1..x{dim}")));
            }
            let bb = bbox_of(cx, d, dim)?.ok_or_else(|| cx.err(kind.span(), "sublevel domains need `lo` and `hi`"))?;
            Domain::sublevel(e.to_scalar_field(dim), d.level, point_of(c.get_ref()), bb)
                .map_err(|e| cx.wrap(v.span(), e))
        }
        "star-radial" => {
            let r = cx.need(&d.r, kind, "r")?;
            let c = cx.need(&d.center, kind, "center")?;
            let dim = c.get_ref().len();
            let e = Expr::parse(r.get_ref()).map_err(|e| cx.err(r.span(), format!("`{}`: {e}", r.get_ref())))?;
            if e.uses_time() || e.arity() > dim {
                return Err(cx.err(r.span(), format!("`r` must be a function of x1..x{dim}")));
            }
            let bb = bbox_of(cx, d, dim)?.ok_or_else(|| cx.err(kind.span(), "star-radial domains need `lo` and `hi`"))?;
            Domain::star_radial(point_of(c.get_ref()), move |v: &Point| e.eval(0.0, v.as_slice()), bb).map_err(at)
        }
        "d-set" => Ok(Domain::d_set()),
        "a-set" => Ok(Domain::a_set()),
        "g-ex33" => Ok(Domain::g_ex33()),
        "g1" => Ok(Domain::g1()),
        "g2" => Ok(Domain::g2()),
        "segment-c" => Ok(Domain::segment_c()),
        other => Err(cx.err(kind.span(), format!("unknown domain kind `{other}`"))),
    }
}

fn build_family(cx: &Ctx, b: &RawBounding, domain: &Domain, n_normals: usize) -> Result<BoundingFamily> {
    let kind = &b.kind;
    match kind.get_ref().as_str() {
        "sublevel" => domain
            .structure()
            .iter()
            .find_map(|s| match s {
                crate::geometry::Structure::Sublevel { v, level } => Some(BoundingFamily::sublevel(v.clone(), *level, domain)),
                _ => None,
            })
            .ok_or_else(|| cx.err(kind.span(), "`sublevel` bounding needs a sublevel domain")),
        "halfspace" => BoundingFamily::halfspace(domain).map_err(|e| cx.wrap(kind.span(), e)),
        "bony" => {
            let lambda = match &b.lambda {
                Some(l) if !(*l.get_ref() > 0.0) => return Err(cx.err(l.span(), "`lambda` must be positive")),
                Some(l) => *l.get_ref(),
                None => default_lambda(domain),
            };
            Ok(BoundingFamily::bony_auto(domain, lambda, n_normals))
        }
        "patches" => Ok(BoundingFamily::from_domain_patches(domain, b.radius.unwrap_or(0.25 * domain.diameter()))),
        other => Err(cx.err(kind.span(), format!("unknown bounding kind `{other}`"))),
    }
}

fn eval_all(es: &[Expr], x: &Point) -> Point {
    Point::from_iterator(es.len(), es.iter().map(|e| e.eval(0.0, x.as_slice())))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let src = std::fs::read_to_string(path)?;
        Scenario::parse(&src, &path.display().to_string())
    }

    /// Parses `src`; `file` labels error messages.
    pub fn parse(src: &str, file: &str) -> Result<Scenario> {
        let cx = Ctx { file, src };
        let raw: RawScenario = toml::from_str(src).map_err(|e| {
            let line = e.span().map_or(1, |s| cx.line(s));
            Error::Scenario {
                file: file.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;

        let domain = build_domain(&cx, &raw.domain)?;
        let dim = domain.dim();

        let exprs = cx.exprs(&raw.field.f, dim, "field")?;
        let smoothness = match raw.field.smoothness.as_ref().map(|s| (s.get_ref().as_str(), s.span())) {
            None | Some(("lipschitz", _)) => Smoothness::Lipschitz,
            Some(("continuous", _)) => Smoothness::ContinuousOnly,
            Some((other, span)) => {
                return Err(cx.err(span, format!("smoothness must be `lipschitz` or `continuous`, got `{other}`")))
            }
        };
        let period = match &raw.field.period {
            Some(p) if !(*p.get_ref() > 0.0) => return Err(cx.err(p.span(), "`period` must be positive")),
            Some(p) => *p.get_ref(),
            None => 1.0,
        };
        let field = VectorField::from_exprs(exprs, period, smoothness).map_err(|e| cx.wrap(raw.field.f.span(), e))?;

        let family = raw
            .bounding
            .as_ref()
            .map(|b| build_family(&cx, b, &domain, raw.params.n_normals))
            .transpose()?;

        let mut normal = None;
        let mut inward = None;
        let mut chosen = None;
        let mut kernel = None;
        if let Some(c) = &raw.conditions {
            normal = c.normal.as_ref().map(|v| cx.exprs(v, dim, "normal")).transpose()?;
            inward = c.inward.as_ref().map(|v| cx.exprs(v, dim, "inward")).transpose()?;
            chosen = c.chosen.as_ref().map(|v| cx.exprs(v, dim, "chosen")).transpose()?;
            if let Some(p) = &c.kernel_center {
                if p.get_ref().len() != dim {
                    return Err(cx.err(p.span(), format!("`kernel_center` needs {dim} entries")));
                }
                let delta = c.kernel_delta.unwrap_or(0.05 * domain.diameter());
                kernel = Some((point_of(p.get_ref()), delta));
            }
        }

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| file.to_string()),
            seed: raw.seed,
            domain_kind: raw.domain.kind.into_inner(),
            domain,
            field_src: raw.field.f.into_inner(),
            field,
            family_kind: raw.bounding.map(|b| b.kind.into_inner()),
            family,
            normal,
            inward,
            chosen,
            kernel,
            params: raw.params,
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.params.samples, self.params.times, self.seed)
    }

    /// Integration horizon: `params.horizon`, else two periods.
    pub fn horizon(&self) -> f64 {
        self.params.horizon.unwrap_or(2.0 * self.field.period)
    }

    pub fn inward_fn(&self) -> Option<InwardField> {
        self.inward.clone().map(|es| Arc::new(move |x: &Point| eval_all(&es, x)) as Arc<_>)
    }

    pub fn to_problem(&self) -> Problem {
        let mut pb = Problem::new(self.domain.clone(), self.field.clone()).with_grid(self.grid());
        pb.n_normals = self.params.n_normals;
        pb.n_dirs = self.params.n_dirs;
        if let Some(f) = &self.family {
            pb = pb.with_family(f.clone());
        }
        if let Some(es) = self.normal.clone() {
            pb = pb.with_normal(move |u| Some(eval_all(&es, &u.point)));
        }
        if let Some(es) = self.inward.clone() {
            pb = pb.with_inward(move |x| eval_all(&es, x));
        }
        if let Some(es) = self.chosen.clone() {
            pb = pb.with_chosen_normals(move |u| Direction::new(eval_all(&es, &u.point)).ok());
        }
        if let Some((p, d)) = &self.kernel {
            pb = pb.with_kernel(p.clone(), *d);
        }
        pb
    }
}
