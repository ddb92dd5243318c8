//! Browser bindings: star map Ψ, Bony cones and trajectories on the planar
//! gallery domains. Every export returns a JSON string.

use invflow::flow::{integrate_in, IntegratorConfig};
use invflow::gallery::{self, GALLERY_IDS};
use invflow::geometry::{bony_cone, BoundaryPoint, default_lambda, strict_star_check, StarBody, StarVerdict};
use invflow::scenario::Scenario;
use invflow::{point, Error, Membership, Point};
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Error>;

fn planar(id: &str) -> Result<Scenario> {
    let sc = gallery::scenario(id)?;
    if sc.domain.dim() != 2 {
        return Err(Error::InvalidArgument(format!("{id} is not planar")));
    }
    Ok(sc)
}

fn xy(p: &Point) -> [f64; 2] {
    [p[0], p[1]]
}

#[derive(Serialize)]
struct Outline {
    id: String,
    field: Vec<String>,
    bbox: [[f64; 2]; 2],
    boundary: Vec<[f64; 2]>,
    center: Option<[f64; 2]>,
}

pub fn planar_ids() -> Vec<&'static str> {
    GALLERY_IDS
        .iter()
        .copied()
        .filter(|id| planar(id).is_ok())
        .collect()
}

pub fn outline_json(id: &str, n: usize) -> Result<Value> {
    let sc = planar(id)?;
    let bb = sc.domain.bbox();
    let boundary = sc.domain.sample_boundary(n, sc.seed)?.iter().map(|u| xy(&u.point)).collect();
    Ok(json!(Outline {
        id: id.to_string(),
        field: sc.field_src.clone(),
        bbox: [xy(&bb.lo), xy(&bb.hi)],
        boundary,
        center: sc.to_problem().star_point().map(|p| xy(&p)),
    }))
}

/// Star test about (cx, cy) and the Ψ image of a polar grid on the unit disk.
pub fn star_json(id: &str, cx: f64, cy: f64, rings: usize, spokes: usize) -> Result<Value> {
    let sc = planar(id)?;
    let c = point(&[cx, cy]);
    if sc.domain.membership(&c) != Membership::Interior {
        return Err(Error::Exterior(vec![cx, cy]));
    }
    let cert = strict_star_check(&sc.domain, &c, 720)?;
    let theta: Vec<[f64; 3]> = cert
        .theta_table
        .iter()
        .map(|(d, t)| [d.as_point()[0], d.as_point()[1], *t])
        .collect();
    let mut curves = Vec::new();
    if cert.verdict == StarVerdict::Strict {
        let body = StarBody::with_center(&sc.domain, c.clone())?;
        let m = 180;
        for k in 1..=rings {
            let r = k as f64 / rings as f64;
            let ring = (0..=m)
                .map(|j| {
                    let a = std::f64::consts::TAU * j as f64 / m as f64;
                    body.psi(&point(&[r * a.cos(), r * a.sin()])).map(|p| xy(&p))
                })
                .collect::<Result<Vec<_>>>()?;
            curves.push(ring);
        }
        for k in 0..spokes {
            let a = std::f64::consts::TAU * k as f64 / spokes as f64;
            let spoke = (0..=20)
                .map(|j| {
                    let r = j as f64 / 20.0;
                    body.psi(&point(&[r * a.cos(), r * a.sin()])).map(|p| xy(&p))
                })
                .collect::<Result<Vec<_>>>()?;
            curves.push(spoke);
        }
    }
    Ok(json!({
        "center": [cx, cy],
        "verdict": format!("{:?}", cert.verdict),
        "witness": cert.witness.as_ref().map(|w| xy(w.as_point())),
        "theta": theta,
        "psi_curves": curves,
    }))
}

/// Bony cone at the boundary sample nearest to (x, y), with `<f(0,u), ν>`.
/// Clicks within 3% of the diameter of a corner snap to it.
pub fn bony_json(id: &str, x: f64, y: f64) -> Result<Value> {
    let sc = planar(id)?;
    let q = point(&[x, y]);
    let dist = |u: &BoundaryPoint| (&u.point - &q).norm();
    let nearest = |pts: Vec<BoundaryPoint>| pts.into_iter().min_by(|a, b| dist(a).total_cmp(&dist(b)));
    let u = match nearest(sc.domain.corners()) {
        Some(c) if dist(&c) <= 0.03 * sc.domain.diameter() => c,
        _ => nearest(sc.domain.sample_boundary(2000, sc.seed)?)
            .ok_or_else(|| Error::InvalidArgument("no boundary samples".into()))?,
    };
    let u = &u;
    let lambda = default_lambda(&sc.domain);
    let cone = bony_cone(&sc.domain, u, 360, lambda);
    let fu = sc.field.eval(0.0, &u.point);
    let normals: Vec<Value> = cone
        .normals
        .iter()
        .map(|n| json!({"nu": xy(n.as_point()), "margin": fu.dot(n.as_point())}))
        .collect();
    let worst = cone
        .normals
        .iter()
        .map(|n| fu.dot(n.as_point()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(json!({
        "point": xy(&u.point),
        "patch": u.primary_patch(),
        "field": xy(&fu),
        "lambda": lambda,
        "lambda_sensitive": cone.lambda_sensitive,
        "normals": normals,
        "worst_margin": if cone.normals.is_empty() { Value::Null } else { json!(worst) },
    }))
}

pub fn trajectory_json(id: &str, x: f64, y: f64, horizon: f64) -> Result<Value> {
    let sc = planar(id)?;
    let x0 = point(&[x, y]);
    let fam = sc.to_problem().effective_family();
    let h = if horizon > 0.0 { horizon } else { sc.horizon() };
    let tr = integrate_in(&sc.field, &sc.domain, Some(&fam), &x0, (0.0, h), &IntegratorConfig::default())?;
    let states: Vec<[f64; 2]> = tr.states.iter().map(xy).collect();
    Ok(json!({
        "times": tr.times,
        "states": states,
        "escape": tr.escape.as_ref().map(|e| json!({"t_exit": e.t_exit, "u_exit": xy(&e.u_exit), "patch": e.patch_id})),
    }))
}

fn out(r: Result<Value>) -> std::result::Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn scenario_ids() -> String {
    json!(planar_ids()).to_string()
}

#[wasm_bindgen]
pub fn outline(id: &str, n: usize) -> std::result::Result<String, JsValue> {
    out(outline_json(id, n))
}

#[wasm_bindgen]
pub fn star(id: &str, cx: f64, cy: f64, rings: usize, spokes: usize) -> std::result::Result<String, JsValue> {
    out(star_json(id, cx, cy, rings, spokes))
}

#[wasm_bindgen]
pub fn bony(id: &str, x: f64, y: f64) -> std::result::Result<String, JsValue> {
    out(bony_json(id, x, y))
}

#[wasm_bindgen]
pub fn trajectory(id: &str, x: f64, y: f64, horizon: f64) -> std::result::Result<String, JsValue> {
    out(trajectory_json(id, x, y, horizon))
}
