//! Outer normals in the sense of an external ball touching the closure at a
//! single point.

use serde::Serialize;

use super::domain::{BoundaryPoint, Domain};
use crate::lattice::{par_map, sphere_directions, tilt};
use crate::types::{tol, Direction, Membership, Point};

/// Number of geometric radius levels between `1e-4 λ` and `2 λ`.
const RADIUS_LEVELS: usize = 64;
const RHO_MIN: f64 = 1e-4;
const MIN_PLANAR_PROBES: usize = 2048;

/// Angular spacing of `n` quasi-uniform directions on `S^{dim-1}`.
pub fn angular_resolution(dim: usize, n: usize) -> f64 {
    let n = n.max(1) as f64;
    match dim {
        0 | 1 => std::f64::consts::PI,
        2 => 2.0 * std::f64::consts::PI / n,
        d => {
            // surface area of the unit sphere
            let area = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d);
            (area / n).powf(1.0 / (d - 1) as f64)
        }
    }
}

/// `Γ(d/2)` for integer `d >= 1`.
fn gamma_half(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut k = 0.5;
        while k < d as f64 / 2.0 - 0.25 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

/// Smallest radius at which each probe ray from `u` meets the closure.
#[derive(Clone, Debug)]
pub struct ProbeProfile {
    lambda: f64,
    probes: Vec<(Direction, f64)>,
}

impl ProbeProfile {
    pub fn new(domain: &Domain, u: &Point, lambda: f64, n_probes: usize) -> Self {
        let n = domain.dim();
        let mut dirs;
        if n == 2 {
            // power-of-two lattices are nested, plus half-step offsets
            let count = n_probes.next_power_of_two().max(MIN_PLANAR_PROBES);
            dirs = sphere_directions(2, count);
            let half = std::f64::consts::PI / count as f64;
            let rot: Vec<Direction> = dirs
                .iter()
                .map(|d| tilt(d, &Point::from_column_slice(&[-d.as_point()[1], d.as_point()[0]]), half))
                .collect();
            dirs.extend(rot);
        } else {
            dirs = sphere_directions(n, n_probes);
        }
        let rho_min = RHO_MIN * lambda;
        let ratio = (2.0 * lambda / rho_min).powf(1.0 / (RADIUS_LEVELS - 1) as f64);
        let radii: Vec<f64> = (0..RADIUS_LEVELS).map(|k| rho_min * ratio.powi(k as i32)).collect();
        let probes = par_map(&dirs, |w| {
            let m = radii
                .iter()
                .copied()
                .find(|r| domain.membership(&(u + w.as_point() * *r)).in_closure())
                .unwrap_or(f64::INFINITY);
            (w.clone(), m)
        });
        ProbeProfile { lambda, probes }
    }

    /// Whether `B[u + λν, λ]` misses every probed closure point, up to a
    /// tangency slack `eps`.
    pub fn admits(&self, nu: &Direction, eps: f64) -> bool {
        self.probes.iter().all(|(w, m)| {
            let c = w.as_point().dot(nu.as_point());
            c <= 0.0 || *m >= 2.0 * self.lambda * c - eps
        })
    }
}

/// Bony normal test for a single direction at the resolution of an
/// `n`-direction sweep. Its slack is four times the one used for listing.
pub fn is_bony_normal(domain: &Domain, u: &Point, nu: &Direction, lambda: f64, n: usize) -> bool {
    let eps = 4.0 * lambda * angular_resolution(domain.dim(), n);
    domain.membership(&(u + nu.as_point() * lambda)) == Membership::Exterior
        && ProbeProfile::new(domain, u, lambda, 2 * n).admits(nu, eps)
}

pub fn default_lambda(domain: &Domain) -> f64 {
    tol::BONY_LAMBDA * domain.diameter()
}

/// Every candidate direction (out of `n_candidates` on the sphere) that is an
/// outer normal at `u` for the test-ball radius `lambda`.
pub fn bony_normals(domain: &Domain, u: &BoundaryPoint, n_candidates: usize, lambda: f64) -> Vec<Direction> {
    let profile = ProbeProfile::new(domain, &u.point, lambda, 2 * n_candidates);
    let eps = lambda * angular_resolution(domain.dim(), n_candidates);
    sphere_directions(domain.dim(), n_candidates)
        .into_iter()
        .filter(|nu| {
            domain.membership(&(&u.point + nu.as_point() * lambda)) == Membership::Exterior
                && profile.admits(nu, eps)
        })
        .collect()
}

/// [`bony_normals`], collapsed to the unit patch gradient at non-corner
/// points where a listed normal lies within two resolution steps of it.
/// On a C¹ patch the gradient is the only possible outer normal.
pub fn outer_normals(domain: &Domain, u: &BoundaryPoint, n_candidates: usize, lambda: f64) -> Vec<Direction> {
    let normals = bony_normals(domain, u, n_candidates, lambda);
    if u.is_corner() || normals.is_empty() {
        return normals;
    }
    let grad = domain
        .patch(u.patch_id)
        .and_then(|p| Direction::new(p.h.gradient(&u.point)).ok());
    let limit = 2.0 * angular_resolution(domain.dim(), n_candidates);
    match grad {
        Some(g) if normals.iter().any(|nu| nu.angle_to(&g) <= limit) => vec![g],
        _ => normals,
    }
}

/// Normal sets at `λ` and `λ/2`.
#[derive(Clone, Debug, Serialize)]
pub struct BonyCone {
    pub lambda: f64,
    #[serde(skip)]
    pub normals: Vec<Direction>,
    #[serde(skip)]
    pub normals_half: Vec<Direction>,
    pub lambda_sensitive: bool,
}

impl BonyCone {
    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Smallest angle between `v` and a normal found at `λ`.
    pub fn angle_to(&self, v: &Direction) -> Option<f64> {
        self.normals
            .iter()
            .map(|n| n.angle_to(v))
            .min_by(|a, b| a.total_cmp(b))
    }
}

pub fn bony_cone(domain: &Domain, u: &BoundaryPoint, n_candidates: usize, lambda: f64) -> BonyCone {
    let normals = bony_normals(domain, u, n_candidates, lambda);
    let normals_half = bony_normals(domain, u, n_candidates, 0.5 * lambda);
    let lambda_sensitive = normals.len() != normals_half.len()
        || normals.iter().zip(&normals_half).any(|(a, b)| a != b);
    BonyCone {
        lambda,
        normals,
        normals_half,
        lambda_sensitive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::point;

    #[test]
    fn disk_normal_is_radial() {
        let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let u = d.boundary_point(&point(&[0.6, 0.8])).unwrap();
        let n = 720;
        let normals = bony_normals(&d, &u, n, default_lambda(&d));
        assert!(!normals.is_empty());
        let radial = Direction::from_slice(&[0.6, 0.8]).unwrap();
        let tol = 2.0 * std::f64::consts::PI / n as f64;
        for nu in &normals {
            assert!(nu.angle_to(&radial) <= tol, "{}", nu.angle_to(&radial));
        }
    }

    #[test]
    fn sphere_resolution() {
        assert!((angular_resolution(3, 1) - (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((gamma_half(5) - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gamma_half(4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reentrant_corner_has_no_normal() {
        let g = Domain::g1();
        let u = g.boundary_point(&Point::zeros(2)).unwrap();
        assert!(bony_normals(&g, &u, 400, default_lambda(&g)).is_empty());
    }
}
