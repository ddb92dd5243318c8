//! Quasi-uniform point sets: sphere directions, Halton sequences and the
//! parameter maps used for boundary sampling.

use std::f64::consts::PI;

use crate::types::{Direction, Point};

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= b;
        r += f * (index % base as u64) as f64;
        index /= base as u64;
    }
    r
}

/// `k`-dimensional Halton point, skipping index 0.
pub fn halton_point(index: u64, k: usize) -> Vec<f64> {
    (0..k).map(|j| halton(index + 1, PRIMES[j % PRIMES.len()])).collect()
}

/// Maps `[0,1]^{dim-1}` onto the unit sphere in `R^dim` (equal-area for dim 3).
pub fn sphere_map(s: &[f64], dim: usize) -> Point {
    match dim {
        1 => Point::from_element(1, if s.first().copied().unwrap_or(0.0) < 0.5 { 1.0 } else { -1.0 }),
        2 => {
            let a = 2.0 * PI * s[0];
            Point::from_column_slice(&[a.cos(), a.sin()])
        }
        3 => {
            let z = 1.0 - 2.0 * s[0];
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = 2.0 * PI * s[1];
            Point::from_column_slice(&[r * a.cos(), r * a.sin(), z])
        }
        _ => {
            // hyperspherical coordinates
            let mut x = vec![0.0; dim];
            let mut sin_prod = 1.0;
            for i in 0..dim - 1 {
                let angle = if i == dim - 2 { 2.0 * PI * s[i] } else { PI * s[i] };
                x[i] = sin_prod * angle.cos();
                sin_prod *= angle.sin();
            }
            x[dim - 1] = sin_prod;
            Point::from_vec(x)
        }
    }
}

/// `n` quasi-uniform unit directions. For dim 2 these are the angles
/// `2*pi*k/n`, so the axes are included whenever `4 | n`; dim 3 uses a
/// Fibonacci lattice; higher dimensions map Halton points to the sphere.
pub fn sphere_directions(dim: usize, n: usize) -> Vec<Direction> {
    match dim {
        0 => Vec::new(),
        1 => vec![
            Direction::unchecked(Point::from_element(1, 1.0)),
            Direction::unchecked(Point::from_element(1, -1.0)),
        ],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                Direction::unchecked(Point::from_column_slice(&[a.cos(), a.sin()]))
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * i as f64;
                    Direction::unchecked(Point::from_column_slice(&[r * a.cos(), r * a.sin(), z]))
                })
                .collect()
        }
        _ => (0..n)
            .filter_map(|i| Direction::new(sphere_map(&halton_point(i as u64, dim - 1), dim)).ok())
            .collect(),
    }
}

/// Orthonormal basis of the complement of `v` (Gram-Schmidt against the
/// coordinate axes).
pub fn orthonormal_complement(v: &Direction) -> Vec<Point> {
    let dim = v.dim();
    let mut basis: Vec<Point> = vec![v.as_point().clone()];
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut e = Point::zeros(dim);
        e[i] = 1.0;
        for b in &basis {
            let c = e.dot(b);
            e -= b * c;
        }
        let n = e.norm();
        if n > 1e-8 {
            basis.push(e / n);
        }
    }
    basis.remove(0);
    basis
}

/// Rotates `v` by `angle` towards the unit vector `w` (assumed orthogonal).
pub fn tilt(v: &Direction, w: &Point, angle: f64) -> Direction {
    Direction::unchecked(v.as_point() * angle.cos() + w * angle.sin())
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base2() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
    }

    #[test]
    fn directions_are_unit() {
        for dim in 1..=5 {
            for d in sphere_directions(dim, 64) {
                assert!((d.as_point().norm() - 1.0).abs() < 1e-12, "dim {dim}");
            }
        }
    }

    #[test]
    fn planar_lattice_contains_axes() {
        let dirs = sphere_directions(2, 1000);
        let west = Direction::from_slice(&[-1.0, 0.0]).unwrap();
        assert!(dirs.iter().any(|d| d.angle_to(&west) < 1e-12));
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = Direction::from_slice(&[1.0, 2.0, -0.5]).unwrap();
        let c = orthonormal_complement(&v);
        assert_eq!(c.len(), 2);
        for b in &c {
            assert!(b.dot(v.as_point()).abs() < 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        assert!(c[0].dot(&c[1]).abs() < 1e-12);
    }

    #[test]
    fn fibonacci_covers_sphere() {
        let dirs = sphere_directions(3, 500);
        let mean: Point = dirs.iter().fold(Point::zeros(3), |a, d| a + d.as_point()) / 500.0;
        assert!(mean.norm() < 0.01);
    }
}
