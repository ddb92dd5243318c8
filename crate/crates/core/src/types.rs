use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A state-space point. Dimension is carried at runtime (N = 1..8).
pub type Point = DVector<f64>;

pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

/// Numerical thresholds shared across modules.
pub mod tol {
    /// Half-width of the boundary band used by every membership classifier.
    pub const BOUNDARY: f64 = 1e-9;
    /// Ray scan step as a fraction of the bounding-box diameter.
    pub const RAY_STEP: f64 = 1e-4;
    /// Bisection target for ray crossings, relative to the diameter.
    pub const RAY_BISECT: f64 = 1e-13;
    /// Weak inequalities: margins above this are violations.
    pub const COND: f64 = 1e-9;
    /// Strict inequalities need at least this much negative margin.
    pub const STRICT: f64 = 1e-6;
    /// Anchor gradients below this norm are degenerate.
    pub const GRAD: f64 = 1e-6;
    /// Bony test-ball radius as a fraction of the diameter.
    pub const BONY_LAMBDA: f64 = 1e-2;
    /// Unit-norm tolerance for [`super::Direction`].
    pub const UNIT: f64 = 1e-12;
}

/// Unit vector on S^{N-1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(Point);

impl Direction {
    pub fn new(v: Point) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument("zero or non-finite direction".into()));
        }
        Ok(Direction(v / n))
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(point(v))
    }

    /// Wraps a vector that is already unit length.
    pub(crate) fn unchecked(v: Point) -> Self {
        debug_assert!((v.norm() - 1.0).abs() <= 1e-9, "not unit: {}", v.norm());
        Direction(v)
    }

    pub fn as_point(&self) -> &Point {
        &self.0
    }

    pub fn into_point(self) -> Point {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Angle to another direction in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.0.dot(&other.0).clamp(-1.0, 1.0).acos()
    }
}

/// Three-way membership with the boundary band of width `tol::BOUNDARY`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Membership {
    Interior,
    Boundary,
    Exterior,
}

impl Membership {
    pub fn classify(level: f64, eps: f64) -> Membership {
        if level.is_nan() || level > eps {
            Membership::Exterior
        } else if level < -eps {
            Membership::Interior
        } else {
            Membership::Boundary
        }
    }

    pub fn in_closure(self) -> bool {
        self != Membership::Exterior
    }
}

/// Axis-aligned box `[lo, hi]`; degenerate axes are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
}

impl BoundingBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidArgument("bounding box has lo > hi".into()));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        BoundingBox {
            lo: Point::from_element(dim, -half),
            hi: Point::from_element(dim, half),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        (&self.hi - &self.lo).norm()
    }

    pub fn center(&self) -> Point {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn contains(&self, x: &Point, slack: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }

    /// Largest distance from `p` to a corner of the box.
    pub fn max_distance_from(&self, p: &Point) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(v, (a, b))| {
                let d = (v - a).abs().max((v - b).abs());
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Affine map from the unit cube.
    pub fn from_unit(&self, s: &[f64]) -> Point {
        Point::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.lo[i] + s[i] * (self.hi[i] - self.lo[i])),
        )
    }
}

type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// A C^1 scalar field with an optional analytic gradient. Without one the
/// gradient falls back to central differences.
#[derive(Clone)]
pub struct ScalarField {
    value: ValueFn,
    gradient: Option<GradFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, x: &Point) -> Point {
        match &self.gradient {
            Some(g) => g(x),
            None => self.fd_gradient(x),
        }
    }

    /// Central differences with step `1e-6 * (1 + |x|)`.
    pub fn fd_gradient(&self, x: &Point) -> Point {
        let h = 1e-6 * (1.0 + x.norm());
        let mut g = Point::zeros(x.len());
        let mut y = x.clone();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = self.eval(&y);
            y[i] = x[i] - h;
            let fm = self.eval(&y);
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    /// Relative disagreement between the supplied gradient and central
    /// differences at `x`; zero when no analytic gradient exists.
    pub fn gradient_check(&self, x: &Point) -> f64 {
        match &self.gradient {
            None => 0.0,
            Some(g) => {
                let a = g(x);
                let fd = self.fd_gradient(x);
                (&a - &fd).norm() / (1.0 + a.norm().max(fd.norm()))
            }
        }
    }

    /// `x -> f(x) - c`.
    pub fn shifted(&self, c: f64) -> Self {
        let v = self.value.clone();
        ScalarField {
            value: Arc::new(move |x| v(x) - c),
            gradient: self.gradient.clone(),
        }
    }

    /// `x -> k * f(x)`.
    pub fn scaled(&self, k: f64) -> Self {
        let v = self.value.clone();
        let gradient = self.gradient.clone().map(|g| -> GradFn {
            Arc::new(move |x: &Point| g(x) * k)
        });
        ScalarField {
            value: Arc::new(move |x| k * v(x)),
            gradient,
        }
    }
}
