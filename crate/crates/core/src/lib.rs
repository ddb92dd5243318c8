//! Numerical certification of flow invariance on compact domains.
//!
//! Domains carry an implicit classifier and boundary patches; bounding
//! families attach a local C¹ function to every boundary point; boundary
//! conditions are sampled over the boundary and a time grid. On top of that
//! sit an ODE integrator with escape detection and solvers for equilibria and
//! periodic orbits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounding;
pub mod conditions;
pub mod error;
pub mod expr;
pub mod flow;
pub mod gallery;
pub mod geometry;
pub mod lattice;
pub mod report;
pub mod scenario;
pub mod solve;
pub mod types;

pub use error::{Error, Result};
pub use types::{point, tol, BoundingBox, Direction, Membership, Point, ScalarField};
