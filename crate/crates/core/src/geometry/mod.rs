//! Compact domains, boundary sampling, star-shapedness and Bony normals.

mod bony;
mod domain;
mod shapes;
mod star;

pub use bony::{
    angular_resolution, bony_cone, bony_normals, default_lambda, is_bony_normal, outer_normals, BonyCone, ProbeProfile,
};
pub use domain::{BoundaryPatch, BoundaryPoint, Domain, LevelFn, NormalFn, PatchMap, PatchShape, Predicate, Structure};
pub use star::{
    kernel_ball_check, kernel_centers, psi, psi_inverse, radial_theta, scan_ray, star_test_directions,
    strict_star_check, sublevel_star_check, KernelCheck, RayProfile, RayShape, StarBody, StarCertificate,
    StarVerdict, SublevelStar,
};
