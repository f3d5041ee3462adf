//! Geometry of the upper half-space model of H^n.
//!
//! Points are `(x, t)` with `x` in R^{n-1} and `t > 0`. Isometries are
//! stored as Lorentz matrices on the hyperboloid model (uniform across all
//! n) and converted to the half-space action on demand. The boundary at
//! infinity is R^{n-1} together with the symbol infinity.

mod isometry;
mod point;
mod subspace;

pub use isometry::{cusp_chart, Isometry, IsometryKind};
pub use point::{
    dist, dist_artanh, dist_horizontal, dist_vertical, midpoint, BoundaryPoint, GeodesicRay,
    Point,
};
pub use subspace::{fixed_subspace, project_to_subspace, TotallyGeodesicSubspace};

/// Lorentz quadratic form on (u, beta, tau) vectors.
pub fn lorentz_norm_of(v: &[f64]) -> f64 {
    point::lorentz_norm(v)
}

/// Boundary point of a forward lightlike vector.
pub fn lightlike_to_boundary_of(v: &[f64], tol: f64) -> BoundaryPoint {
    point::lightlike_to_boundary(v, tol)
}

/// Hyperbolic volume of a ball of radius r in H^n (n = 2 or 3).
pub fn ball_volume(n: usize, r: f64) -> f64 {
    match n {
        2 => 2.0 * std::f64::consts::PI * (r.cosh() - 1.0),
        3 => std::f64::consts::PI * ((2.0 * r).sinh() - 2.0 * r),
        _ => panic!("ball_volume: only n = 2, 3 supported"),
    }
}
