use serde::{Deserialize, Serialize};

use crate::error::{OrbiError, Result};

/// A point of H^n in upper half-space coordinates: horizontal part `x` of
/// length n-1 and height `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Point {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(OrbiError::InvalidArgument(format!(
                "point height must be positive and finite, got {t}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OrbiError::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Point { x, t })
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }

    /// Base point (0, ..., 0, 1).
    pub fn base(n: usize) -> Self {
        Point {
            x: vec![0.0; n - 1],
            t: 1.0,
        }
    }
}

/// A point of the boundary at infinity: a horizontal vector, or infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(Vec<f64>),
    Infinity,
}

impl BoundaryPoint {
    pub fn dim(&self, n_hint: usize) -> usize {
        match self {
            BoundaryPoint::Finite(x) => x.len() + 1,
            BoundaryPoint::Infinity => n_hint,
        }
    }
}

/// A geodesic ray from a base point to a boundary endpoint. Rays toward
/// infinity are vertical lines in the chart; `point_at` walks arclength s
/// toward the endpoint.
#[derive(Debug, Clone)]
pub struct GeodesicRay {
    pub base: Point,
    pub endpoint: BoundaryPoint,
}

impl GeodesicRay {
    /// Point at arclength `s >= 0` from the base toward the endpoint.
    /// Only vertical rays (endpoint infinity) are needed in chart
    /// coordinates; other endpoints go through a chart first.
    pub fn point_at(&self, s: f64) -> Result<Point> {
        match &self.endpoint {
            BoundaryPoint::Infinity => Point::new(self.base.x.clone(), self.base.t * s.exp()),
            BoundaryPoint::Finite(_) => Err(OrbiError::InvalidArgument(
                "point_at only supports vertical rays; re-chart first".into(),
            )),
        }
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Hyperbolic distance between two points of H^n.
///
/// Implemented via cosh d = 1 + (|x-y|^2 + (t-s)^2) / (2ts), evaluated as
/// 2 arsinh of the half-chord, which is stable for nearby points and agrees
/// with the vertical, horizontal and artanh closed forms.
pub fn dist(p: &Point, q: &Point) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(OrbiError::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(dist_unchecked(p, q))
}

pub(crate) fn dist_unchecked(p: &Point, q: &Point) -> f64 {
    let dx: f64 = p
        .x
        .iter()
        .zip(&q.x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        + (p.t - q.t) * (p.t - q.t);
    2.0 * ((dx / (4.0 * p.t * q.t)).sqrt()).asinh()
}

/// General artanh form of the distance, used for cross-checks.
pub fn dist_artanh(p: &Point, q: &Point) -> f64 {
    let dxy = p
        .x
        .iter()
        .zip(&q.x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    let num = dxy + (p.t - q.t) * (p.t - q.t);
    let den = dxy + (p.t + q.t) * (p.t + q.t);
    2.0 * ((num / den).sqrt()).atanh()
}

/// Vertical form |ln(t/s)| (same horizontal coordinate).
pub fn dist_vertical(t: f64, s: f64) -> f64 {
    (t / s).ln().abs()
}

/// Horizontal form 2 arsinh(|x-y| / 2t) (same height).
pub fn dist_horizontal(x: &[f64], y: &[f64], t: f64) -> f64 {
    let d = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    2.0 * (d / (2.0 * t)).asinh()
}

/// Hyperbolic midpoint of p and q (by chart-free bisection along the
/// geodesic, via the hyperboloid model convex combination).
pub fn midpoint(p: &Point, q: &Point) -> Point {
    let vp = to_hyperboloid(p);
    let vq = to_hyperboloid(q);
    let m: Vec<f64> = vp.iter().zip(&vq).map(|(a, b)| a + b).collect();
    let norm = lorentz_norm(&m);
    // The sum of two upper-sheet vectors is timelike.
    let scale = (-norm).sqrt();
    let mn: Vec<f64> = m.iter().map(|a| a / scale).collect();
    from_hyperboloid(&mn).expect("midpoint stays interior")
}

/// Lorentz form |u|^2 + beta^2 - tau^2 with coordinates (u, beta, tau).
pub(crate) fn lorentz_norm(v: &[f64]) -> f64 {
    let n1 = v.len() - 1;
    let mut s = 0.0;
    for vi in &v[..n1] {
        s += vi * vi;
    }
    s - v[n1] * v[n1]
}

/// Half-space to hyperboloid: (x, t) -> (x/t, (q-1)/2t, (q+1)/2t) with
/// q = |x|^2 + t^2. The Lorentz form is diag(1, ..., 1, -1).
pub(crate) fn to_hyperboloid(p: &Point) -> Vec<f64> {
    let q = sq_norm(&p.x) + p.t * p.t;
    let mut v = Vec::with_capacity(p.dim() + 1);
    for xi in &p.x {
        v.push(xi / p.t);
    }
    v.push((q - 1.0) / (2.0 * p.t));
    v.push((q + 1.0) / (2.0 * p.t));
    v
}

/// Hyperboloid to half-space; errors when the point degenerates toward the
/// boundary (tau - beta ~ 0).
pub(crate) fn from_hyperboloid(v: &[f64]) -> Result<Point> {
    let m = v.len();
    let denom = v[m - 1] - v[m - 2];
    if !(denom > 1e-300) || !denom.is_finite() {
        return Err(OrbiError::BoundaryOverflow(format!(
            "tau - beta = {denom:.3e}"
        )));
    }
    let t = 1.0 / denom;
    if !t.is_finite() {
        return Err(OrbiError::BoundaryOverflow("height overflow".into()));
    }
    let x: Vec<f64> = v[..m - 2].iter().map(|u| u * t).collect();
    Point::new(x, t)
}

/// Lightlike representative of a boundary point, on the forward cone.
pub(crate) fn boundary_to_lightlike(z: &BoundaryPoint, n: usize) -> Vec<f64> {
    match z {
        BoundaryPoint::Infinity => {
            let mut v = vec![0.0; n + 1];
            v[n - 1] = 1.0;
            v[n] = 1.0;
            v
        }
        BoundaryPoint::Finite(x) => {
            let q = sq_norm(x);
            let mut v = Vec::with_capacity(n + 1);
            v.extend_from_slice(x);
            v.push((q - 1.0) / 2.0);
            v.push((q + 1.0) / 2.0);
            v
        }
    }
}

/// Boundary point from a forward lightlike vector.
pub(crate) fn lightlike_to_boundary(v: &[f64], tol: f64) -> BoundaryPoint {
    let m = v.len();
    let denom = v[m - 1] - v[m - 2];
    // Scale-invariant test against the vector size.
    let scale = v[m - 1].abs().max(1.0);
    if denom.abs() <= tol * scale {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Finite(v[..m - 2].iter().map(|u| u / denom).collect())
    }
}
