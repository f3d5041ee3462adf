use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{OrbiError, Result};
use crate::geometry::point::{
    boundary_to_lightlike, from_hyperboloid, lightlike_to_boundary, lorentz_norm, to_hyperboloid,
    BoundaryPoint, Point,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsometryKind {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// An isometry of H^n as a Lorentz matrix on the hyperboloid model, with a
/// cached classification.
///
/// The Lorentz form is J = diag(1, ..., 1, -1) in coordinates (u, beta, tau),
/// time axis last; matrices must preserve the forward sheet. Elements built
/// from a Moebius representation carry an exact trace classification;
/// otherwise the classification is computed on first use from the matrix
/// (robust but tolerance-limited for heavy conjugates).
#[derive(Debug, Clone)]
pub struct Isometry {
    pub mat: DMatrix<f64>,
    class: std::sync::OnceLock<(IsometryKind, f64)>,
}

fn lorentz_defect(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    let mut j = DMatrix::<f64>::identity(k, k);
    j[(k - 1, k - 1)] = -1.0;
    let d = m.transpose() * &j * m - &j;
    d.amax()
}

impl Isometry {
    /// Wrap a Lorentz matrix, verifying orthogonality and time orientation,
    /// and classify it.
    pub fn from_lorentz(mat: DMatrix<f64>, tol: &crate::config::Tolerances) -> Result<Self> {
        let scale = mat.amax();
        Isometry::from_lorentz_with_scale(mat, scale, tol)
    }

    /// Like `from_lorentz`, with an explicit scale for the orthogonality
    /// test: products should pass the norm product of their factors, since
    /// cancellation can leave the backward error far above the entry size.
    pub fn from_lorentz_with_scale(
        mat: DMatrix<f64>,
        scale: f64,
        tol: &crate::config::Tolerances,
    ) -> Result<Self> {
        let k = mat.nrows();
        if k != mat.ncols() || k < 3 {
            return Err(OrbiError::InvalidArgument(format!(
                "Lorentz matrix must be square of size >= 3, got {}x{}",
                k,
                mat.ncols()
            )));
        }
        let defect = lorentz_defect(&mat);
        // Roundoff in L^T J L scales with the squared scale.
        let scale = 10.0_f64.max(scale).max(mat.amax());
        if defect > tol.tol_ortho.max(1e-12) * scale * scale {
            return Err(OrbiError::NotLorentz {
                defect,
                tol: tol.tol_ortho,
            });
        }
        if mat[(k - 1, k - 1)] <= 0.0 {
            return Err(OrbiError::NotLorentz {
                defect: mat[(k - 1, k - 1)],
                tol: 0.0,
            });
        }
        let _ = tol;
        Ok(Isometry {
            mat,
            class: std::sync::OnceLock::new(),
        })
    }

    pub(crate) fn with_class(mat: DMatrix<f64>, kind: IsometryKind, length: f64) -> Self {
        let class = std::sync::OnceLock::new();
        let _ = class.set((kind, length));
        Isometry { mat, class }
    }

    /// Cached classification: kind and translation length.
    pub fn classification(
        &self,
        tol: &crate::config::Tolerances,
    ) -> Result<(IsometryKind, f64)> {
        if let Some(c) = self.class.get() {
            return Ok(*c);
        }
        let c = classify_matrix(&self.mat, tol)?;
        let _ = self.class.set(c);
        Ok(c)
    }

    pub fn kind(&self, tol: &crate::config::Tolerances) -> Result<IsometryKind> {
        Ok(self.classification(tol)?.0)
    }

    /// Classification if it has already been computed (always present for
    /// inventory elements and the named constructors).
    pub fn cached_class(&self) -> Option<(IsometryKind, f64)> {
        self.class.get().copied()
    }

    /// Positive for hyperbolic elements, zero otherwise.
    pub fn translation_length(&self, tol: &crate::config::Tolerances) -> Result<f64> {
        Ok(self.classification(tol)?.1)
    }

    /// Ambient dimension n (matrix is (n+1) x (n+1)).
    pub fn dim(&self) -> usize {
        self.mat.nrows() - 1
    }

    pub fn identity(n: usize) -> Self {
        Isometry::with_class(
            DMatrix::identity(n + 1, n + 1),
            IsometryKind::Identity,
            0.0,
        )
    }

    /// Matrix-level identity test (no classification involved).
    pub fn is_identity(&self) -> bool {
        let k = self.mat.nrows();
        (&self.mat - DMatrix::<f64>::identity(k, k)).amax() < 1e-12
    }

    /// Group operation: self after other. The product is not classified;
    /// classification happens lazily if a caller asks for it.
    pub fn compose(&self, other: &Isometry, tol: &crate::config::Tolerances) -> Result<Isometry> {
        let scale = self.mat.amax() * other.mat.amax();
        Isometry::from_lorentz_with_scale(&self.mat * &other.mat, scale, tol)
    }

    pub fn inverse(&self, _tol: &crate::config::Tolerances) -> Result<Isometry> {
        // J L^T J is the exact Lorentz inverse; it shares the kind and the
        // translation length, so no revalidation (which would see the
        // condition-amplified defect form) is needed.
        Ok(Isometry {
            mat: lorentz_inverse(&self.mat),
            class: self.class.clone(),
        })
    }

    /// Action on a point of the half-space model.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        if p.dim() != self.dim() {
            return Err(OrbiError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        let v = to_hyperboloid(p);
        let mut w = vec![0.0; v.len()];
        for (i, wi) in w.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, vj) in v.iter().enumerate() {
                s += self.mat[(i, j)] * vj;
            }
            *wi = s;
        }
        // Renormalize to the sheet to stop drift under long words.
        let q = lorentz_norm(&w);
        if q >= 0.0 {
            return Err(OrbiError::BoundaryOverflow(format!(
                "image left the hyperboloid (norm {q:.3e})"
            )));
        }
        let s = (-q).sqrt();
        for wi in w.iter_mut() {
            *wi /= s;
        }
        from_hyperboloid(&w)
    }

    /// Action on the boundary at infinity.
    pub fn apply_boundary(&self, z: &BoundaryPoint) -> BoundaryPoint {
        let n = self.dim();
        let v = boundary_to_lightlike(z, n);
        let mut w = vec![0.0; v.len()];
        for (i, wi) in w.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, vj) in v.iter().enumerate() {
                s += self.mat[(i, j)] * vj;
            }
            *wi = s;
        }
        lightlike_to_boundary(&w, 1e-12)
    }

    /// d(p, g p). The chord route through `apply` resolves displacements
    /// near zero; for huge-entry word-ball elements whose images overflow
    /// chart coordinates, cosh d = -<g v, v> on the hyperboloid still gives
    /// the answer with error scaling like cosh d itself.
    pub fn displacement(&self, p: &Point) -> Result<f64> {
        if p.dim() != self.dim() {
            return Err(OrbiError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        if self.mat.amax() < 1e5 {
            if let Ok(q) = self.apply(p) {
                return crate::geometry::point::dist(p, &q);
            }
        }
        let v = to_hyperboloid(p);
        Ok(displacement_at(&self.mat, &v))
    }

    /// Matrix distance to another isometry, minimized over sign (projective
    /// inputs land on either sheet representative).
    pub fn mat_dist(&self, other: &Isometry) -> f64 {
        let d = (&self.mat - &other.mat).amax();
        d
    }

    /// Vertical-axis boost by hyperbolic length `s` (moves (0,1) to (0,e^s)).
    pub fn boost(n: usize, s: f64) -> Self {
        let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
        m[(n - 1, n - 1)] = s.cosh();
        m[(n - 1, n)] = s.sinh();
        m[(n, n - 1)] = s.sinh();
        m[(n, n)] = s.cosh();
        let kind = if s == 0.0 {
            IsometryKind::Identity
        } else {
            IsometryKind::Hyperbolic
        };
        Isometry::with_class(m, kind, s.abs())
    }

    /// Horizontal translation x -> x + a (parabolic fixing infinity).
    pub fn translation(a: &[f64]) -> Self {
        let n = a.len() + 1;
        let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
        let a2 = a.iter().map(|v| v * v).sum::<f64>();
        for (i, ai) in a.iter().enumerate() {
            m[(i, n - 1)] = -ai;
            m[(i, n)] = *ai;
            m[(n - 1, i)] = *ai;
            m[(n, i)] = *ai;
        }
        m[(n - 1, n - 1)] = 1.0 - a2 / 2.0;
        m[(n - 1, n)] = a2 / 2.0;
        m[(n, n - 1)] = -a2 / 2.0;
        m[(n, n)] = 1.0 + a2 / 2.0;
        let kind = if a2 == 0.0 {
            IsometryKind::Identity
        } else {
            IsometryKind::Parabolic
        };
        Isometry::with_class(m, kind, 0.0)
    }

    /// The inversion swapping 0 and infinity (beta sign flip; orientation
    /// reversing).
    pub fn inversion(n: usize) -> Self {
        let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
        m[(n - 1, n - 1)] = -1.0;
        Isometry::with_class(m, IsometryKind::Elliptic, 0.0)
    }

    /// Orthogonal action on the horizontal factor (block O(n-1) fixing the
    /// vertical axis).
    pub fn horizontal_orthogonal(o: &DMatrix<f64>) -> Self {
        let n1 = o.nrows();
        let n = n1 + 1;
        let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
        for i in 0..n1 {
            for j in 0..n1 {
                m[(i, j)] = o[(i, j)];
            }
        }
        let kind = if (o - DMatrix::<f64>::identity(n1, n1)).amax() < 1e-14 {
            IsometryKind::Identity
        } else {
            IsometryKind::Elliptic
        };
        Isometry::with_class(m, kind, 0.0)
    }

    /// Convert a real Moebius matrix [[a,b],[c,d]] (det normalized to 1)
    /// acting on the upper half-plane into the 3x3 Lorentz matrix.
    pub fn from_psl2r(m2: [f64; 4], tol: &crate::config::Tolerances) -> Result<Self> {
        let det = m2[0] * m2[3] - m2[1] * m2[2];
        if det <= 0.0 {
            return Err(OrbiError::Input(format!(
                "psl2r matrix must have positive determinant, got {det}"
            )));
        }
        let s = det.sqrt();
        let (a, b, c, d) = (m2[0] / s, m2[1] / s, m2[2] / s, m2[3] / s);
        let mut m = DMatrix::<f64>::zeros(3, 3);
        // Rows in (u, beta, tau) coordinates.
        m[(0, 0)] = a * d + b * c;
        m[(0, 1)] = a * c - b * d;
        m[(0, 2)] = a * c + b * d;
        m[(1, 0)] = a * b - c * d;
        m[(1, 1)] = (a * a - b * b - c * c + d * d) / 2.0;
        m[(1, 2)] = (a * a + b * b - c * c - d * d) / 2.0;
        m[(2, 0)] = a * b + c * d;
        m[(2, 1)] = (a * a - b * b + c * c - d * d) / 2.0;
        m[(2, 2)] = (a * a + b * b + c * c + d * d) / 2.0;
        let iso = Isometry::from_lorentz(m, tol)?;
        // The Moebius trace classifies exactly: |tr| > 2 hyperbolic,
        // |tr| < 2 elliptic, |tr| = 2 parabolic or identity.
        let amax2 = m2.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / det.sqrt();
        let ctol = 1e-12 * (1.0 + amax2);
        let t = (a + d).abs();
        let class = if (t - 2.0).abs() <= ctol {
            if iso.is_identity() {
                (IsometryKind::Identity, 0.0)
            } else {
                (IsometryKind::Parabolic, 0.0)
            }
        } else if t > 2.0 {
            (IsometryKind::Hyperbolic, 2.0 * (t / 2.0).acosh())
        } else {
            (IsometryKind::Elliptic, 0.0)
        };
        Ok(Isometry::with_class(iso.mat, class.0, class.1))
    }

    /// Convert a complex Moebius matrix (det normalized to 1) acting on H^3
    /// into the 4x4 Lorentz matrix, via the action X -> A X A* on Hermitian
    /// 2x2 matrices.
    pub fn from_psl2c(re: [f64; 4], im: [f64; 4], tol: &crate::config::Tolerances) -> Result<Self> {
        use nalgebra::Complex;
        type C = Complex<f64>;
        let a = C::new(re[0], im[0]);
        let b = C::new(re[1], im[1]);
        let c = C::new(re[2], im[2]);
        let d = C::new(re[3], im[3]);
        let det = a * d - b * c;
        if det.norm() < 1e-12 {
            return Err(OrbiError::Input("psl2c matrix is singular".into()));
        }
        let s = det.sqrt();
        let (a, b, c, d) = (a / s, b / s, c / s, d / s);

        // Hermitian basis e_k with coordinates (u1, u2, beta, tau):
        // [[p, q], [conj q, r]] with u1 = Re q, u2 = Im q,
        // beta = (p - r)/2, tau = (p + r)/2.
        let basis = [
            (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0)), // u1: p, q, r
            (C::new(0.0, 0.0), C::new(0.0, 1.0), C::new(0.0, 0.0)), // u2
            (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(-1.0, 0.0)), // beta
            (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)), // tau
        ];
        let mut m = DMatrix::<f64>::zeros(4, 4);
        for (j, (p, q, r)) in basis.iter().enumerate() {
            // X' = A X A^dagger for X = [[p, q], [conj q, r]].
            let x11 = *p;
            let x12 = *q;
            let x21 = q.conj();
            let x22 = *r;
            // A X
            let y11 = a * x11 + b * x21;
            let y12 = a * x12 + b * x22;
            let y21 = c * x11 + d * x21;
            let y22 = c * x12 + d * x22;
            // (A X) A^dagger
            let p2 = y11 * a.conj() + y12 * b.conj();
            let q2 = y11 * c.conj() + y12 * d.conj();
            let r2 = y21 * c.conj() + y22 * d.conj();
            m[(0, j)] = q2.re;
            m[(1, j)] = q2.im;
            m[(2, j)] = (p2.re - r2.re) / 2.0;
            m[(3, j)] = (p2.re + r2.re) / 2.0;
        }
        let iso = Isometry::from_lorentz(m, tol)?;
        // Complex Moebius trace: non-real traces are loxodromic; real traces
        // classify as in the real case. Real translation length from
        // 2 |Re arccosh(tr/2)| = 2 |ln |z + sqrt(z^2-1)||.
        let amax2 = re
            .iter()
            .chain(im.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            / s.norm();
        let ctol = 1e-12 * (1.0 + amax2);
        let tr = a + d;
        let class = if tr.im.abs() <= ctol {
            let t = tr.re.abs();
            if (t - 2.0).abs() <= ctol {
                if iso.is_identity() {
                    (IsometryKind::Identity, 0.0)
                } else {
                    (IsometryKind::Parabolic, 0.0)
                }
            } else if t > 2.0 {
                (IsometryKind::Hyperbolic, 2.0 * (t / 2.0).acosh())
            } else {
                (IsometryKind::Elliptic, 0.0)
            }
        } else {
            let z = tr / 2.0;
            let w = z + (z * z - C::new(1.0, 0.0)).sqrt();
            let ell = 2.0 * w.norm().ln().abs();
            (IsometryKind::Hyperbolic, ell)
        };
        Ok(Isometry::with_class(iso.mat, class.0, class.1))
    }
}

/// Classify a Lorentz matrix and compute the translation length.
///
/// Dense eigensolvers are useless here: word-ball elements can be heavy
/// conjugates whose eigenbasis condition number reaches 1e9+, and parabolic
/// matrices are defective on top of that. The decision tree below only uses
/// numerically robust primitives:
///
/// 1. finite order (matrix powers return to the identity) => elliptic;
/// 2. power iteration on g and g^{-1} finds the extreme lightlike
///    directions; a transverse pair whose midpoint axis realizes a
///    displacement matching the Rayleigh eigenvalue certifies hyperbolic,
///    with the displacement itself as the translation length;
/// 3. a non-transverse pair that g actually fixes (small relative residual)
///    is the single fixed direction of a parabolic;
/// 4. otherwise, a Cesaro average of a bounded orbit is tested as an
///    elliptic fixed point; if nothing resolves, fail loudly.
pub fn classify_matrix(
    mat: &DMatrix<f64>,
    tol: &crate::config::Tolerances,
) -> Result<(IsometryKind, f64)> {
    let k = mat.nrows();
    let id = DMatrix::<f64>::identity(k, k);
    let chord = (mat - &id).amax();
    if chord < tol.tol_id.max(1e-14) {
        return Ok((IsometryKind::Identity, 0.0));
    }
    // Nontrivial but too close to the identity to resolve the trichotomy.
    if chord < 10.0 * tol.tol_eig {
        return Err(OrbiError::UnresolvedClassification {
            detail: "element within the near-identity grey zone".into(),
            margins: vec![chord, tol.tol_id, 10.0 * tol.tol_eig],
        });
    }
    let amax = mat.amax();

    // Finite order: torsion elements come back to the identity. Powers of
    // parabolic/hyperbolic elements only grow, so no false positives.
    {
        let order_tol = 1e-7 + amax * 1e-7;
        let mut p = mat.clone();
        for _ in 1..=256 {
            p = &p * mat;
            let d = (&p - &id).amax();
            if d < order_tol {
                return Ok((IsometryKind::Elliptic, 0.0));
            }
            if p.amax() > amax.max(2.0) * 1e6 {
                break; // escaping; not elliptic of small order
            }
        }
    }

    // Extreme directions by power iteration (g^{-1} = J g^T J exactly).
    let ginv = lorentz_inverse(mat);
    let vp = power_direction(mat);
    let vm = power_direction(&ginv);
    let ray_p = rayleigh(mat, &vp);

    // Transverse lightlike pair: candidate hyperbolic axis. For parabolics
    // the two iterations converge (slowly) to the same direction and the
    // certificate below fails, so we fall through instead of guessing.
    if let (Some(wp), Some(wm)) = (future_normalize(&vp), future_normalize(&vm)) {
        let w: Vec<f64> = wp.iter().zip(&wm).map(|(a, b)| a + b).collect();
        if lorentz_norm(&w) < -1e-9 {
            let axis = normalize_timelike(&w);
            let moved = displacement_at(mat, &axis);
            if ray_p > 1.0 + tol.tol_eig && moved > tol.tol_eig {
                let cert_tol = 1e-4 * (1.0 + moved) + amax * 1e-10;
                if (moved - ray_p.ln()).abs() < cert_tol {
                    return Ok((IsometryKind::Hyperbolic, moved));
                }
            }
        }
    }

    // Parabolic or elliptic. The null space of (g - I) from an SVD is
    // backward-stable even for heavy conjugates; each singular value is the
    // residual of its vector as a fixed vector.
    let res_tol = 1e-6 + amax * 1e-9;
    let a = mat - &id;
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v requested");
    let mut fixed: Vec<Vec<f64>> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < res_tol {
            fixed.push(vt.row(i).iter().cloned().collect());
        }
    }
    if !fixed.is_empty() {
        // A timelike direction in the span is an interior fixed point;
        // verify by displacement before trusting it.
        let g = lorentz_gram(&fixed);
        let eig = g.symmetric_eigen();
        let mut min_eig = f64::MAX;
        let mut min_col = 0;
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if *ev < min_eig {
                min_eig = *ev;
                min_col = i;
            }
        }
        if min_eig < -1e-8 {
            let mut v = vec![0.0; k];
            for (bi, b) in fixed.iter().enumerate() {
                let c = eig.eigenvectors[(bi, min_col)];
                for (vi, bv) in v.iter_mut().zip(b) {
                    *vi += c * bv;
                }
            }
            if lorentz_norm(&v) < 0.0 {
                let center = normalize_timelike(&v);
                if displacement_at(mat, &center) < 1e-5 {
                    return Ok((IsometryKind::Elliptic, 0.0));
                }
            }
        }
        // Otherwise a (near-)lightlike fixed direction means parabolic.
        if fixed.iter().any(|v| lorentz_norm(v).abs() < 1e-3) {
            return Ok((IsometryKind::Parabolic, 0.0));
        }
    }

    // Elliptic of unbounded order (non-lattice input): the Cesaro average
    // of a bounded orbit is an invariant interior point.
    let mut acc = vec![0.0; k];
    let mut cur = {
        let mut v = vec![0.0; k];
        v[k - 1] = 1.0;
        v
    };
    let mut bounded = true;
    for _ in 0..2048 {
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
        let w = mat_vec(mat, &cur);
        let q = lorentz_norm(&w);
        if q >= -1e-12 || !q.is_finite() {
            bounded = false;
            break;
        }
        let s = (-q).sqrt();
        cur = w.iter().map(|a| a / s).collect();
        if cur[k - 1] > 1e6 {
            bounded = false;
            break;
        }
    }
    if bounded {
        let q = lorentz_norm(&acc);
        if q < -1e-9 {
            let center = normalize_timelike(&acc);
            if displacement_at(mat, &center) < 1e-6 {
                return Ok((IsometryKind::Elliptic, 0.0));
            }
        }
    }

    Err(OrbiError::UnresolvedClassification {
        detail: "no robust certificate for any isometry class".into(),
        margins: vec![chord, ray_p],
    })
}

fn lorentz_inverse(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let k = mat.nrows();
    let mut inv = mat.transpose();
    for i in 0..k - 1 {
        inv[(i, k - 1)] = -inv[(i, k - 1)];
        inv[(k - 1, i)] = -inv[(k - 1, i)];
    }
    inv
}

/// Dominant direction of the matrix by normalized power iteration from a
/// fixed generic start. Errors contract toward the attracting direction, so
/// this is robust even for very ill-conditioned eigenbases.
fn power_direction(mat: &DMatrix<f64>) -> Vec<f64> {
    let k = mat.nrows();
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.013 * i as f64).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let s = norm(&v);
    for a in v.iter_mut() {
        *a /= s;
    }
    for _ in 0..600 {
        let w = mat_vec(mat, &v);
        let s = norm(&w);
        if !s.is_finite() || s == 0.0 {
            break;
        }
        v = w.iter().map(|a| a / s).collect();
    }
    // Sign-normalize toward the future cone when possible.
    if v[k - 1] < 0.0 {
        for a in v.iter_mut() {
            *a = -*a;
        }
    }
    v
}

fn rayleigh(mat: &DMatrix<f64>, v: &[f64]) -> f64 {
    let w = mat_vec(mat, v);
    let num: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    num / den
}

/// Relative residual of v as a fixed vector of the matrix.
fn fixed_residual(mat: &DMatrix<f64>, v: &[f64]) -> f64 {
    let w = mat_vec(mat, v);
    let mut r = 0.0f64;
    let mut n = 0.0f64;
    for (a, b) in w.iter().zip(v) {
        r += (a - b) * (a - b);
        n += b * b;
    }
    (r / n).sqrt()
}

fn future_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let k = v.len();
    let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let tau = v[k - 1];
    if tau.abs() < 1e-9 * norm {
        return None;
    }
    Some(v.iter().map(|a| a / tau).collect())
}

/// Chord displacement of the matrix at a hyperboloid point given as a
/// normalized timelike vector, converted to hyperbolic distance.
fn displacement_at(mat: &DMatrix<f64>, v: &[f64]) -> f64 {
    let w = mat_vec(mat, v);
    let q = crate::geometry::isometry::lorentz_inner(&w, v);
    // cosh d = -<gv, v>; clamp roundoff below 1.
    let c = (-q).max(1.0);
    c.acosh()
}

fn normalize_timelike(v: &[f64]) -> Vec<f64> {
    let q = lorentz_norm(v);
    let s = (-q).sqrt();
    let sign = if v[v.len() - 1] < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|a| sign * a / s).collect()
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let k = m.nrows();
    let mut w = vec![0.0; k];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, vj) in v.iter().enumerate() {
            s += m[(i, j)] * vj;
        }
        *wi = s;
    }
    w
}

fn lorentz_gram(basis: &[Vec<f64>]) -> DMatrix<f64> {
    let k = basis.len();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = lorentz_inner(&basis[i], &basis[j]);
        }
    }
    g
}

pub(crate) fn lorentz_inner(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    let mut s = 0.0;
    for i in 0..m - 1 {
        s += a[i] * b[i];
    }
    s - a[m - 1] * b[m - 1]
}

/// A Lorentz isometry moving the boundary point z to infinity; identity when
/// z is already infinity. Built as (beta flip) o (translate z to 0); the
/// flip swaps 0 and infinity.
pub fn cusp_chart(z: &BoundaryPoint, n: usize) -> Isometry {
    match z {
        BoundaryPoint::Infinity => Isometry::identity(n),
        BoundaryPoint::Finite(x) => {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let trans = Isometry::translation(&neg);
            let flip = Isometry::inversion(n);
            // Charts are plumbing; their class is never consulted.
            Isometry::with_class(&flip.mat * &trans.mat, IsometryKind::Elliptic, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::geometry::point::dist;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn rand_point(rng: &mut ChaCha8Rng, n: usize) -> Point {
        let x: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = (rng.gen_range(-1.5..1.5) as f64).exp();
        Point::new(x, t).unwrap()
    }

    #[test]
    fn boost_classifies_hyperbolic_with_length_one() {
        let b = Isometry::boost(2, 1.0);
        let checked = Isometry::from_lorentz(b.mat.clone(), &tols()).unwrap();
        assert_eq!(checked.kind, IsometryKind::Hyperbolic);
        assert!((checked.translation_length - 1.0).abs() < 1e-9);
        // The boost moves (0,1) to (0,e).
        let p = Point::base(2);
        let q = b.apply(&p).unwrap();
        assert!(q.x[0].abs() < 1e-12);
        assert!((q.t - std::f64::consts::E).abs() < 1e-12);
        // Axis point realizes the translation length.
        assert!((b.displacement(&p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_classifies_identity() {
        let id = Isometry::from_lorentz(DMatrix::identity(3, 3), &tols()).unwrap();
        assert_eq!(id.kind, IsometryKind::Identity);
        assert_eq!(id.translation_length, 0.0);
        let p = Point::new(vec![0.3], 2.0).unwrap();
        let q = id.apply(&p).unwrap();
        assert!(dist(&p, &q).unwrap() < 1e-12);
    }

    #[test]
    fn unit_translation_is_parabolic_and_acts_euclidean() {
        // x -> x + 1 in n = 2, via the psl2r conversion of [[1,1],[0,1]].
        let t = Isometry::from_psl2r([1.0, 1.0, 0.0, 1.0], &tols()).unwrap();
        assert_eq!(t.kind, IsometryKind::Parabolic);
        let p = Point::base(2);
        let q = t.apply(&p).unwrap();
        assert!((q.x[0] - 1.0).abs() < 1e-10);
        assert!((q.t - 1.0).abs() < 1e-10);
        // Displacement sampling: no interior point with displacement 0, and
        // the closed form 2 arsinh(1/2t) holds.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = rand_point(&mut rng, 2);
            let d = t.displacement(&p).unwrap();
            let expect = 2.0 * (1.0 / (2.0 * p.t)).asinh();
            assert!((d - expect).abs() < 1e-9 * (1.0 + expect));
            assert!(d > 0.0);
        }
        // Builder agrees with the conversion.
        let t2 = Isometry::translation(&[1.0]);
        assert!(t.mat_dist(&t2) < 1e-10);
    }

    #[test]
    fn psl2r_rotation_is_elliptic() {
        // S = [[0,-1],[1,0]] has order 2 and fixes i.
        let s = Isometry::from_psl2r([0.0, -1.0, 1.0, 0.0], &tols()).unwrap();
        assert_eq!(s.kind, IsometryKind::Elliptic);
        let i = Point::base(2);
        assert!(s.displacement(&i).unwrap() < 1e-10);
        let s2 = s.compose(&s, &tols()).unwrap();
        assert_eq!(s2.kind, IsometryKind::Identity);
    }

    #[test]
    fn apply_is_isometric_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tol = tols();
        let gens = [
            Isometry::boost(3, 0.8),
            Isometry::translation(&[0.4, -0.2]),
            Isometry::inversion(3),
        ];
        for _ in 0..500 {
            let g = &gens[rng.gen_range(0..gens.len())];
            let p = rand_point(&mut rng, 3);
            let q = rand_point(&mut rng, 3);
            let d0 = dist(&p, &q).unwrap();
            let d1 = dist(&g.apply(&p).unwrap(), &g.apply(&q).unwrap()).unwrap();
            assert!((d0 - d1).abs() <= tol.tol_iso * (1.0 + d0));
        }
    }

    #[test]
    fn classification_is_conjugation_invariant() {
        let tol = tols();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let subjects = [
            Isometry::boost(2, 0.7),
            Isometry::from_psl2r([1.0, 1.0, 0.0, 1.0], &tol).unwrap(),
            Isometry::from_psl2r([0.0, -1.0, 1.0, 0.0], &tol).unwrap(),
        ];
        for _ in 0..50 {
            // Well-conditioned conjugator: translation o boost o rotation.
            let x: f64 = rng.gen_range(-2.0..2.0);
            let s: f64 = rng.gen_range(-1.0..1.0);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let trans = [1.0, x, 0.0, 1.0];
            let boost = [(s / 2.0).exp(), 0.0, 0.0, (-s / 2.0).exp()];
            let rot = [th.cos(), th.sin(), -th.sin(), th.cos()];
            let h = Isometry::from_psl2r(trans, &tol)
                .unwrap()
                .compose(&Isometry::from_psl2r(boost, &tol).unwrap(), &tol)
                .unwrap()
                .compose(&Isometry::from_psl2r(rot, &tol).unwrap(), &tol)
                .unwrap();
            let hinv = h.inverse(&tol).unwrap();
            for g in &subjects {
                let conj = h
                    .compose(g, &tol)
                    .unwrap()
                    .compose(&hinv, &tol)
                    .unwrap();
                assert_eq!(conj.kind, g.kind);
                assert!((conj.translation_length - g.translation_length).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn displacement_is_convex_along_geodesics() {
        let tol = tols();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gens = [
            Isometry::boost(2, 1.3),
            Isometry::from_psl2r([1.0, 1.0, 0.0, 1.0], &tol).unwrap(),
            Isometry::from_psl2r([0.0, -1.0, 1.0, 0.0], &tol).unwrap(),
        ];
        for _ in 0..300 {
            let g = &gens[rng.gen_range(0..gens.len())];
            let p = rand_point(&mut rng, 2);
            let q = rand_point(&mut rng, 2);
            let m = crate::geometry::point::midpoint(&p, &q);
            let dm = g.displacement(&m).unwrap();
            let avg = 0.5 * (g.displacement(&p).unwrap() + g.displacement(&q).unwrap());
            assert!(dm <= avg + 1e-9);
        }
    }

    #[test]
    fn cusp_chart_moves_z_to_infinity() {
        let tol = tols();
        // z = 0: involution; applying twice returns inputs.
        let c0 = cusp_chart(&BoundaryPoint::Finite(vec![0.0]), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let p = rand_point(&mut rng, 2);
            let q = c0.apply(&c0.apply(&p).unwrap()).unwrap();
            assert!(dist(&p, &q).unwrap() < 1e-9);
        }
        assert_eq!(
            c0.apply_boundary(&BoundaryPoint::Finite(vec![0.0])),
            BoundaryPoint::Infinity
        );

        // z = (1): points flowing toward z blow up in height in the chart.
        let z = BoundaryPoint::Finite(vec![1.0]);
        let c = cusp_chart(&z, 2);
        assert_eq!(c.apply_boundary(&z), BoundaryPoint::Infinity);
        let mut last = 0.0;
        for k in 1..6 {
            let p = Point::new(vec![1.0], 10f64.powi(-k)).unwrap();
            let img = c.apply(&p).unwrap();
            assert!(img.t > last);
            last = img.t;
        }
        let _ = tol;
    }

    #[test]
    fn psl2c_translation_acts_on_h3() {
        let tol = tols();
        // z -> z + 1 on the boundary C.
        let a = Isometry::from_psl2c([1.0, 1.0, 0.0, 1.0], [0.0; 4], &tol).unwrap();
        assert_eq!(a.kind, IsometryKind::Parabolic);
        let p = Point::base(3);
        let q = a.apply(&p).unwrap();
        assert!((q.x[0] - 1.0).abs() < 1e-10 && q.x[1].abs() < 1e-10);
        assert!((q.t - 1.0).abs() < 1e-10);
        // z -> z + i.
        let b = Isometry::from_psl2c([1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 0.0], &tol).unwrap();
        let q = b.apply(&p).unwrap();
        assert!(q.x[0].abs() < 1e-10 && (q.x[1] - 1.0).abs() < 1e-10);
        // S = [[0,-1],[1,0]] fixes (0,0,1).
        let s = Isometry::from_psl2c([0.0, -1.0, 1.0, 0.0], [0.0; 4], &tol).unwrap();
        assert!(s.displacement(&p).unwrap() < 1e-10);
        assert_eq!(s.kind, IsometryKind::Elliptic);
    }

    #[test]
    fn grey_zone_classification_fails_loudly() {
        // A boost whose eigenvalue sits inside the grey zone.
        let eps = 3e-9;
        let b = Isometry::boost(2, eps);
        let r = Isometry::from_lorentz(b.mat.clone(), &tols());
        match r {
            Err(OrbiError::UnresolvedClassification { .. }) => {}
            other => panic!("expected unresolved classification, got {other:?}"),
        }
    }
}
