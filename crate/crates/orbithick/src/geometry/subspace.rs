use nalgebra::DMatrix;

use crate::error::{OrbiError, Result};
use crate::geometry::isometry::{lorentz_inner, Isometry, IsometryKind};
use crate::geometry::point::{from_hyperboloid, to_hyperboloid, Point};

/// A complete totally geodesic subspace of H^n, as the intersection of a
/// linear subspace of signature (dim, 1) with the hyperboloid.
///
/// `basis` is Lorentz-orthonormal: `dim` spacelike vectors followed by one
/// future-pointing timelike vector. When the subspace is vertical in the
/// half-space chart (contains the boundary point infinity) an affine
/// description `{x = anchor + span}` x R_{>0} is cached.
#[derive(Debug, Clone)]
pub struct TotallyGeodesicSubspace {
    pub dim: usize,
    pub ambient: usize,
    /// dim spacelike rows then one timelike row, each of length ambient+1.
    pub basis: Vec<Vec<f64>>,
    /// Anchor of the vertical affine description, when vertical.
    pub vertical_anchor: Option<Vec<f64>>,
    /// Horizontal spanning directions of the vertical description.
    pub vertical_span: Vec<Vec<f64>>,
}

impl TotallyGeodesicSubspace {
    /// All of H^n.
    pub fn full(n: usize) -> Self {
        let mut basis = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n + 1];
            e[i] = 1.0;
            basis.push(e);
        }
        let mut f = vec![0.0; n + 1];
        f[n] = 1.0;
        basis.push(f);
        TotallyGeodesicSubspace {
            dim: n,
            ambient: n,
            basis,
            vertical_anchor: Some(vec![0.0; n - 1]),
            vertical_span: (0..n - 1)
                .map(|i| {
                    let mut v = vec![0.0; n - 1];
                    v[i] = 1.0;
                    v
                })
                .collect(),
        }
    }

    /// A single interior point (dim 0).
    pub fn point(p: &Point) -> Self {
        let f = to_hyperboloid(p);
        TotallyGeodesicSubspace {
            dim: 0,
            ambient: p.dim(),
            basis: vec![f],
            vertical_anchor: None,
            vertical_span: vec![],
        }
    }

    /// A representative interior point of the subspace.
    pub fn anchor_point(&self) -> Point {
        let f = &self.basis[self.dim];
        from_hyperboloid(f).expect("timelike basis vector is interior")
    }

    /// Point reached from the anchor by flowing `r` in the direction of the
    /// i-th spacelike basis vector (stays on the subspace).
    pub fn geodesic_point(&self, i: usize, r: f64) -> Point {
        let f = &self.basis[self.dim];
        let e = &self.basis[i];
        let v: Vec<f64> = f
            .iter()
            .zip(e)
            .map(|(a, b)| a * r.cosh() + b * r.sinh())
            .collect();
        from_hyperboloid(&v).expect("geodesic point is interior")
    }

    pub fn is_vertical(&self) -> bool {
        self.vertical_anchor.is_some()
    }
}

/// Foot-point projection onto a totally geodesic subspace.
pub fn project_to_subspace(y: &TotallyGeodesicSubspace, p: &Point) -> Result<Point> {
    if p.dim() != y.ambient {
        return Err(OrbiError::DimensionMismatch {
            expected: y.ambient,
            got: p.dim(),
        });
    }
    if y.basis.is_empty() {
        return Err(OrbiError::InvalidArgument("degenerate basis".into()));
    }
    let v = to_hyperboloid(p);
    // Lorentz-orthogonal component in the spanned subspace.
    let mut w = vec![0.0; v.len()];
    for (k, b) in y.basis.iter().enumerate() {
        let c = lorentz_inner(&v, b);
        let sign = if k == y.dim { -1.0 } else { 1.0 }; // timelike has <f,f> = -1
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi += sign * c * bi;
        }
    }
    let q = crate::geometry::point::lorentz_norm(&w);
    if q >= -1e-300 {
        return Err(OrbiError::InvalidArgument(
            "projection degenerates (point orthogonal to subspace)".into(),
        ));
    }
    let s = (-q).sqrt();
    let w: Vec<f64> = w.iter().map(|a| a / s).collect();
    from_hyperboloid(&w)
}

/// Common fixed subspace of a family of elliptic (or identity) isometries:
/// the intersection of their eigenvalue-1 eigenspaces with the hyperboloid.
/// Returns None when the intersection misses H^n entirely.
pub fn fixed_subspace(
    gens: &[&Isometry],
    tol: &crate::config::Tolerances,
) -> Result<Option<TotallyGeodesicSubspace>> {
    if gens.is_empty() {
        return Err(OrbiError::InvalidArgument("no generators".into()));
    }
    let n = gens[0].dim();
    for g in gens {
        if g.dim() != n {
            return Err(OrbiError::DimensionMismatch {
                expected: n,
                got: g.dim(),
            });
        }
        let kind = g.kind(tol)?;
        if kind != IsometryKind::Elliptic && kind != IsometryKind::Identity {
            return Err(OrbiError::InvalidArgument(format!(
                "fixed_subspace needs elliptic generators, got {kind:?}"
            )));
        }
    }
    let nontrivial: Vec<&&Isometry> = gens.iter().filter(|g| !g.is_identity()).collect();
    if nontrivial.is_empty() {
        return Ok(Some(TotallyGeodesicSubspace::full(n)));
    }

    // Stack (L_i - I) and take the right null space.
    let rows = nontrivial.len() * (n + 1);
    let mut a = DMatrix::<f64>::zeros(rows, n + 1);
    for (gi, g) in nontrivial.iter().enumerate() {
        for i in 0..n + 1 {
            for j in 0..n + 1 {
                let e = g.mat[(i, j)] - if i == j { 1.0 } else { 0.0 };
                a[(gi * (n + 1) + i, j)] = e;
            }
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd v");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = smax.max(1.0) * 1e-9;
    let mut null: Vec<Vec<f64>> = Vec::new();
    for i in 0..n + 1 {
        let s = if i < svd.singular_values.len() {
            svd.singular_values[i]
        } else {
            0.0
        };
        if s < cutoff {
            null.push(vt.row(i).iter().cloned().collect());
        }
    }
    if null.is_empty() {
        return Ok(None);
    }

    // Diagonalize the restricted Lorentz form; signature (k, 1) means a
    // nonempty intersection of hyperbolic dimension k.
    let k = null.len();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = lorentz_inner(&null[i], &null[j]);
        }
    }
    let eig = g.symmetric_eigen();
    let mut timelike_idx = None;
    let mut min_eig = f64::MAX;
    for (i, ev) in eig.eigenvalues.iter().enumerate() {
        if *ev < min_eig {
            min_eig = *ev;
            timelike_idx = Some(i);
        }
    }
    if min_eig > -1e-9 {
        return Ok(None); // spacelike or degenerate: misses the hyperboloid
    }
    let ti = timelike_idx.unwrap();

    // Build the Lorentz-orthonormal basis from the eigenvectors of the Gram
    // matrix (they are Lorentz-orthogonal in the ambient space).
    let combine = |col: usize| -> Vec<f64> {
        let mut v = vec![0.0; n + 1];
        for (bi, b) in null.iter().enumerate() {
            let c = eig.eigenvectors[(bi, col)];
            for (vi, bv) in v.iter_mut().zip(b) {
                *vi += c * bv;
            }
        }
        v
    };
    let mut spacelike = Vec::new();
    for i in 0..k {
        if i == ti {
            continue;
        }
        let ev = eig.eigenvalues[i];
        if ev.abs() < 1e-9 {
            // Degenerate direction tangent to the light cone; drop it.
            continue;
        }
        let v = combine(i);
        let norm = ev.sqrt();
        spacelike.push(v.iter().map(|a| a / norm).collect::<Vec<f64>>());
    }
    let f = {
        let v = combine(ti);
        let norm = (-min_eig).sqrt();
        let sign = if v[n] < 0.0 { -1.0 } else { 1.0 };
        v.iter().map(|a| sign * a / norm).collect::<Vec<f64>>()
    };
    let dim = spacelike.len();
    let mut basis = spacelike;
    basis.push(f);

    // Vertical description: the subspace is vertical iff it contains the
    // lightlike direction of infinity.
    let inf = crate::geometry::point::boundary_to_lightlike(&super::BoundaryPoint::Infinity, n);
    let mut proj = vec![0.0; n + 1];
    for (bi, b) in basis.iter().enumerate() {
        let sign = if bi == dim { -1.0 } else { 1.0 };
        let c = lorentz_inner(&inf, b);
        for (pi, bv) in proj.iter_mut().zip(b) {
            *pi += sign * c * bv;
        }
    }
    let resid: f64 = inf
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let (vertical_anchor, vertical_span) = if resid < 1e-8 && dim >= 1 {
        let anchor = from_hyperboloid(&basis[dim]).ok().map(|p| p.x);
        // Horizontal directions: spacelike basis vectors whose flow keeps x
        // moving; extract from chart differences.
        let mut span = Vec::new();
        if let Some(a0) = &anchor {
            let tg = TotallyGeodesicSubspace {
                dim,
                ambient: n,
                basis: basis.clone(),
                vertical_anchor: None,
                vertical_span: vec![],
            };
            for i in 0..dim {
                let q = tg.geodesic_point(i, 0.05);
                let dx: Vec<f64> = q.x.iter().zip(a0).map(|(a, b)| a - b).collect();
                let norm: f64 = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    span.push(dx.iter().map(|v| v / norm).collect());
                }
            }
        }
        (anchor, span)
    } else {
        (None, vec![])
    };

    Ok(Some(TotallyGeodesicSubspace {
        dim,
        ambient: n,
        basis,
        vertical_anchor,
        vertical_span,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::geometry::point::dist;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn foot_point_on_vertical_axis() {
        // Project ((1), 1) onto the axis {x = 0}: the foot point is (0, sqrt 2).
        let refl = Isometry::horizontal_orthogonal(&DMatrix::from_row_slice(1, 1, &[-1.0]));
        let axis = fixed_subspace(&[&refl], &tols()).unwrap().unwrap();
        assert_eq!(axis.dim, 1);
        assert!(axis.is_vertical());
        let p = Point::new(vec![1.0], 1.0).unwrap();
        let q = project_to_subspace(&axis, &p).unwrap();
        assert!(q.x[0].abs() < 1e-9);
        assert!((q.t - 2.0f64.sqrt()).abs() < 1e-9);

        // Oracle: golden-section minimize dist over the axis.
        let mut lo = 0.1f64;
        let mut hi = 10.0f64;
        for _ in 0..200 {
            let m1 = lo + (hi - lo) * 0.382;
            let m2 = lo + (hi - lo) * 0.618;
            let d1 = dist(&p, &Point::new(vec![0.0], m1).unwrap()).unwrap();
            let d2 = dist(&p, &Point::new(vec![0.0], m2).unwrap()).unwrap();
            if d1 < d2 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        assert!((0.5 * (lo + hi) - 2.0f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn projection_is_distance_decreasing_and_idempotent() {
        let refl = Isometry::horizontal_orthogonal(&DMatrix::from_row_slice(1, 1, &[-1.0]));
        let axis = fixed_subspace(&[&refl], &tols()).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let p = Point::new(vec![rng.gen_range(-3.0..3.0)], rng.gen_range(0.2..4.0)).unwrap();
            let q = Point::new(vec![rng.gen_range(-3.0..3.0)], rng.gen_range(0.2..4.0)).unwrap();
            let pp = project_to_subspace(&axis, &p).unwrap();
            let pq = project_to_subspace(&axis, &q).unwrap();
            assert!(dist(&pp, &pq).unwrap() <= dist(&p, &q).unwrap() + 1e-9);
            // p in Y projects to itself.
            let on = Point::new(vec![0.0], rng.gen_range(0.2..4.0)).unwrap();
            let pon = project_to_subspace(&axis, &on).unwrap();
            assert!(dist(&on, &pon).unwrap() < 1e-9);
        }
    }

    #[test]
    fn projection_is_equivariant_under_stabilizing_isometries() {
        let tol = tols();
        let refl = Isometry::horizontal_orthogonal(&DMatrix::from_row_slice(1, 1, &[-1.0]));
        let axis = fixed_subspace(&[&refl], &tol).unwrap().unwrap();
        let boost = Isometry::boost(2, 0.9); // preserves the axis
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let p = Point::new(vec![rng.gen_range(-3.0..3.0)], rng.gen_range(0.2..4.0)).unwrap();
            let lhs = boost.apply(&project_to_subspace(&axis, &p).unwrap()).unwrap();
            let rhs = project_to_subspace(&axis, &boost.apply(&p).unwrap()).unwrap();
            assert!(dist(&lhs, &rhs).unwrap() < 1e-8);
        }
    }

    #[test]
    fn identity_fixes_everything() {
        let id = Isometry::identity(2);
        let full = fixed_subspace(&[&id], &tols()).unwrap().unwrap();
        assert_eq!(full.dim, 2);
    }

    #[test]
    fn two_rotations_in_h3_sharing_a_point_fix_that_point() {
        let tol = tols();
        // Rotation about the vertical axis through x = 0 and a conjugate of
        // it fixing a different geodesic through (0,0,1).
        let rot = Isometry::horizontal_orthogonal(&DMatrix::from_row_slice(
            2,
            2,
            &[-1.0, 0.0, 0.0, -1.0],
        ));
        // [[1,1],[-1,1]]/sqrt 2 fixes (0,0,1) and moves the vertical axis to
        // the half-circle from -1 to 1, so conjugating gives a different axis
        // through the same point.
        let s = Isometry::from_psl2c([1.0, 1.0, -1.0, 1.0], [0.0; 4], &tol).unwrap();
        let rot2 = s
            .compose(&rot, &tol)
            .unwrap()
            .compose(&s.inverse(&tol).unwrap(), &tol)
            .unwrap();
        let single = fixed_subspace(&[&rot], &tol).unwrap().unwrap();
        assert_eq!(single.dim, 1);
        let joint = fixed_subspace(&[&rot, &rot2], &tol).unwrap().unwrap();
        assert_eq!(joint.dim, 0);
        let p = joint.anchor_point();
        assert!(dist(&p, &Point::base(3)).unwrap() < 1e-7);
    }

    #[test]
    fn midpoint_containment_on_samples() {
        // Sampled totally-geodesic test: midpoints of contained pairs stay in.
        let refl = Isometry::horizontal_orthogonal(&DMatrix::from_row_slice(1, 1, &[-1.0]));
        let axis = fixed_subspace(&[&refl], &tols()).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let p = axis.geodesic_point(0, rng.gen_range(-2.0..2.0));
            let q = axis.geodesic_point(0, rng.gen_range(-2.0..2.0));
            let m = crate::geometry::point::midpoint(&p, &q);
            let pm = project_to_subspace(&axis, &m).unwrap();
            assert!(dist(&m, &pm).unwrap() < 1e-9);
        }
    }
}
