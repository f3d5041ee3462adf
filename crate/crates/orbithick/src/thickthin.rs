//! Variable-level thick-thin decomposition: per-kind levels, cusp
//! detection and charts, the thin part as a set of horoball lifts, distance
//! to the thin part, and the cusp flow.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{OrbiError, Result};
use crate::geometry::{cusp_chart, BoundaryPoint, Isometry, IsometryKind, Point};
use crate::group::{ElementInventory, LatticeSpec};

/// Levels of the decomposition: eps' for hyperbolic/parabolic elements and
/// eps'/M(n) for elliptic ones, after replacing the Margulis epsilon by its
/// minimum with nu.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelAssignment {
    pub eps_tilde: f64,
    pub eps_prime: f64,
    pub eps_elliptic: f64,
    pub margulis_m: usize,
}

/// eps' = min(eps_n, nu)/2 and eps_elliptic = eps'/M with M = 2m + 1.
pub fn levels(spec: &LatticeSpec, eps_n: f64) -> LevelAssignment {
    let eps_tilde = eps_n.min(spec.nu);
    let eps_prime = eps_tilde / 2.0;
    let m = 2 * spec.margulis_index + 1;
    LevelAssignment {
        eps_tilde,
        eps_prime,
        eps_elliptic: eps_prime / m as f64,
        margulis_m: m,
    }
}

impl LevelAssignment {
    /// Level for a given isometry kind; None for the identity.
    pub fn level_for(&self, kind: IsometryKind) -> Option<f64> {
        match kind {
            IsometryKind::Hyperbolic | IsometryKind::Parabolic => Some(self.eps_prime),
            IsometryKind::Elliptic => Some(self.eps_elliptic),
            IsometryKind::Identity => None,
        }
    }
}

/// One cusp class: its boundary fixed point, the chart normalizing it to
/// infinity, the parabolic witnesses fixing it, and their chart translation
/// vectors.
#[derive(Debug, Clone)]
pub struct CuspChartData {
    pub fixed_point: BoundaryPoint,
    pub chart: Isometry,
    pub chart_inv: Isometry,
    /// Inventory indices of parabolics fixing this cusp.
    pub parabolic_witnesses: Vec<usize>,
    /// Chart translation vector per witness.
    pub translations: Vec<Vec<f64>>,
    pub min_translation: f64,
    /// Chart height of the thin boundary: the sublevel set is {t > threshold}.
    pub threshold: f64,
}

/// Fixed boundary point of a parabolic element, via the stable null space
/// of (g - I).
pub fn parabolic_fixed_point(g: &Isometry) -> Result<BoundaryPoint> {
    let k = g.mat.nrows();
    let a = &g.mat - nalgebra::DMatrix::<f64>::identity(k, k);
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd v");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let v: Vec<f64> = vt.row(i).iter().cloned().collect();
        let q = crate::geometry::lorentz_norm_of(&v);
        // Want a fixed (small residual) and lightlike (small norm) vector.
        let score = s.abs() + q.abs();
        if best.as_ref().map_or(true, |(b, _)| score < *b) {
            best = Some((score, v));
        }
    }
    let (score, mut v) = best.ok_or_else(|| {
        OrbiError::InvalidArgument("no fixed direction found for parabolic".into())
    })?;
    if score > 1e-4 * (1.0 + g.mat.amax()) {
        return Err(OrbiError::InvalidArgument(format!(
            "parabolic fixed direction poorly resolved (score {score:.3e})"
        )));
    }
    if v[k - 1] < 0.0 {
        for a in v.iter_mut() {
            *a = -*a;
        }
    }
    Ok(crate::geometry::lightlike_to_boundary_of(&v, 1e-9))
}

fn boundary_close(a: &BoundaryPoint, b: &BoundaryPoint, tol: f64) -> bool {
    match (a, b) {
        (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
        (BoundaryPoint::Finite(x), BoundaryPoint::Finite(y)) => {
            let scale = 1.0
                + x.iter().map(|v| v * v).sum::<f64>()
                + y.iter().map(|v| v * v).sum::<f64>();
            x.iter()
                .zip(y)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
                < tol * scale
        }
        _ => false,
    }
}

/// Cluster the parabolic fixed points of the inventory into cusp classes
/// (orbit equivalence under the inventory action) and build one chart per
/// class. Witnesses must act as pure Euclidean translations in the chart;
/// anything else fails loudly.
pub fn cusp_inventory(
    inv: &ElementInventory,
    n: usize,
    lv: &LevelAssignment,
    tol: &Tolerances,
) -> Result<Vec<CuspChartData>> {
    let mut reps: Vec<BoundaryPoint> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();

    for &pi in &inv.by_kind.parabolic {
        let z = parabolic_fixed_point(&inv.elements[pi])?;
        let mut found = None;
        'search: for (ci, rep) in reps.iter().enumerate() {
            if boundary_close(&z, rep, 1e-7) {
                found = Some(ci);
                break;
            }
            for g in &inv.elements {
                let gz = g.apply_boundary(&z);
                if boundary_close(&gz, rep, 1e-7) {
                    found = Some(ci);
                    break 'search;
                }
            }
        }
        match found {
            Some(ci) => members[ci].push(pi),
            None => {
                reps.push(z);
                members.push(vec![pi]);
            }
        }
    }

    let mut out = Vec::new();
    for (ci, rep) in reps.iter().enumerate() {
        let chart = cusp_chart(rep, n);
        let chart_inv = chart.inverse(tol)?;
        let mut translations = Vec::new();
        let mut witnesses = Vec::new();
        let base = Point::base(n);
        for &pi in &members[ci] {
            // Members might fix another point of the class; only direct
            // fixers of the representative become chart witnesses.
            let g = &inv.elements[pi];
            let z = parabolic_fixed_point(g)?;
            if !boundary_close(&z, rep, 1e-7) {
                continue;
            }
            let conj = chart.compose(g, tol)?.compose(&chart_inv, tol)?;
            let img = conj.apply(&base)?;
            if (img.t - 1.0).abs() > 1e-7 {
                return Err(OrbiError::InvalidArgument(format!(
                    "cusp witness {pi} does not preserve horospheres in the chart"
                )));
            }
            let a: Vec<f64> = img.x.clone();
            // Pure translation check on the horizontal frame.
            for axis in 0..n - 1 {
                let mut e = vec![0.0; n - 1];
                e[axis] = 1.0;
                let p = Point::new(e.clone(), 1.0)?;
                let q = conj.apply(&p)?;
                for (j, (qa, ea)) in q.x.iter().zip(&e).enumerate() {
                    let expect = ea + a[j];
                    if (qa - expect).abs() > 1e-6 {
                        return Err(OrbiError::InvalidArgument(format!(
                            "cusp witness {pi} has a rotational part; only pure translations are supported"
                        )));
                    }
                }
            }
            witnesses.push(pi);
            translations.push(a);
        }
        let min_translation = translations
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
            .filter(|v| *v > 1e-12)
            .fold(f64::INFINITY, f64::min);
        if !min_translation.is_finite() {
            return Err(OrbiError::InvalidArgument(format!(
                "cusp class {ci} has no nonzero witness translation"
            )));
        }
        let threshold = min_translation / (2.0 * (lv.eps_prime / 2.0).sinh());
        out.push(CuspChartData {
            fixed_point: rep.clone(),
            chart,
            chart_inv,
            parabolic_witnesses: witnesses,
            translations,
            min_translation,
            threshold,
        });
    }
    Ok(out)
}

/// A lift of the thin part: a horoball in base-chart coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Horoball {
    /// { t > height }: the horoball at infinity.
    Slab { height: f64 },
    /// Euclidean ball of the given diameter tangent at the boundary point.
    Ball { tangent: Vec<f64>, diameter: f64 },
}

impl Horoball {
    /// Busemann gauge: < 1 inside; ln(gauge) is the hyperbolic distance to
    /// the horoball for outside points.
    pub fn gauge(&self, p: &Point) -> f64 {
        match self {
            Horoball::Slab { height } => height / p.t,
            Horoball::Ball { tangent, diameter } => {
                let d2: f64 = p
                    .x
                    .iter()
                    .zip(tangent)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    + p.t * p.t;
                d2 / (p.t * diameter)
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.gauge(p) < 1.0
    }

    pub fn dist(&self, p: &Point) -> f64 {
        self.gauge(p).max(1.0).ln()
    }
}

/// One thin-part lift, tagged with its cusp class.
#[derive(Debug, Clone)]
pub struct ThinLift {
    pub ball: Horoball,
    pub cusp: usize,
}

/// All inventory lifts of the per-cusp thin horoballs whose influence
/// reaches the window: tangent within the margin box and diameter above the
/// cutoff. Deduplicated.
pub fn thin_lifts(
    inv: &ElementInventory,
    cusps: &[CuspChartData],
    x_lo: &[f64],
    x_hi: &[f64],
    margin: f64,
    diameter_cutoff: f64,
    tol: &Tolerances,
) -> Result<Vec<ThinLift>> {
    let mut lifts: Vec<ThinLift> = Vec::new();
    let mut seen: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for (ci, cusp) in cusps.iter().enumerate() {
        let t0 = cusp.threshold;
        for g in &inv.elements {
            // h = g o chart_inv maps {t > t0} to a lift of this cusp's
            // horoball.
            let h = g.compose(&cusp.chart_inv, tol)?;
            match h.apply_boundary(&BoundaryPoint::Infinity) {
                BoundaryPoint::Infinity => {
                    // Slab: height from the image of (0, t0).
                    let n = h.dim();
                    let p = Point::new(vec![0.0; n - 1], t0)?;
                    let q = h.apply(&p)?;
                    let dup = seen.iter().any(|(c, x, d)| {
                        *c == ci && x[0].is_infinite() && (d - q.t).abs() < 1e-9 * q.t
                    });
                    if !dup {
                        seen.push((ci, vec![f64::INFINITY], q.t));
                        lifts.push(ThinLift {
                            ball: Horoball::Slab { height: q.t },
                            cusp: ci,
                        });
                    }
                }
                BoundaryPoint::Finite(tangent) => {
                    // Ball: the top point is the image of (w0, t0) where w0
                    // is the preimage of infinity.
                    let hinv = h.inverse(tol)?;
                    let w0 = match hinv.apply_boundary(&BoundaryPoint::Infinity) {
                        BoundaryPoint::Finite(w) => w,
                        BoundaryPoint::Infinity => continue,
                    };
                    let p = Point::new(w0, t0)?;
                    let top = match h.apply(&p) {
                        Ok(q) => q,
                        Err(_) => continue, // vanishing lift
                    };
                    let diameter = top.t;
                    if diameter < diameter_cutoff {
                        continue;
                    }
                    let inside = tangent
                        .iter()
                        .zip(x_lo.iter().zip(x_hi))
                        .all(|(v, (lo, hi))| *v > lo - margin && *v < hi + margin);
                    if !inside {
                        continue;
                    }
                    let dup = seen.iter().any(|(c, x, d)| {
                        *c == ci
                            && !x[0].is_infinite()
                            && x.iter()
                                .zip(&tangent)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt()
                                < 1e-8 * (1.0 + diameter)
                            && (d - diameter).abs() < 1e-8 * diameter
                    });
                    if !dup {
                        seen.push((ci, tangent.clone(), diameter));
                        lifts.push(ThinLift {
                            ball: Horoball::Ball { tangent, diameter },
                            cusp: ci,
                        });
                    }
                }
            }
        }
    }
    Ok(lifts)
}

/// Thick-thin data for a run: levels, cusp classes and the thin lifts
/// relevant to the sampling window.
#[derive(Debug, Clone)]
pub struct ThickThinData {
    pub levels: LevelAssignment,
    pub cusps: Vec<CuspChartData>,
    pub lifts: Vec<ThinLift>,
}

impl ThickThinData {
    /// Lift-based thin test; returns the lift index.
    pub fn thin_lift_at(&self, p: &Point) -> Option<usize> {
        self.lifts.iter().position(|l| l.ball.contains(p))
    }

    /// Distance to the thin part (0 on its boundary). Exact whenever the
    /// nearest lift is within the window; the inventory truncation is
    /// recorded in the run reports.
    pub fn dist_to_thin_raw(&self, p: &Point) -> f64 {
        self.lifts
            .iter()
            .map(|l| l.ball.dist(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Spec-shaped distance to the thin set: error when p is already thin.
    pub fn dist_to_thin(&self, p: &Point) -> Result<f64> {
        if let Some(li) = self.thin_lift_at(p) {
            return Err(OrbiError::PointIsThin {
                displacement: self.lifts[li].ball.gauge(p),
                level: self.levels.eps_prime,
            });
        }
        Ok(self.dist_to_thin_raw(p))
    }
}

/// Inventory-scan thin test (the defining sublevel union over non-elliptic
/// elements); returns the first witness index.
pub fn is_thin_inventory(
    p: &Point,
    inv: &ElementInventory,
    lv: &LevelAssignment,
) -> Result<Option<usize>> {
    for (i, g) in inv.elements.iter().enumerate() {
        let kind = g
            .cached_class()
            .expect("inventory elements are classified")
            .0;
        if kind != IsometryKind::Hyperbolic && kind != IsometryKind::Parabolic {
            continue;
        }
        if g.displacement(p)? < lv.eps_prime {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Flow in a cusp chart: (x, t) -> (x, t e^{-s}); s > 0 flows away from the
/// cusp point.
pub fn flow_in_chart(p: &Point, s: f64) -> Point {
    Point {
        x: p.x.clone(),
        t: p.t * (-s).exp(),
    }
}

/// Flow a base-chart point along its cusp geodesic: chart, scale, unchart.
pub fn flow(p: &Point, s: f64, cusp: &CuspChartData) -> Result<Point> {
    let q = cusp.chart.apply(p)?;
    let fq = flow_in_chart(&q, s);
    cusp.chart_inv.apply(&fq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate, LatticeFile};

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn psl2z(tol: &Tolerances) -> LatticeSpec {
        LatticeSpec::from_file(
            LatticeFile {
                n: 2,
                model: "psl2r".into(),
                generators: vec![vec![0.0, -1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0, 1.0]],
                volume: std::f64::consts::PI / 3.0,
                eta: 3,
                nu: 1.92,
                margulis_epsilon: 0.2,
                margulis_index: 1,
                relators: vec![vec![1, 1], vec![1, 2, 1, 2, 1, 2]],
            },
            tol,
        )
        .unwrap()
    }

    fn gamma2(tol: &Tolerances) -> LatticeSpec {
        LatticeSpec::from_file(
            LatticeFile {
                n: 2,
                model: "psl2r".into(),
                generators: vec![vec![1.0, 2.0, 0.0, 1.0], vec![1.0, 0.0, 2.0, 1.0]],
                volume: 2.0 * std::f64::consts::PI,
                eta: 1,
                nu: 3.52,
                margulis_epsilon: 0.2,
                margulis_index: 1,
                relators: vec![],
            },
            tol,
        )
        .unwrap()
    }

    #[test]
    fn level_arithmetic() {
        let tol = tols();
        let mut spec = psl2z(&tol);
        spec.nu = 10.0;
        let lv = levels(&spec, 0.1);
        assert!((lv.eps_prime - 0.05).abs() < 1e-15);
        assert_eq!(lv.margulis_m, 3);
        assert!((lv.eps_elliptic - 0.05 / 3.0).abs() < 1e-15);
        spec.nu = 0.04;
        let lv = levels(&spec, 0.1);
        assert!((lv.eps_prime - 0.02).abs() < 1e-15);
        spec.margulis_index = 2;
        let lv = levels(&spec, 0.1);
        assert_eq!(lv.margulis_m, 5);
    }

    #[test]
    fn psl2z_has_one_cusp_class() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 6, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.2);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        assert_eq!(cusps.len(), 1);
        assert!((cusps[0].min_translation - 1.0).abs() < 1e-9);
        // Displacement of x -> x + 1 at height t is 2 arsinh(1/2t) < eps'
        // iff t > 1/(2 sinh(eps'/2)).
        let expect = 1.0 / (2.0 * (lv.eps_prime / 2.0).sinh());
        assert!((cusps[0].threshold - expect).abs() < 1e-9);
    }

    #[test]
    fn gamma2_has_three_cusp_classes() {
        let tol = tols();
        let spec = gamma2(&tol);
        let inv = enumerate(&spec, 8, &tol, 200_000).unwrap();
        assert!(inv.by_kind.elliptic.is_empty());
        let lv = levels(&spec, 0.2);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        assert_eq!(cusps.len(), 3);
    }

    #[test]
    fn thin_test_matches_closed_form_threshold() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 8, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.104); // eps' = 0.052
        assert!((lv.eps_prime - 0.052).abs() < 1e-12);
        // At (0, 1): displacement of T is 2 arsinh(1/2) = 0.9624 > eps'.
        let p = Point::base(2);
        assert!(is_thin_inventory(&p, &inv, &lv).unwrap().is_none());
        let d_t = 2.0 * (0.5f64).asinh();
        assert!((d_t - 0.9624236501192069).abs() < 1e-12);
        // Above the threshold height: thin with a parabolic witness.
        let t0 = 1.0 / (2.0 * (lv.eps_prime / 2.0).sinh());
        let high = Point::new(vec![0.0], t0 * 1.01).unwrap();
        let wit = is_thin_inventory(&high, &inv, &lv).unwrap();
        assert!(wit.is_some());
        let low = Point::new(vec![0.0], t0 * 0.99).unwrap();
        assert!(is_thin_inventory(&low, &inv, &lv).unwrap().is_none());
    }

    #[test]
    fn lift_based_thin_agrees_with_inventory_scan() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 8, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.3);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        let lifts = thin_lifts(&inv, &cusps, &[-0.6], &[0.6], 0.5, 1e-3, &tol).unwrap();
        let data = ThickThinData {
            levels: lv,
            cusps,
            lifts,
        };
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut thin_seen = 0;
        for _ in 0..400 {
            let p = Point::new(
                vec![rng.gen_range(-0.5..0.5)],
                (rng.gen_range(-0.5f64..3.0)).exp(),
            )
            .unwrap();
            let by_lifts = data.thin_lift_at(&p).is_some();
            let by_scan = is_thin_inventory(&p, &inv, &data.levels).unwrap().is_some();
            assert_eq!(by_lifts, by_scan, "disagreement at {:?}", p);
            if by_scan {
                thin_seen += 1;
            }
        }
        assert!(thin_seen > 10, "sampling should reach the cusp");
    }

    #[test]
    fn dist_to_thin_closed_form_and_flow() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 8, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.3);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        let lifts = thin_lifts(&inv, &cusps, &[-0.6], &[0.6], 0.5, 1e-3, &tol).unwrap();
        let data = ThickThinData {
            levels: lv,
            cusps,
            lifts,
        };
        let t0 = data.cusps[0].threshold;
        let p = Point::new(vec![0.0], t0).unwrap();
        assert!(data.dist_to_thin(&p).unwrap() < 1e-9);
        let p = Point::new(vec![0.0], t0 / std::f64::consts::E).unwrap();
        assert!((data.dist_to_thin(&p).unwrap() - 1.0).abs() < 1e-9);
        let p = Point::new(vec![0.0], t0 * 1.5).unwrap();
        assert!(matches!(
            data.dist_to_thin(&p),
            Err(OrbiError::PointIsThin { .. })
        ));

        // Flow basics in the chart of the cusp at infinity.
        let p = Point::new(vec![0.2], std::f64::consts::E).unwrap();
        let q = flow(&p, 1.0, &data.cusps[0]).unwrap();
        assert!((q.t - 1.0).abs() < 1e-9 && (q.x[0] - 0.2).abs() < 1e-9);
        let r = flow(&p, 0.0, &data.cusps[0]).unwrap();
        assert!(crate::geometry::dist(&p, &r).unwrap() < 1e-12);

        // Distance to thin is monotone along the flow away from the cusp,
        // within the cusp neighborhood (further down, other cusp lifts take
        // over as nearest).
        let start = Point::new(vec![0.1], t0 * 0.9).unwrap();
        let mut prev = data.dist_to_thin_raw(&start);
        for k in 1..12 {
            let p = flow_in_chart(&start, 0.1 * k as f64);
            let d = data.dist_to_thin_raw(&p);
            assert!(d >= prev - 1e-12, "flow step {k}: {d} < {prev}");
            prev = d;
        }
    }

    #[test]
    fn dist_to_thin_matches_bisection_oracle() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 8, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.3);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        let lifts = thin_lifts(&inv, &cusps, &[-0.6], &[0.6], 0.5, 1e-3, &tol).unwrap();
        let data = ThickThinData {
            levels: lv,
            cusps,
            lifts,
        };
        for &(x, f) in &[(0.0, 0.6), (0.3, 0.8), (-0.2, 0.5)] {
            let t0 = data.cusps[0].threshold;
            let p = Point::new(vec![x], t0 * f).unwrap();
            let d = data.dist_to_thin(&p).unwrap();
            let mut lo = 0.0f64;
            let mut hi = 5.0f64;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let q = flow_in_chart(&p, -mid); // toward the cusp
                if data.thin_lift_at(&q).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!(
                (d - 0.5 * (lo + hi)).abs() < 1e-6,
                "closed form {d} vs bisection {}",
                0.5 * (lo + hi)
            );
        }
    }

    #[test]
    fn flow_is_equivariant_under_the_cusp_stabilizer() {
        let tol = tols();
        let spec = psl2z(&tol);
        let inv = enumerate(&spec, 4, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.2);
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        let t_gen = &spec.generators[1]; // x -> x + 1 fixes infinity
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let p = Point::new(
                vec![rng.gen_range(-2.0..2.0)],
                (rng.gen_range(-0.5f64..2.0)).exp(),
            )
            .unwrap();
            let s = rng.gen_range(-0.8..0.8);
            let lhs = flow(&t_gen.apply(&p).unwrap(), s, &cusps[0]).unwrap();
            let rhs = t_gen.apply(&flow(&p, s, &cusps[0]).unwrap()).unwrap();
            assert!(crate::geometry::dist(&lhs, &rhs).unwrap() < 1e-8);
        }
    }

    #[test]
    fn free_boost_group_is_all_thick() {
        let tol = tols();
        let l = 3.0f64;
        let (c, s) = ((l / 2.0).cosh(), (l / 2.0).sinh());
        let spec = LatticeSpec::from_file(
            LatticeFile {
                n: 2,
                model: "psl2r".into(),
                generators: vec![
                    vec![c, s, s, c],
                    vec![c + 8.0 * s, -63.0 * s, s, c - 8.0 * s],
                ],
                volume: 1.0,
                eta: 1,
                nu: 2.9,
                margulis_epsilon: 0.2,
                margulis_index: 1,
                relators: vec![],
            },
            &tol,
        )
        .unwrap();
        let inv = enumerate(&spec, 4, &tol, 200_000).unwrap();
        let lv = levels(&spec, 0.2);
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let p = Point::new(
                vec![rng.gen_range(-4.0..12.0)],
                (rng.gen_range(-2.0f64..2.0)).exp(),
            )
            .unwrap();
            assert!(is_thin_inventory(&p, &inv, &lv).unwrap().is_none());
        }
        let cusps = cusp_inventory(&inv, 2, &lv, &tol).unwrap();
        assert!(cusps.is_empty());
    }
}
