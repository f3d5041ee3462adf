//! From generator matrices to computable group data: word-ball enumeration
//! with deduplication, elliptic/parabolic/hyperbolic inventories, eta/nu
//! estimates, quotient distances and singular strata.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{OrbiError, Result};
use crate::geometry::{
    dist, fixed_subspace, project_to_subspace, Isometry, IsometryKind, Point,
    TotallyGeodesicSubspace,
};

/// Lattice input file: generators plus trusted metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeFile {
    pub n: usize,
    pub model: String,
    pub generators: Vec<Vec<f64>>,
    pub volume: f64,
    pub eta: usize,
    pub nu: f64,
    pub margulis_epsilon: f64,
    pub margulis_index: usize,
    #[serde(default)]
    pub relators: Vec<Vec<i32>>,
}

/// Generator in its native representation. Word products are taken here:
/// 2x2 entries grow like the square root of the Lorentz entries, which keeps
/// long words at the rounding floor instead of accumulating cancellation
/// error in the 3x3/4x4 world.
#[derive(Debug, Clone)]
pub enum NativeGen {
    /// Real Moebius matrix (det normalized to 1).
    Psl2R([f64; 4]),
    /// Complex Moebius matrix, interleaved re/im (det normalized to 1).
    Psl2C([f64; 8]),
    /// No better representation available.
    Lorentz(DMatrix<f64>),
}

impl NativeGen {
    pub fn mul(&self, o: &NativeGen) -> NativeGen {
        match (self, o) {
            (NativeGen::Psl2R(a), NativeGen::Psl2R(b)) => {
                let m = [
                    a[0] * b[0] + a[1] * b[2],
                    a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2],
                    a[2] * b[1] + a[3] * b[3],
                ];
                NativeGen::Psl2R(m)
            }
            (NativeGen::Psl2C(a), NativeGen::Psl2C(b)) => {
                let cm = |ar: f64, ai: f64, br: f64, bi: f64| (ar * br - ai * bi, ar * bi + ai * br);
                let mut m = [0.0; 8];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for l in 0..2 {
                            let (r, s) = cm(
                                a[4 * i + 2 * l],
                                a[4 * i + 2 * l + 1],
                                b[4 * l + 2 * j],
                                b[4 * l + 2 * j + 1],
                            );
                            re += r;
                            im += s;
                        }
                        m[4 * i + 2 * j] = re;
                        m[4 * i + 2 * j + 1] = im;
                    }
                }
                NativeGen::Psl2C(m)
            }
            (NativeGen::Lorentz(a), NativeGen::Lorentz(b)) => NativeGen::Lorentz(a * b),
            _ => panic!("mixed native representations"),
        }
    }

    pub fn inv(&self) -> NativeGen {
        match self {
            // det is kept at 1, so the adjugate is the inverse.
            NativeGen::Psl2R(a) => NativeGen::Psl2R([a[3], -a[1], -a[2], a[0]]),
            NativeGen::Psl2C(a) => {
                NativeGen::Psl2C([a[6], a[7], -a[2], -a[3], -a[4], -a[5], a[0], a[1]])
            }
            NativeGen::Lorentz(m) => {
                let k = m.nrows();
                let mut inv = m.transpose();
                for i in 0..k - 1 {
                    inv[(i, k - 1)] = -inv[(i, k - 1)];
                    inv[(k - 1, i)] = -inv[(k - 1, i)];
                }
                NativeGen::Lorentz(inv)
            }
        }
    }

    pub fn to_isometry(&self, tol: &Tolerances) -> crate::error::Result<Isometry> {
        match self {
            NativeGen::Psl2R(a) => Isometry::from_psl2r(*a, tol),
            NativeGen::Psl2C(a) => {
                Isometry::from_psl2c([a[0], a[2], a[4], a[6]], [a[1], a[3], a[5], a[7]], tol)
            }
            NativeGen::Lorentz(m) => Isometry::from_lorentz(m.clone(), tol),
        }
    }
}

/// A finitely generated lattice with its metadata.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub n: usize,
    pub generators: Vec<Isometry>,
    pub natives: Vec<NativeGen>,
    pub volume: f64,
    pub eta: usize,
    pub nu: f64,
    pub margulis_epsilon: f64,
    pub margulis_index: usize,
    pub relators: Vec<Vec<i32>>,
}

impl LatticeSpec {
    pub fn load(path: &str, tol: &Tolerances) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OrbiError::Input(format!("{path}: {e}")))?;
        let file: LatticeFile =
            serde_json::from_str(&text).map_err(|e| OrbiError::Input(format!("{path}: {e}")))?;
        Self::from_file(file, tol)
    }

    pub fn from_file(file: LatticeFile, tol: &Tolerances) -> Result<Self> {
        if file.eta < 1 || !(file.nu > 0.0) || !(file.margulis_epsilon > 0.0) {
            return Err(OrbiError::Input(
                "eta >= 1, nu > 0 and margulis_epsilon > 0 required".into(),
            ));
        }
        let n = file.n;
        let mut generators = Vec::new();
        let mut natives = Vec::new();
        for (gi, g) in file.generators.iter().enumerate() {
            let native = match file.model.as_str() {
                "lorentz" => {
                    let k = n + 1;
                    if g.len() != k * k {
                        return Err(OrbiError::Input(format!(
                            "generator {gi}: expected {} entries, got {}",
                            k * k,
                            g.len()
                        )));
                    }
                    NativeGen::Lorentz(DMatrix::from_row_slice(k, k, g))
                }
                "psl2r" => {
                    if n != 2 || g.len() != 4 {
                        return Err(OrbiError::Input(format!(
                            "generator {gi}: psl2r needs n = 2 and 4 entries"
                        )));
                    }
                    let det = g[0] * g[3] - g[1] * g[2];
                    if det <= 0.0 {
                        return Err(OrbiError::Input(format!(
                            "generator {gi}: determinant must be positive"
                        )));
                    }
                    let s = det.sqrt();
                    NativeGen::Psl2R([g[0] / s, g[1] / s, g[2] / s, g[3] / s])
                }
                "psl2c" => {
                    if n != 3 || g.len() != 8 {
                        return Err(OrbiError::Input(format!(
                            "generator {gi}: psl2c needs n = 3 and 8 interleaved entries"
                        )));
                    }
                    use nalgebra::Complex;
                    let a = Complex::new(g[0], g[1]);
                    let b = Complex::new(g[2], g[3]);
                    let c = Complex::new(g[4], g[5]);
                    let d = Complex::new(g[6], g[7]);
                    let det = a * d - b * c;
                    if det.norm() < 1e-12 {
                        return Err(OrbiError::Input(format!("generator {gi}: singular")));
                    }
                    let s = det.sqrt();
                    let (a, b, c, d) = (a / s, b / s, c / s, d / s);
                    NativeGen::Psl2C([a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im])
                }
                other => {
                    return Err(OrbiError::Input(format!("unknown model '{other}'")));
                }
            };
            generators.push(native.to_isometry(tol)?);
            natives.push(native);
        }
        let spec = LatticeSpec {
            n,
            generators,
            natives,
            volume: file.volume,
            eta: file.eta,
            nu: file.nu,
            margulis_epsilon: file.margulis_epsilon,
            margulis_index: file.margulis_index,
            relators: file.relators,
        };
        // Relators must evaluate to the identity.
        for (ri, rel) in spec.relators.iter().enumerate() {
            let m = spec.evaluate_word(rel, tol)?;
            let k = n + 1;
            let defect = (&m.mat - DMatrix::<f64>::identity(k, k)).amax();
            if defect > 1e-6 {
                return Err(OrbiError::Input(format!(
                    "relator {ri} does not evaluate to the identity (defect {defect:.3e})"
                )));
            }
        }
        Ok(spec)
    }

    /// Build a spec directly from isometries (native products then run in
    /// the Lorentz representation).
    pub fn from_isometries(
        n: usize,
        gens: Vec<Isometry>,
        volume: f64,
        eta: usize,
        nu: f64,
        margulis_epsilon: f64,
        margulis_index: usize,
    ) -> Self {
        let natives = gens
            .iter()
            .map(|g| NativeGen::Lorentz(g.mat.clone()))
            .collect();
        LatticeSpec {
            n,
            generators: gens,
            natives,
            volume,
            eta,
            nu,
            margulis_epsilon,
            margulis_index,
            relators: vec![],
        }
    }

    /// Evaluate a signed 1-based word in the generators.
    pub fn evaluate_word(&self, word: &[i32], tol: &Tolerances) -> Result<Isometry> {
        let mut acc: Option<NativeGen> = None;
        for &w in word {
            if w == 0 || w.unsigned_abs() as usize > self.natives.len() {
                return Err(OrbiError::Input(format!("bad generator index {w}")));
            }
            let g = &self.natives[(w.unsigned_abs() - 1) as usize];
            let g = if w > 0 { g.clone() } else { g.inv() };
            acc = Some(match acc {
                Some(a) => a.mul(&g),
                None => g,
            });
        }
        match acc {
            Some(a) => a.to_isometry(tol),
            None => Ok(Isometry::identity(self.n)),
        }
    }
}

/// Deduplicated word ball of the lattice.
#[derive(Debug, Clone)]
pub struct ElementInventory {
    pub elements: Vec<Isometry>,
    /// Letter word per element (letters[2i] = g_i, letters[2i+1] = g_i^{-1}).
    pub words: Vec<Vec<u8>>,
    pub by_kind: ByKind,
    pub word_length_cap: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ByKind {
    pub elliptic: Vec<usize>,
    pub parabolic: Vec<usize>,
    pub hyperbolic: Vec<usize>,
}

/// Trace-bucketed dedup index: candidates within tol of an existing element
/// share (up to +-1 cell) the quantized trace.
struct DedupIndex {
    cell: f64,
    buckets: HashMap<i64, Vec<usize>>,
}

impl DedupIndex {
    fn new() -> Self {
        DedupIndex {
            cell: 1e-4,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, tr: f64) -> i64 {
        (tr / self.cell).round() as i64
    }

    fn find(&self, mats: &[Isometry], m: &Isometry, tol: f64) -> Option<usize> {
        let tr: f64 = m.mat.trace();
        let k0 = self.key(tr);
        for k in [k0 - 1, k0, k0 + 1] {
            if let Some(list) = self.buckets.get(&k) {
                for &i in list {
                    if mats[i].mat_dist(m) < tol {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, idx: usize, m: &Isometry) {
        let tr: f64 = m.mat.trace();
        let k = self.key(tr);
        self.buckets.entry(k).or_default().push(idx);
    }
}

/// All reduced words of length <= cap over the generators and their
/// inverses, deduplicated by matrix distance. Deterministic: breadth-first
/// in letter order, first occurrence kept.
pub fn enumerate(
    spec: &LatticeSpec,
    cap: usize,
    tol: &Tolerances,
    max_count: usize,
) -> Result<ElementInventory> {
    let n = spec.n;
    // Words multiply out in the native representation and convert once.
    let mut letters: Vec<NativeGen> = Vec::new();
    for g in &spec.natives {
        letters.push(g.clone());
        letters.push(g.inv());
    }

    let id_native = match spec.natives.first() {
        Some(NativeGen::Psl2R(_)) => NativeGen::Psl2R([1.0, 0.0, 0.0, 1.0]),
        Some(NativeGen::Psl2C(_)) => {
            NativeGen::Psl2C([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        }
        _ => NativeGen::Lorentz(DMatrix::identity(n + 1, n + 1)),
    };

    let mut elements = vec![Isometry::identity(n)];
    let mut natives = vec![id_native];
    let mut words: Vec<Vec<u8>> = vec![vec![]];
    let mut index = DedupIndex::new();
    index.insert(0, &elements[0]);

    let mut frontier: Vec<usize> = vec![0];
    for _len in 1..=cap {
        let mut next = Vec::new();
        for &ei in &frontier {
            let word = words[ei].clone();
            for (li, letter) in letters.iter().enumerate() {
                let li = li as u8;
                if let Some(&last) = word.last() {
                    if last ^ 1 == li {
                        continue; // free reduction
                    }
                }
                let native = natives[ei].mul(letter);
                let m = native.to_isometry(tol)?;
                if index.find(&elements, &m, tol.tol_dedup).is_some() {
                    continue;
                }
                let idx = elements.len();
                if idx >= max_count {
                    return Err(OrbiError::ExplosionGuard {
                        count: idx + 1,
                        cap: max_count,
                    });
                }
                elements.push(m);
                natives.push(native);
                let mut w = word.clone();
                w.push(li);
                words.push(w);
                index.insert(idx, &elements[idx]);
                next.push(idx);
            }
        }
        frontier = next;
    }

    // The reduced ball is inverse-closed letter-wise, but dedup could keep
    // an element whose inverse collided away; append any missing inverses.
    let mut i = 0;
    while i < elements.len() {
        let native = natives[i].inv();
        let inv = native.to_isometry(tol)?;
        if index.find(&elements, &inv, tol.tol_dedup).is_none() {
            let idx = elements.len();
            if idx >= max_count {
                return Err(OrbiError::ExplosionGuard {
                    count: idx + 1,
                    cap: max_count,
                });
            }
            let w: Vec<u8> = words[i].iter().rev().map(|&l| l ^ 1).collect();
            elements.push(inv);
            natives.push(native);
            words.push(w);
            index.insert(idx, &elements[idx]);
        }
        i += 1;
    }

    let mut by_kind = ByKind::default();
    for (i, e) in elements.iter().enumerate() {
        match e.kind(tol)? {
            IsometryKind::Elliptic => by_kind.elliptic.push(i),
            IsometryKind::Parabolic => by_kind.parabolic.push(i),
            IsometryKind::Hyperbolic => by_kind.hyperbolic.push(i),
            IsometryKind::Identity => {}
        }
    }
    Ok(ElementInventory {
        elements,
        words,
        by_kind,
        word_length_cap: cap,
    })
}

/// Minimum translation length over the hyperbolic inventory; infinity when
/// no hyperbolic element was found. An upper bound on the true nu.
pub fn estimate_nu(inv: &ElementInventory) -> f64 {
    inv.by_kind
        .hyperbolic
        .iter()
        .map(|&i| {
            inv.elements[i]
                .cached_class()
                .expect("inventory elements are classified")
                .1
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest order of a cyclic subgroup generated by an elliptic inventory
/// element; a lower bound on the true eta. Returns (estimate, skipped)
/// where skipped counts elements whose order exceeded the cap.
pub fn estimate_eta(inv: &ElementInventory, tol: &Tolerances, order_cap: usize) -> (usize, usize) {
    let mut best = 1usize;
    let mut skipped = 0usize;
    let n1 = match inv.elements.first() {
        Some(e) => e.mat.nrows(),
        None => return (1, 0),
    };
    let id = DMatrix::<f64>::identity(n1, n1);
    for &i in &inv.by_kind.elliptic {
        let g = &inv.elements[i];
        let mut p = g.mat.clone();
        let mut order = None;
        for k in 1..=order_cap {
            if (&p - &id).amax() < tol.tol_dedup.max(1e-7) {
                order = Some(k);
                break;
            }
            p = &p * &g.mat;
        }
        match order {
            Some(k) => best = best.max(k),
            None => skipped += 1,
        }
    }
    (best, skipped)
}

/// Quotient distance approximation: min over the inventory of d(p, gq).
/// Exact whenever the true minimizer has word length within the cap.
pub fn quotient_dist(p: &Point, q: &Point, inv: &ElementInventory) -> Result<f64> {
    let mut best = f64::INFINITY;
    for g in &inv.elements {
        let gq = g.apply(q)?;
        let d = dist(p, &gq)?;
        if d < best {
            best = d;
        }
    }
    Ok(best)
}

/// A singular stratum: the common fixed subspace of a finite set of elliptic
/// inventory elements.
#[derive(Debug, Clone)]
pub struct SingularStratum {
    pub subspace: TotallyGeodesicSubspace,
    /// Inventory indices of the elliptic witnesses (empty for the full stratum).
    pub stabilizer_witness: Vec<usize>,
    pub dim: usize,
}

fn subspace_signature(s: &TotallyGeodesicSubspace, probes: &[Point]) -> Vec<f64> {
    let mut sig = vec![s.dim as f64];
    for p in probes {
        match project_to_subspace(s, p) {
            Ok(q) => {
                sig.push(q.t);
                sig.extend(q.x.iter());
            }
            Err(_) => sig.push(f64::NAN),
        }
    }
    sig
}

fn signatures_match(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() < tol || (x.is_nan() && y.is_nan()))
}

/// Strata from single elliptic elements and pairwise combinations, closed
/// under intersection, deduplicated by foot-point signatures and grouped by
/// dimension. The full stratum (all of X) is always present; strata related
/// by an inventory translate are merged into one class.
pub fn singular_strata(
    inv: &ElementInventory,
    n: usize,
    tol: &Tolerances,
) -> Result<Vec<SingularStratum>> {
    let probes: Vec<Point> = vec![
        Point::base(n),
        Point::new((0..n - 1).map(|i| 0.3 + 0.1 * i as f64).collect(), 1.7)?,
        Point::new((0..n - 1).map(|i| -0.7 + 0.2 * i as f64).collect(), 0.6)?,
    ];

    let mut strata: Vec<SingularStratum> = vec![SingularStratum {
        subspace: TotallyGeodesicSubspace::full(n),
        stabilizer_witness: vec![],
        dim: n,
    }];
    let mut signatures: Vec<Vec<f64>> = vec![subspace_signature(&strata[0].subspace, &probes)];

    fn push_unique(
        strata: &mut Vec<SingularStratum>,
        signatures: &mut Vec<Vec<f64>>,
        probes: &[Point],
        s: SingularStratum,
    ) -> bool {
        let sig = subspace_signature(&s.subspace, probes);
        if signatures.iter().any(|t| signatures_match(t, &sig, 1e-7)) {
            false
        } else {
            signatures.push(sig);
            strata.push(s);
            true
        }
    }

    for &i in &inv.by_kind.elliptic {
        if let Some(sub) = fixed_subspace(&[&inv.elements[i]], tol)? {
            let dim = sub.dim;
            push_unique(
                &mut strata,
                &mut signatures,
                &probes,
                SingularStratum {
                    subspace: sub,
                    stabilizer_witness: vec![i],
                    dim,
                },
            );
        }
    }

    // Close under intersection by combining witness sets pairwise.
    let mut changed = true;
    let mut rounds = 0;
    while changed && rounds < 3 {
        changed = false;
        rounds += 1;
        let snapshot: Vec<(Vec<usize>, usize)> = strata
            .iter()
            .map(|s| (s.stabilizer_witness.clone(), s.dim))
            .collect();
        for a in 0..snapshot.len() {
            for b in (a + 1)..snapshot.len() {
                let (wa, da) = &snapshot[a];
                let (wb, db) = &snapshot[b];
                if wa.is_empty() || wb.is_empty() || (*da == 0 && *db == 0) {
                    continue;
                }
                let mut wit: Vec<usize> = wa.iter().chain(wb.iter()).cloned().collect();
                wit.sort_unstable();
                wit.dedup();
                let gens: Vec<&Isometry> = wit.iter().map(|&i| &inv.elements[i]).collect();
                if let Some(sub) = fixed_subspace(&gens, tol)? {
                    let dim = sub.dim;
                    if push_unique(
                        &mut strata,
                        &mut signatures,
                        &probes,
                        SingularStratum {
                            subspace: sub,
                            stabilizer_witness: wit,
                            dim,
                        },
                    ) {
                        changed = true;
                    }
                }
            }
        }
    }

    // Merge inventory-orbit translates, keeping the earliest representative.
    let mut keep = vec![true; strata.len()];
    for a in 1..strata.len() {
        if !keep[a] {
            continue;
        }
        for b in (a + 1)..strata.len() {
            if !keep[b] || strata[a].dim != strata[b].dim {
                continue;
            }
            let anchor_b = strata[b].subspace.anchor_point();
            'orbit: for g in &inv.elements {
                let img = match g.apply(&anchor_b) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let foot = match project_to_subspace(&strata[a].subspace, &img) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                if dist(&img, &foot).unwrap_or(f64::INFINITY) >= 1e-7 {
                    continue;
                }
                if strata[b].dim == 0 {
                    keep[b] = false;
                    break 'orbit;
                }
                // For positive-dimensional strata check a second point.
                let s = strata[b].subspace.geodesic_point(0, 0.4);
                if let (Ok(simg), ) = (g.apply(&s),) {
                    if let Ok(sfoot) = project_to_subspace(&strata[a].subspace, &simg) {
                        if dist(&simg, &sfoot).unwrap_or(f64::INFINITY) < 1e-7 {
                            keep[b] = false;
                            break 'orbit;
                        }
                    }
                }
            }
        }
    }
    Ok(strata
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| if k { Some(s) } else { None })
        .collect())
}
