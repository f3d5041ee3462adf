//! Run configuration and numeric tolerances.
//!
//! Everything the pipeline samples or decides is a function of the config
//! (including the RNG seed), so identical configs produce byte-identical
//! artifacts.

use serde::{Deserialize, Serialize};

/// Floating-point tolerances. The geometry is exact mathematics; these pin
/// down what "equal" means in doubles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Lorentz-orthogonality defect allowed on isometry ingestion.
    pub tol_ortho: f64,
    /// Margin above 1 for a real eigenvalue to count as hyperbolic.
    pub tol_eig: f64,
    /// Matrix distance below which an isometry is the identity.
    pub tol_id: f64,
    /// Isometry defect allowed when applying group elements.
    pub tol_iso: f64,
    /// Matrix deduplication distance (on sign-normalized matrices).
    pub tol_dedup: f64,
    /// Margin band for capsule intersection predicates.
    pub tol_geom: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_ortho: 1e-9,
            tol_eig: 1e-8,
            tol_id: 1e-12,
            tol_iso: 1e-8,
            tol_dedup: 1e-8,
            tol_geom: 1e-9,
        }
    }
}

/// How the cascade closes over the non-constructive functions; both choices
/// keep every inequality the construction relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eps23Mode {
    /// eps2(x) = eps3(x) = min(x, eps_n / (2 M(n))); cascade steps by 1/24.
    Identity,
    /// eps2(x) = eps3(x) = eps_n / (2 M(n)); cascade steps by min(cap/24, x/12).
    Capped,
}

impl Default for Eps23Mode {
    fn default() -> Self {
        Eps23Mode::Identity
    }
}

/// Explicit cascade for desk-scale runs: a custom shrink depth and mu array
/// replacing the formula-derived ones. The certificate records the override
/// and which formula relations it relaxes; `build_cover` still asserts the
/// geometric fit conditions the construction needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeOverride {
    /// Shrink depth s of the thick part (the band width); mu[0] must be s/2.
    pub shrink: f64,
    /// mu_{-1}, mu_0, ..., mu_n (n+2 strictly decreasing positive values).
    pub mu: Vec<f64>,
}

/// Axis-aligned sampling window in the base chart, covering a fundamental
/// domain of the thick part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Candidate pitch as a fraction of mu (must be <= 1/4).
    pub pitch_factor: f64,
    /// Coverage samples drawn in the acceptance check.
    pub coverage_samples: usize,
    /// Flow trajectories checked for stability.
    pub flow_trajectories: usize,
    /// Sample count per foldability clause and cover set.
    pub foldability_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            pitch_factor: 0.25,
            coverage_samples: 10_000,
            flow_trajectories: 200,
            foldability_samples: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Word-ball explosion guard.
    pub max_inventory: usize,
    /// Greedy center explosion guard.
    pub max_centers: usize,
    /// Nerve simplex explosion guard (per dimension).
    pub max_simplices: usize,
    /// Iteration cap for the convex feasibility solver.
    pub feasibility_iters: usize,
    /// Order cap when estimating elliptic element orders.
    pub max_elliptic_order: usize,
    /// Indeterminate intersection count tolerated before exit code 3.
    pub indeterminacy_threshold: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_inventory: 200_000,
            max_centers: 200_000,
            max_simplices: 20_000_000,
            feasibility_iters: 400,
            max_elliptic_order: 512,
            indeterminacy_threshold: 0,
        }
    }
}

/// Full configuration of a pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Path to the lattice input file.
    pub lattice: String,
    /// Word-length cap L for the element inventory.
    #[serde(default = "default_word_length")]
    pub word_length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub eps23_mode: Eps23Mode,
    /// Margulis epsilon override (constants are configuration, not derivation).
    #[serde(default)]
    pub eps_n_override: Option<f64>,
    /// Desk-scale cascade override; None runs the formula cascade.
    #[serde(default)]
    pub cascade_override: Option<CascadeOverride>,
    /// Sampling window; None derives a window from the cusp charts.
    #[serde(default)]
    pub region: Option<Region>,
    /// Top simplex dimension of the nerve (defaults to n).
    #[serde(default)]
    pub nerve_max_dim: Option<usize>,
    /// Primes for finite-field Betti numbers.
    #[serde(default = "default_primes")]
    pub primes: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_word_length() -> usize {
    8
}

fn default_primes() -> Vec<u64> {
    vec![2, 3, 5]
}

fn default_out_dir() -> String {
    "out".to_string()
}

impl RunConfig {
    pub fn from_file(path: &str) -> crate::error::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::error::OrbiError::Input(format!("{path}: {e}")))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| crate::error::OrbiError::Input(format!("{path}: {e}")))?;
        Ok(cfg)
    }

    /// Hash of the canonical JSON encoding; embedded in every artifact.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let out = h.finalize();
        let mut s = String::with_capacity(16);
        for b in &out[..8] {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}
