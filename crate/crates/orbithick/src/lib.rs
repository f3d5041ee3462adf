//! Upper half-space hyperbolic geometry, thick-thin decompositions with
//! variable Margulis levels, stretched-ball good covers of the thick part,
//! and integer simplicial homology of the resulting nerve complexes.
//!
//! The pipeline runs in stages: a finitely generated lattice is enumerated
//! into a word ball ([`group`]), the thin part and its cusps are located
//! ([`thickthin`]), a good cover of the shrunken thick part is built from
//! ordinary and stretched balls ([`cover`]), the nerve pair is extracted
//! ([`nerve`]), and Betti numbers plus torsion are computed and checked
//! against the volume bounds ([`homology`], [`certify`]).
//!
//! All stage outputs are plain JSON files; see [`cli`] for the batch
//! front-end. Everything is deterministic given the run seed.

pub mod certify;
pub mod cli;
pub mod config;
pub mod cover;
pub mod error;
pub mod geometry;
pub mod group;
pub mod homology;
pub mod nerve;
pub mod thickthin;

pub use config::{RunConfig, Tolerances};
pub use error::OrbiError;
