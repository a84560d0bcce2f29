//! Weight-of-evidence computations for lineage-marker DNA profiles (Y-STR panels and
//! mitogenomes).
//!
//! The crate is organised around the objects a caseworker handles:
//!
//! - [`model`]: panels, haplotypes, databases and profile matching, including unordered
//!   duplicated loci and partial profiles.
//! - [`estimators`]: closed-form match-probability estimators (database frequency with and
//!   without augmentation, the singleton-fraction estimator, the binomial upper confidence
//!   limit) and likelihood ratios given a meiosis distance or a distribution over it.
//! - [`disclap`]: Discrete Laplace mixture model fitted by EM, with BIC model selection.
//! - [`sim`]: forward-in-time simulation of single-parent lineages giving the distribution of
//!   the number `K_q` of live individuals matching a random individual's profile.
//! - [`mixture`]: two-contributor mixtures, companion enumeration and simulated companion
//!   counts.
//! - [`io`]: delimited-text readers for databases, profiles, mixtures and meiosis-distance
//!   distributions.
//!
//! Values are computed in `f64`; every random procedure takes an explicit seed.

#![forbid(unsafe_code)]

pub mod disclap;
pub mod error;
pub mod estimators;
pub mod io;
pub mod mixture;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    DatabaseSummary, Haplotype, HaplotypeDatabase, LocusSpec, MatchOutcome, MatchPolicy, Panel,
};
