//! Constrained clustering on the unit sphere.
//!
//! This crate learns low-dimensional embeddings from pairwise must-link /
//! cannot-link supervision by pulling linked pairs together and pushing
//! unlinked pairs apart in *angle* on the unit sphere, then clusters the
//! embedded points and, when the number of clusters is unknown, infers it
//! from the geometry of the embedding itself.
//!
//! The pipeline, end to end:
//!
//! 1. [`data`] — load or synthesize feature matrices and labels.
//! 2. [`constraints`] — sample and validate pairwise constraint sets.
//! 3. [`net`] + [`loss`] + [`trainer`] — train an autoencoder whose
//!    normalized bottleneck carries the angular constraint loss.
//! 4. [`clustering`] — k-means or Ward agglomeration on the sphere embedding.
//! 5. [`kinfer`] — estimate the number of clusters from angle spectra,
//!    silhouette sweeps, or merge lifetimes.
//! 6. [`eval`] — accuracy (optimal label matching), NMI, and ARI.
//!
//! The [`geometry`] module holds the analytic backbone (simplex
//! constructions, admissible negative-zone factors, perturbation bounds),
//! and [`theory`] packages those facts as a self-checking suite.
//!
//! All randomness flows through named substreams of a single `u64` seed
//! (see [`stream`]), so every artifact is reproducible bit for bit.

pub mod clustering;
pub mod constraints;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kinfer;
pub mod loss;
pub mod net;
pub mod stream;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
