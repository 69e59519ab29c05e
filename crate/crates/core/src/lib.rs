//! State-vector simulator for interferometric collapse thought experiments.
//!
//! The crate builds the canonical setups — a path-entangled two-particle
//! interferometer, a Mach-Zehnder with phase plates, a which-way splitter
//! feeding a detector avalanche, and a triple-packet crossing region — and
//! runs each one with and without the projection postulate, alongside a
//! random-jump ontology sampler and a toy stochastic-localization
//! integrator. Every scenario is seeded and reproducible, and ensemble
//! work parallelizes over rayon (disable the `parallel` feature for a
//! sequential build).

pub mod csl;
pub mod detector;
pub mod ensemble;
pub mod error;
pub mod frames;
pub mod measure;
pub mod optics;
pub mod rdm;
pub mod rng;
pub mod scenario;
pub mod screen;
pub mod state;

pub use error::{Error, Result};
