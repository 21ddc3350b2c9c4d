//! Fitness-landscape analysis of surrogate models for configuration tuning.
//!
//! The crate is organized around the life cycle of an analysis:
//!
//! * [`dataspace`] ingests configuration spaces and measured datasets.
//! * [`landscape`] builds landscape views and computes the eight landscape features.
//! * [`surrogate`] trains lightweight performance models and materializes the
//!   landscape each one emulates.
//! * [`metrics`] holds accuracy metrics and the rank-based statistics.
//! * [`dominance`] implements landscape dominance, DG/DD pairing and fidelity reports.
//! * [`tuneharness`] runs sequential and batch model-based tuners over datasets.
//! * [`influence`] performs option ablation and k-means based influence detection.
//! * [`ranker`] is the learning-to-rank predictor of useful model-tuner pairs.
//! * [`report`] defines the common serialized report envelope.

pub mod dataspace;
pub mod dominance;
pub mod influence;
pub mod landscape;
pub mod metrics;
pub mod ranker;
pub mod report;
pub mod rng;
pub mod surrogate;
pub mod tree;
pub mod tuneharness;

mod error;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
