//! Vector-similarity retrieval with one round of binary relevance feedback.
//!
//! The pipeline runs a plain cosine K-NN retrieval, collects a relevant /
//! irrelevant bit for every returned item, builds a 1-NN preference
//! classifier over those rated items, and re-runs the retrieval keeping only
//! candidates the classifier predicts as relevant.
//!
//! Modules:
//!
//! * [`store`]: feature matrices, label manifests and their on-disk formats.
//! * [`engine`]: K-NN retrieval, the preference classifier, refined retrieval
//!   and similarity-evaluation counting.
//! * [`harness`]: simulated-feedback evaluation with disjoint feedback and test
//!   databases, over seeded stratified splits.
//! * [`metrics`]: Recall@K, MAP@R, seed aggregation and feedback correlation.

pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod store;

pub use error::{Error, Result};
