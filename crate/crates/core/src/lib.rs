//! Two-stage drug repurposing pipeline.
//!
//! Drug feature vectors are cleaned ([`preprocess`]), compressed by a
//! dimension-halving [`autoencoder`], and grouped by deep embedded clustering
//! ([`dec`]). Each cluster then becomes a bipartite drug–disease [`graph`] on
//! which a two-relation SAGE-style [`gnn`] is trained to score links. The
//! [`pipeline`] module ties the stages together and writes ranked predictions.
//!
//! All numerics run on a small deterministic dense engine ([`numerics`]) in
//! 64-bit floating point; every random draw comes from a labelled, seeded
//! stream so runs are reproducible bit for bit.

pub mod autoencoder;
pub mod checkpoint;
pub mod dec;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};
