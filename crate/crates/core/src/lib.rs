//! Implicit-bias auditing for tabular classifiers.
//!
//! The pipeline trains a random forest, explains single predictions with
//! Shapley attributions, builds a feature-association graph from the data,
//! and propagates the attributions through a quasi-nonlinear fuzzy cognitive
//! map. Protected features whose activation grows during the simulation are
//! implicitly encoded by the unprotected ones, even when their own attribution
//! is small.
//!
//! Modules follow the pipeline stages:
//!
//! - [`dataset`]: CSV ingestion with declared schemas, normalization, stratified splits
//! - [`association`]: Pearson, Cramér's V, fuzzy c-means discretization, weight matrix
//! - [`fcm`]: reasoning rule, attractor classification, eigen diagnostics
//! - [`forest`]: random forest classifier and grid tuning
//! - [`shapley`]: exact and kernel Shapley attributions
//! - [`audit`]: end-to-end orchestration and bias reports

pub mod association;
pub mod audit;
pub mod dataset;
pub mod error;
pub mod fcm;
pub mod forest;
pub mod matrix;
pub mod shapley;

pub use error::{Error, Result};
