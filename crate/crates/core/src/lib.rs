//! Complex word identification toolkit.
//!
//! Binary classification of target words and multi-word expressions as
//! complex or not: shared-task corpus loading, feature extraction, a
//! deterministic L2 logistic regression, Macro-F1 evaluation, the monolingual
//! and cross-lingual experiment suites, greedy feature ablation, and an
//! MWE annotation consistency analysis.

pub mod annotate;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod resources;

pub use error::{Error, Result};
