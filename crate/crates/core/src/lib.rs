//! Figure ranking toolkit for scientific documents.
//!
//! The pipeline mines `(caption, positive paragraph, negative paragraph)`
//! triplets from inline references such as "Figure 3" in a paper's body,
//! trains a small cross-encoder with a margin loss on them, and ranks a
//! paper's figures against its abstract. Scorers return a *cost*: lower
//! means a better text/figure match, and rankings sort ascending.
//!
//! Modules follow the data flow:
//!
//! - [`corpus`]: documents, figures, gold annotations, ranked lists.
//! - [`ingest`]: sentence splitting, mention grammar, mention index.
//! - [`pairs`]: self-supervised triplet mining.
//! - [`scoring`]: TF-IDF and neural scorers, margin loss, training.
//! - [`ranking`]: figure ranking, baselines, metrics, agreement.
//! - [`attention`]: attention-map similarity and cross-segment inspection.
//! - [`annotation`]: append-only annotation store behind the labeling service.
//! - [`synthetic`]: seeded corpora with a known answer, for tests and demos.

pub mod annotation;
pub mod attention;
pub mod corpus;
pub mod error;
pub mod ingest;
pub mod jsonl;
pub mod pairs;
pub mod ranking;
pub mod scoring;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
