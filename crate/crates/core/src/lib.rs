//! Medical information extraction for German clinical text.
//!
//! The crate covers the whole path from standoff-annotated documents to
//! trained models and evaluation reports:
//!
//! - [`corpus`]: parse, validate, normalize, merge and export annotations
//! - [`eval`]: strict/lenient span scoring, agreement, cross-validation folds
//! - [`embeddings`]: subword CBOW vectors, character language models, pooling
//! - [`tagger`]: BiLSTM-CRF for part-of-speech tags and concept spans
//! - [`relation`]: CNN relation classifier over concept pairs
//! - [`workbench`]: model bundles, the annotate pipeline, synthetic data, HTTP service

pub mod corpus;
pub mod error;
pub mod embeddings;
pub mod eval;
pub mod nn;
pub mod relation;
pub mod schema;
pub mod scheme;
pub mod tagger;
pub mod workbench;

pub use error::{Error, Result};
pub use schema::SchemaDefinition;
