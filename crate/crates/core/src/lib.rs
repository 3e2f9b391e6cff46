//! Algorithms behind the `vulnlab` vulnerability-detection pipeline.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds without `std` (an allocator is required). File formats, corpus
//! loaders and the command line live in the `vulnlab` crate.
//!
//! The pipeline, in order:
//!
//! 1. [`corpus`]: labeled source units and vulnerable character spans,
//!    including span derivation from security-fix patch pairs.
//! 2. [`lexer`]: comment stripping with an offset map, then a
//!    deterministic Python-oriented tokenizer.
//! 3. [`embeddings`]: skip-gram training and lookup, and a frozen
//!    RoBERTa-family encoder for contextual token vectors.
//! 4. [`datasets`]: sliding windows, vectorization, stratified splits and
//!    balanced class weights.
//! 5. [`models`]: the BiLSTM and CNN classifiers with their training loop.
//! 6. [`eval`]: confusion counts, metrics, ROC/AUC and comparison grids.
#![no_std]
#![warn(rust_2018_idioms)]

extern crate alloc;

pub mod category;
pub mod corpus;
pub mod datasets;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod lexer;
pub(crate) mod math;
pub mod models;
pub mod nn;
pub mod tensor;

pub use category::VulnerabilityCategory;
pub use error::{Error, Result};
