//! File formats, experiment manifests and pipeline commands around
//! [`vulnlab_core`].
//!
//! The `vulnlab` binary is a thin wrapper over [`commands`]; everything it
//! does is also callable from Rust.

mod binio;

pub mod artifacts;
pub mod checkpoint;
pub mod commands;
pub mod corpus_io;
pub mod dataset_io;
pub mod error;
pub mod manifest;
pub mod model_io;
pub mod render;
pub mod skipgram_io;
pub mod synth;

pub use error::{Error, Result};
