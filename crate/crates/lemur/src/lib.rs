//! Multi-vector retrieval engine built on [`lemur_core`]: binary file
//! formats, synthetic data generation, the end-to-end query pipeline,
//! and the recall/QPS benchmark harness. The `lemur` binary wires these
//! into reproducible experiment runs.

pub mod bench;
pub mod error;
pub mod format;
pub mod manifest;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use pipeline::{LemurIndex, MipsMode, QueryResult, QueryTiming};
