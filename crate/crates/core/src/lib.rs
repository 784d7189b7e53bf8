//! Core algorithms for multi-vector similarity search with learned
//! single-vector reductions.
//!
//! Queries and documents are sets of token embeddings scored by MaxSim
//! (Chamfer) similarity. This crate reduces top-k MaxSim search to
//! single-vector maximum-inner-product search: a small MLP is trained so
//! that its hidden layer encodes tokens, pooled hidden activations encode
//! queries, and the rows of its output layer become learned document
//! vectors. Retrieval then runs MIPS over the output rows followed by
//! exact MaxSim reranking.
//!
//! The crate is `no_std`-compatible (`alloc` required); all I/O, file
//! formats, threading, and the CLI live in the companion `lemur` crate.
//!
//! Module map:
//! - [`corpus`]: token-embedding data model and sampling utilities
//! - [`maxsim`]: exact MaxSim kernel, brute-force oracle, recall
//! - [`model`]: the two-layer MLP, pooling, and training-set construction
//! - [`train`]: Adam training loop with a hand-derived backward pass
//! - [`ols`]: closed-form least-squares fit of the full output layer
//! - [`mips`]: exact-scan and graph-based inner-product search

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod linalg;
pub mod maxsim;
pub mod mips;
pub mod model;
pub mod ols;
pub mod rng;
pub mod train;

pub use corpus::{Corpus, MultiVectorDoc, TokenView};
pub use error::{Error, Result};
pub use linalg::Mat;
pub use maxsim::{GroundTruth, ScoredDoc};
pub use mips::{BuildParams, MipsIndex, SearchParams};
pub use model::{EncoderParams, LemurModel, TrainConfig, TrainingSet};
pub use ols::OlsConfig;
pub use rng::Rng;
