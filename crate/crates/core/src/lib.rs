//! Byte-level BPE tokenizer training with source attribution.
//!
//! This crate trains byte-level BPE tokenizers while tracking, for every
//! candidate merge, the set of repositories and programming languages it
//! occurs in. The distinct counts feed two regularizers:
//!
//! * **priority criteria** that rescale the classic frequency objective
//!   (e.g. `freq * ln(repos) * langs`), and
//! * **merge skip thresholds** that permanently discard candidates seen in
//!   too few repositories or languages.
//!
//! Both leave inference untouched: the trained artifact is an ordinary
//! ordered merge list that encodes and decodes like any byte-level BPE.
//!
//! The crate also ships the surrounding harness: corpus ingestion with
//! repo/language attribution, intrinsic evaluation (compression rate,
//! coverage, mean token length, Gini disparity), vocabulary pruning with
//! compression curves, identifier name-part analysis, and rule-based token
//! classification.

pub mod attribution;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod escape;
pub mod metrics;
pub mod pretokenize;
pub mod pruner;
pub mod tokenizer;
pub mod trainer;

pub use corpus::Document;
pub use error::{Error, Result};
pub use tokenizer::Tokenizer;
pub use trainer::{train, PriorityCriterion, SkipCriterion, TrainConfig, TrainOutcome};

/// Token identifier. Ids 0..256 are the single bytes, reserved tokens
/// follow, then merged tokens in merge order.
pub type TokenId = u32;

/// Number of base byte tokens in every vocabulary.
pub const BYTE_ALPHABET: usize = 256;
