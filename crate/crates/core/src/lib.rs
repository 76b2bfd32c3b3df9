//! Patent corpus engineering toolkit.
//!
//! The crate is organised along the stages of the preprocessing pipeline:
//!
//! - [`corpus`]: record/field data model, streaming JSONL I/O and stage ledgers.
//! - [`phase1`]: markup and character cleanup, boilerplate and figure-reference
//!   removal, first-independent-claim selection and family-level deduplication.
//! - [`filters`]: per-field language identification and repetition/quality heuristics.
//! - [`minhash`]: word-shingle MinHash signatures, 14x8 LSH banding and
//!   union-find clustering for near-duplicate removal.
//! - [`bpe`]: from-scratch byte-pair-encoding tokenizer with NFKC+lowercase normalization.
//! - [`mlm`]: masked-LM example generation, learning-rate schedules and hyperparameter presets.
//! - [`pipeline`]: resumable stage orchestration, run manifests and the reductions report.
//!
//! Per-document work is data-parallel through [`par`]; building without the
//! default `parallel` feature gives a sequential build with identical outputs.

pub mod bpe;
pub mod corpus;
pub mod error;
pub mod extsort;
pub mod filters;
pub mod minhash;
pub mod mlm;
pub mod par;
pub mod phase1;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
