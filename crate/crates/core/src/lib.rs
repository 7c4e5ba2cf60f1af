//! Multimodal knowledge-graph embedding engine.
//!
//! Every entity carries two embeddings: a trainable structural vector and a
//! multimodal vector obtained by linearly projecting a fixed, pretrained
//! feature. Triples are scored by five TransE terms that mix the two kinds
//! (`ss`, `mm`, `sm`, `ms`, `all`), trained with a margin-rank objective
//! under either normal or twins negative sampling, and evaluated with the
//! filtered link-prediction protocol (MRR, Hit@K).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel evaluation live in the `mmkge` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adam;
pub mod batch;
mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod params;
mod real;
pub mod rng;
pub mod sampler;
pub mod score;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use eval::{Direction, EvalConfig, Metrics, ProjectionMode, RankPair, TieRule};
pub use features::{FeatureTable, Provenance};
pub use graph::{KnowledgeGraph, KnownIndex, Split, SplitSet, Triple};
pub use params::{Dims, ModelParams};
pub use real::Real;
pub use sampler::{
    CorruptionSide, Mode, NegativeBatch, NegativeSample, Negatives, SamplerConfig, Slot, Strategy, TwinsDraw,
};
pub use score::{Component, NormOrder, ScoreMask};
pub use train::{EpochReport, LossVariant, TrainConfig, TrainOutcome};
