use alloc::string::String;

use crate::graph::{Split, Triple};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("entity id {id} out of range (entity count {count})")]
    EntityOutOfRange { id: u32, count: usize },
    #[error("relation id {id} out of range (relation count {count})")]
    RelationOutOfRange { id: u32, count: usize },
    #[error("duplicate triple {triple} in {split} split")]
    DuplicateTriple { split: Split, triple: Triple },
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("{0} must be positive")]
    ZeroDimension(&'static str),
    #[error("duplicate feature record for entity {0}")]
    DuplicateFeature(u32),
    #[error("non-finite feature value for entity {0}")]
    NonFiniteFeature(u32),
    #[error("cannot split {len} triples into {n_batches} batches")]
    InvalidBatchCount { n_batches: usize, len: usize },
    #[error("negative sampling needs at least 2 entities, graph has {0}")]
    NotEnoughEntities(usize),
    #[error("score mask must enable at least one component")]
    EmptyMask,
    #[error("unknown score component `{0}`")]
    UnknownComponent(String),
    #[error("{positives} positives but negatives cover {negatives}")]
    NegativeCountMismatch { positives: usize, negatives: usize },
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
