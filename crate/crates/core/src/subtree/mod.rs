//! Valid-subtree patterns: enumeration, matching and corpus mining.
//!
//! A pattern is a connected, rooted piece of a canonical tree in which every
//! included node keeps all of its mandatory children. Siblings keep their
//! order; optional siblings may be skipped.

mod catalog;
mod enumerate;
mod iso;
mod pattern;

pub use catalog::{mine_catalog, temporal_support, CatalogEntry, MiningParams, SubtreeCatalog};
pub use enumerate::{
    enumerate_into, enumerate_subtrees, EnumeratedIds, Enumeration, EnumerationLimits,
    PatternArena, PatternId,
};
pub use iso::{contains, iso, match_sites, matches_at};
pub use pattern::{PatternNode, PatternSyntaxError, SubtreePattern};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubtreeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no pattern reaches the minimum support")]
    EmptyCatalog,
    #[error("question id {0} appears more than once")]
    DuplicateQuestionId(String),
    #[error("invalid mining parameters: {0}")]
    InvalidParams(String),
    #[error("malformed catalog: {0}")]
    Format(String),
}
