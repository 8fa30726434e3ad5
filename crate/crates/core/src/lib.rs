//! Estimating question complexity from generated visual programs.

pub mod ast;
pub mod digest;
pub mod evaluation;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod significance;
pub mod subtree;
