//! Subtree-presence features and the logistic complexity scorer.

mod features;
mod fit;
pub mod lbfgs;
mod outcomes;

pub use features::{encode, encode_tree, FeatureMatrix};
pub use fit::{
    fit, fit_set, objective, sigmoid, softplus, ComplexityModel, FitOptions, FitReport, TrainingSet,
};
pub use outcomes::{soft_labels, OutcomeMatrix, OutcomeRecord, SoftLabels};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("catalog mismatch: expected {expected}, found {found}")]
    CatalogMismatch { expected: String, found: String },
    #[error("no labels for {} question(s)", .0.len())]
    NoLabels(Vec<String>),
    #[error("solver stopped after {iterations} iterations with gradient norm {gradient_norm:e}")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("unknown model id {0}")]
    UnknownModel(String),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("{0}")]
    InvalidInput(String),
}
