//! Ranking quality (PEG / mPEG), train/validation splits and Elo ordering.

mod elo;
mod peg;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use elo::{elo_order, items_of, Comparison, EloParams, EloState};
pub use peg::{
    default_grid, mpeg, n_alpha, peg, peg_curve, peg_report, MetricRanking, ModelPeg, PegReport,
    SIGN_CONVENTION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("alpha {0} outside (0, 0.5]")]
    InvalidAlpha(f64),
    #[error("alpha {alpha} selects no question out of {n}")]
    TooFewQuestions { alpha: f64, n: usize },
    #[error("alpha grid is empty")]
    EmptyGrid,
    #[error("score for {0} is not finite")]
    NonFiniteScore(String),
    #[error("question {0} ranked twice")]
    DuplicateQuestion(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("item {0} compared with itself")]
    SelfComparison(String),
    #[error("{0}")]
    InvalidParams(String),
}

/// Model and question partition used to train metrics and evaluate them on
/// held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_models: Vec<String>,
    pub val_models: Vec<String>,
}

impl Split {
    /// Deterministic question partition: ids are sorted, shuffled with the
    /// seed, and the first ⌊fraction·N⌉ go to training. Both halves come back
    /// sorted.
    pub fn questions(&self, ids: &[String]) -> Result<(Vec<String>, Vec<String>), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::InvalidParams("train_fraction must lie in (0, 1)".into()));
        }
        let mut all: Vec<String> = ids.to_vec();
        all.sort();
        all.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        all.shuffle(&mut rng);
        let cut = (self.train_fraction * all.len() as f64).round() as usize;
        let mut train = all[..cut].to_vec();
        let mut val = all[cut..].to_vec();
        train.sort();
        val.sort();
        Ok((train, val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let split = Split {
            seed: 7,
            train_fraction: 0.8,
            train_models: vec!["a".into()],
            val_models: vec!["b".into()],
        };
        let ids: Vec<String> = (0..100).map(|i| format!("q{i}")).collect();
        let (t, v) = split.questions(&ids).unwrap();
        assert_eq!((t.len(), v.len()), (80, 20));
        assert!(v.iter().all(|q| t.binary_search(q).is_err()));
        let mut shuffled = ids.clone();
        shuffled.reverse();
        assert_eq!(split.questions(&shuffled).unwrap(), (t, v));
    }
}
