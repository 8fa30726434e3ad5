use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::significance::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EloParams {
    pub base: f64,
    /// Performance spread in rating points.
    pub beta: f64,
    /// Update step.
    pub k: f64,
}

impl Default for EloParams {
    fn default() -> Self {
        EloParams {
            base: 1500.0,
            beta: 200.0,
            k: 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub winner: String,
    pub loser: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloState {
    pub params: EloParams,
    pub scores: BTreeMap<String, f64>,
    pub comparisons_applied: usize,
}

impl EloState {
    pub fn new<I, S>(items: I, params: EloParams) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        EloState {
            params,
            scores: items.into_iter().map(|i| (i.into(), params.base)).collect(),
            comparisons_applied: 0,
        }
    }

    /// Probability that the first item outperforms the second.
    pub fn expected(&self, a: f64, b: f64) -> f64 {
        normal_cdf((a - b) / (std::f64::consts::SQRT_2 * self.params.beta))
    }

    pub fn apply(&mut self, c: &Comparison) -> Result<f64, EvalError> {
        if c.winner == c.loser {
            return Err(EvalError::SelfComparison(c.winner.clone()));
        }
        let sw = *self
            .scores
            .get(&c.winner)
            .ok_or_else(|| EvalError::UnknownItem(c.winner.clone()))?;
        let sl = *self
            .scores
            .get(&c.loser)
            .ok_or_else(|| EvalError::UnknownItem(c.loser.clone()))?;
        let delta = self.params.k * (1.0 - self.expected(sw, sl));
        *self.scores.get_mut(&c.winner).unwrap() = sw + delta;
        *self.scores.get_mut(&c.loser).unwrap() = sl - delta;
        self.comparisons_applied += 1;
        Ok(delta)
    }

    /// Items by score descending, ties by id.
    pub fn ordering(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self.scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

/// Applies `comparisons` in sequence to items starting at the base score.
pub fn elo_order(items: &[String], comparisons: &[Comparison], params: EloParams) -> Result<EloState, EvalError> {
    if !(params.beta > 0.0 && params.k > 0.0) {
        return Err(EvalError::InvalidParams("beta and k must be positive".into()));
    }
    let mut state = EloState::new(items.iter().cloned(), params);
    for c in comparisons {
        state.apply(c)?;
    }
    Ok(state)
}

/// Every id named by a comparison, ascending.
pub fn items_of(comparisons: &[Comparison]) -> Vec<String> {
    let mut v: Vec<String> = comparisons
        .iter()
        .flat_map(|c| [c.winner.clone(), c.loser.clone()])
        .collect();
    v.sort();
    v.dedup();
    v
}
