use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Questions sorted from hardest to easiest under some metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub metric: String,
    pub question_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl MetricRanking {
    /// Orders by score descending (higher = harder), ties by question id.
    pub fn from_scores(metric: &str, scores: &[(String, f64)]) -> Result<Self, EvalError> {
        if let Some((q, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore(q.clone()));
        }
        let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(EvalError::DuplicateQuestion(w[0].0.clone()));
            }
        }
        Ok(MetricRanking {
            metric: metric.to_string(),
            question_ids: sorted.iter().map(|(q, _)| q.clone()).collect(),
            scores: Some(sorted.iter().map(|(_, s)| *s).collect()),
        })
    }

    /// Keeps only the listed questions, preserving order.
    pub fn restrict(&self, keep: &dyn Fn(&str) -> bool) -> MetricRanking {
        let idx: Vec<usize> = (0..self.question_ids.len())
            .filter(|&i| keep(&self.question_ids[i]))
            .collect();
        MetricRanking {
            metric: self.metric.clone(),
            question_ids: idx.iter().map(|&i| self.question_ids[i].clone()).collect(),
            scores: self
                .scores
                .as_ref()
                .map(|s| idx.iter().map(|&i| s[i]).collect()),
        }
    }

    pub fn reversed(&self) -> MetricRanking {
        let mut r = self.clone();
        r.question_ids.reverse();
        if let Some(s) = &mut r.scores {
            s.reverse();
        }
        r
    }
}

/// Number of questions in each extreme: ⌊α·N⌋, tolerant to α·N landing a
/// hair below an integer.
pub fn n_alpha(alpha: f64, n: usize) -> usize {
    (alpha * n as f64 + 1e-9).floor() as usize
}

/// Success rate of the easiest ⌊αN⌋ questions minus that of the hardest,
/// in percentage points. Questions without an outcome are dropped first.
pub fn peg(ranking: &MetricRanking, outcomes: &HashMap<String, bool>, alpha: f64) -> Result<f64, EvalError> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(EvalError::InvalidAlpha(alpha));
    }
    let seq: Vec<bool> = ranking
        .question_ids
        .iter()
        .filter_map(|q| outcomes.get(q).copied())
        .collect();
    let k = n_alpha(alpha, seq.len());
    if k == 0 {
        return Err(EvalError::TooFewQuestions {
            alpha,
            n: seq.len(),
        });
    }
    let rate = |xs: &[bool]| xs.iter().filter(|&&b| b).count() as f64 / xs.len() as f64;
    let hardest = rate(&seq[..k]);
    let easiest = rate(&seq[seq.len() - k..]);
    Ok(100.0 * (easiest - hardest))
}

/// Ten evenly spaced fractions 0.05, 0.10, …, 0.50.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

pub fn mpeg(ranking: &MetricRanking, outcomes: &HashMap<String, bool>, grid: &[f64]) -> Result<f64, EvalError> {
    Ok(peg_curve(ranking, outcomes, grid)?.iter().sum::<f64>() / grid.len() as f64)
}

pub fn peg_curve(ranking: &MetricRanking, outcomes: &HashMap<String, bool>, grid: &[f64]) -> Result<Vec<f64>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    grid.iter().map(|&a| peg(ranking, outcomes, a)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPeg {
    pub model_id: String,
    pub n_questions: usize,
    pub peg: Vec<f64>,
    pub mpeg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PegReport {
    pub metric: String,
    pub alpha_grid: Vec<f64>,
    /// PEG is easiest-minus-hardest, so predictive metrics score positive.
    pub sign_convention: String,
    pub models: Vec<ModelPeg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<super::Split>,
}

pub const SIGN_CONVENTION: &str =
    "easiest minus hardest (percentage points); positive means the metric ranks failures as harder";

/// PEG curve and mPEG of one ranking for each model.
pub fn peg_report(
    ranking: &MetricRanking,
    per_model: &[(String, HashMap<String, bool>)],
    grid: &[f64],
) -> Result<PegReport, EvalError> {
    let mut models = Vec::with_capacity(per_model.len());
    for (model_id, outcomes) in per_model {
        let curve = peg_curve(ranking, outcomes, grid)?;
        let n = ranking
            .question_ids
            .iter()
            .filter(|q| outcomes.contains_key(*q))
            .count();
        models.push(ModelPeg {
            model_id: model_id.clone(),
            n_questions: n,
            mpeg: curve.iter().sum::<f64>() / curve.len() as f64,
            peg: curve,
        });
    }
    Ok(PegReport {
        metric: ranking.metric.clone(),
        alpha_grid: grid.to_vec(),
        sign_convention: SIGN_CONVENTION.to_string(),
        models,
        split: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> (MetricRanking, HashMap<String, bool>) {
        let ids: Vec<String> = (1..=10).map(|i| format!("q{i:02}")).collect();
        let ranking = MetricRanking {
            metric: "m".into(),
            question_ids: ids.clone(),
            scores: None,
        };
        let outcomes = ids.iter().enumerate().map(|(i, q)| (q.clone(), i >= 5)).collect();
        (ranking, outcomes)
    }

    #[test]
    fn hand_example() {
        let (r, o) = ten();
        assert_eq!(peg(&r, &o, 0.5).unwrap(), 100.0);
        assert_eq!(peg(&r.reversed(), &o, 0.5).unwrap(), -100.0);
        // α = 0.3: 3 easiest all right, 3 hardest all wrong
        assert_eq!(peg(&r, &o, 0.3).unwrap(), 100.0);
    }

    #[test]
    fn constant_outcomes_are_zero() {
        let ids: Vec<String> = (0..20).map(|i| format!("q{i:02}")).collect();
        let r = MetricRanking {
            metric: "m".into(),
            question_ids: ids.clone(),
            scores: None,
        };
        let o = ids.iter().map(|q| (q.clone(), true)).collect();
        assert_eq!(mpeg(&r, &o, &default_grid()).unwrap(), 0.0);
    }

    #[test]
    fn too_few_and_bad_alpha() {
        let (r, o) = ten();
        assert!(matches!(peg(&r, &o, 0.05), Err(EvalError::TooFewQuestions { .. })));
        assert!(matches!(peg(&r, &o, 0.6), Err(EvalError::InvalidAlpha(_))));
        assert!(matches!(mpeg(&r, &o, &[]), Err(EvalError::EmptyGrid)));
    }

    #[test]
    fn n_alpha_tolerates_rounding() {
        assert_eq!(n_alpha(0.7, 10), 7);
        assert_eq!(n_alpha(0.3, 10), 3);
        assert_eq!(n_alpha(0.05, 100), 5);
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        let scores = vec![("b".to_string(), 0.5), ("a".to_string(), 0.5), ("c".to_string(), 0.9)];
        let r = MetricRanking::from_scores("s", &scores).unwrap();
        assert_eq!(r.question_ids, ["c", "a", "b"]);
        let bad = vec![("x".to_string(), f64::NAN)];
        assert!(MetricRanking::from_scores("s", &bad).is_err());
        let dup = vec![("x".to_string(), 1.0), ("x".to_string(), 2.0)];
        assert!(MetricRanking::from_scores("s", &dup).is_err());
    }

    #[test]
    fn missing_outcomes_are_dropped() {
        let (r, mut o) = ten();
        o.remove("q01");
        o.remove("q10");
        // 8 left: q02..q05 wrong, q06..q09 right
        assert_eq!(peg(&r, &o, 0.5).unwrap(), 100.0);
        assert_eq!(peg(&r, &o, 0.25).unwrap(), 100.0);
    }
}
