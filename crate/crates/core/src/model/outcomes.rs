use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// One line of an outcomes file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRecord {
    pub question_id: String,
    pub model_id: String,
    pub correct: u8,
}

/// Per (question, model) success; `None` where the model was not run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeMatrix {
    /// Ascending.
    pub question_ids: Vec<String>,
    /// Ascending.
    pub model_ids: Vec<String>,
    /// `entries[question][model]`.
    pub entries: Vec<Vec<Option<bool>>>,
}

impl OutcomeMatrix {
    pub fn from_records(records: &[OutcomeRecord]) -> Result<Self, ModelError> {
        let question_ids: Vec<String> = records
            .iter()
            .map(|r| r.question_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let model_ids: Vec<String> = records
            .iter()
            .map(|r| r.model_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let qpos: BTreeMap<&str, usize> =
            question_ids.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
        let mpos: BTreeMap<&str, usize> =
            model_ids.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
        let mut entries = vec![vec![None; model_ids.len()]; question_ids.len()];
        for r in records {
            let value = match r.correct {
                0 => false,
                1 => true,
                other => {
                    return Err(ModelError::InvalidInput(format!(
                        "{}/{}: correct must be 0 or 1, got {other}",
                        r.question_id, r.model_id
                    )))
                }
            };
            let cell = &mut entries[qpos[r.question_id.as_str()]][mpos[r.model_id.as_str()]];
            if cell.is_some_and(|v| v != value) {
                return Err(ModelError::InvalidInput(format!(
                    "{}/{}: conflicting outcomes",
                    r.question_id, r.model_id
                )));
            }
            *cell = Some(value);
        }
        Ok(OutcomeMatrix {
            question_ids,
            model_ids,
            entries,
        })
    }

    /// Parses JSONL, one [`OutcomeRecord`] per non-blank line.
    pub fn from_jsonl(text: &str) -> Result<Self, ModelError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: OutcomeRecord = serde_json::from_str(line).map_err(|e| ModelError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(r);
        }
        Self::from_records(&records)
    }

    pub fn to_records(&self) -> Vec<OutcomeRecord> {
        let mut out = Vec::new();
        for (q, row) in self.question_ids.iter().zip(&self.entries) {
            for (m, cell) in self.model_ids.iter().zip(row) {
                if let Some(v) = cell {
                    out.push(OutcomeRecord {
                        question_id: q.clone(),
                        model_id: m.clone(),
                        correct: *v as u8,
                    });
                }
            }
        }
        out
    }

    pub fn model_index(&self, model_id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == model_id)
    }

    pub fn question_index(&self, question_id: &str) -> Option<usize> {
        self.question_ids.binary_search_by(|q| q.as_str().cmp(question_id)).ok()
    }

    /// Success of one model per question, where present.
    pub fn column(&self, model_id: &str) -> Result<Vec<(String, bool)>, ModelError> {
        let m = self
            .model_index(model_id)
            .ok_or_else(|| ModelError::UnknownModel(model_id.to_string()))?;
        Ok(self
            .question_ids
            .iter()
            .zip(&self.entries)
            .filter_map(|(q, row)| row[m].map(|v| (q.clone(), v)))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels {
    pub question_ids: Vec<String>,
    pub labels: Vec<f64>,
    pub weights: Vec<f64>,
    /// Questions with no present entry among the chosen models.
    pub excluded: Vec<String>,
}

impl SoftLabels {
    pub fn len(&self) -> usize {
        self.question_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.question_ids.is_empty()
    }
}

/// Mean success over `train_models` per question, weighted by how many of
/// those models have an entry.
pub fn soft_labels(outcomes: &OutcomeMatrix, train_models: &[String]) -> Result<SoftLabels, ModelError> {
    if train_models.is_empty() {
        return Err(ModelError::InvalidInput("no training models given".into()));
    }
    let cols = train_models
        .iter()
        .map(|m| {
            outcomes
                .model_index(m)
                .ok_or_else(|| ModelError::UnknownModel(m.clone()))
        })
        .collect::<Result<BTreeSet<usize>, _>>()?;
    let mut out = SoftLabels {
        question_ids: Vec::new(),
        labels: Vec::new(),
        weights: Vec::new(),
        excluded: Vec::new(),
    };
    for (q, row) in outcomes.question_ids.iter().zip(&outcomes.entries) {
        let present: Vec<bool> = cols.iter().filter_map(|&c| row[c]).collect();
        if present.is_empty() {
            out.excluded.push(q.clone());
            continue;
        }
        let hits = present.iter().filter(|&&v| v).count();
        out.question_ids.push(q.clone());
        out.labels.push(hits as f64 / present.len() as f64);
        out.weights.push(present.len() as f64);
    }
    if out.question_ids.is_empty() {
        return Err(ModelError::NoLabels(out.excluded));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str, m: &str, c: u8) -> OutcomeRecord {
        OutcomeRecord {
            question_id: q.into(),
            model_id: m.into(),
            correct: c,
        }
    }

    #[test]
    fn labels_are_means_with_counts() {
        let o = OutcomeMatrix::from_records(&[
            rec("a", "m1", 1),
            rec("a", "m2", 1),
            rec("a", "m3", 0),
            rec("a", "m4", 0),
            rec("b", "m1", 1),
            rec("c", "m4", 1),
        ])
        .unwrap();
        let models: Vec<String> = ["m1", "m2", "m3"].map(String::from).to_vec();
        let s = soft_labels(&o, &models).unwrap();
        assert_eq!(s.question_ids, ["a", "b"]);
        assert_eq!(s.labels, [2.0 / 3.0, 1.0]);
        assert_eq!(s.weights, [3.0, 1.0]);
        assert_eq!(s.excluded, ["c"]);

        let all: Vec<String> = o.model_ids.clone();
        let s = soft_labels(&o, &all).unwrap();
        assert_eq!(s.labels[0], 0.5);
        assert_eq!(s.weights[0], 4.0);
    }

    #[test]
    fn errors() {
        let o = OutcomeMatrix::from_records(&[rec("a", "m1", 1), rec("b", "m2", 0)]).unwrap();
        assert!(matches!(soft_labels(&o, &[]), Err(ModelError::InvalidInput(_))));
        assert!(matches!(
            soft_labels(&o, &["zz".to_string()]),
            Err(ModelError::UnknownModel(_))
        ));
        let o = OutcomeMatrix::from_records(&[rec("a", "m1", 1), rec("a", "m2", 0)]).unwrap();
        let mut only = o.clone();
        only.entries[0][0] = None;
        assert!(matches!(
            soft_labels(&only, &["m1".to_string()]),
            Err(ModelError::NoLabels(_))
        ));
        assert!(OutcomeMatrix::from_records(&[rec("a", "m", 2)]).is_err());
        assert!(OutcomeMatrix::from_records(&[rec("a", "m", 1), rec("a", "m", 0)]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let text = "{\"question_id\":\"q1\",\"model_id\":\"m\",\"correct\":1}\n\n{\"question_id\":\"q0\",\"model_id\":\"m\",\"correct\":0}\n";
        let o = OutcomeMatrix::from_jsonl(text).unwrap();
        assert_eq!(o.question_ids, ["q0", "q1"]);
        assert_eq!(o.to_records().len(), 2);
        assert!(matches!(
            OutcomeMatrix::from_jsonl("{\"question_id\":1}"),
            Err(ModelError::Json { line: 1, .. })
        ));
    }
}
