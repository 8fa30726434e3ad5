use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ast::{AstCorpus, AstNode, NodeKind};
use crate::subtree::{matches_at, SubtreeCatalog};

use super::ModelError;

/// Binary presence of each catalog pattern in each program. Rows are stored
/// sparsely as ascending column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub question_ids: Vec<String>,
    pub catalog_fingerprint: String,
    pub n_features: usize,
    pub rows: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn bit(&self, row: usize, k: usize) -> bool {
        self.rows[row].binary_search(&(k as u32)).is_ok()
    }

    pub fn dense_row(&self, row: usize) -> Vec<bool> {
        let mut out = vec![false; self.n_features];
        for &k in &self.rows[row] {
            out[k as usize] = true;
        }
        out
    }

    pub fn row_of(&self, question_id: &str) -> Option<usize> {
        self.question_ids.iter().position(|q| q == question_id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("features serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    catalog_fingerprint: String,
    n_features: usize,
    rows: Vec<FeatureRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRow {
    question_id: String,
    /// One `0`/`1` character per catalog index.
    bits: String,
}

impl Serialize for FeatureMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows = self
            .question_ids
            .iter()
            .enumerate()
            .map(|(i, q)| FeatureRow {
                question_id: q.clone(),
                bits: self
                    .dense_row(i)
                    .iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect(),
            })
            .collect();
        FeatureFile {
            catalog_fingerprint: self.catalog_fingerprint.clone(),
            n_features: self.n_features,
            rows,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let file = FeatureFile::deserialize(d)?;
        let mut m = FeatureMatrix {
            question_ids: Vec::with_capacity(file.rows.len()),
            catalog_fingerprint: file.catalog_fingerprint,
            n_features: file.n_features,
            rows: Vec::with_capacity(file.rows.len()),
        };
        for row in file.rows {
            if row.bits.len() != m.n_features {
                return Err(D::Error::custom(format!(
                    "row {}: expected {} bits, found {}",
                    row.question_id,
                    m.n_features,
                    row.bits.len()
                )));
            }
            let mut idx = Vec::new();
            for (k, c) in row.bits.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => idx.push(k as u32),
                    _ => return Err(D::Error::custom(format!("row {}: bad bit {c:?}", row.question_id))),
                }
            }
            m.question_ids.push(row.question_id);
            m.rows.push(idx);
        }
        Ok(m)
    }
}

/// Sets bit k of row i exactly when catalog pattern k occurs in program i.
pub fn encode(corpus: &AstCorpus, catalog: &SubtreeCatalog) -> Result<FeatureMatrix, ModelError> {
    if corpus.canonicalization_digest != catalog.canonicalization_digest {
        return Err(ModelError::CatalogMismatch {
            expected: catalog.canonicalization_digest.clone(),
            found: corpus.canonicalization_digest.clone(),
        });
    }
    let rows = corpus
        .asts
        .par_iter()
        .map(|ast| encode_tree(&ast.root, catalog))
        .collect();
    Ok(FeatureMatrix {
        question_ids: corpus.asts.iter().map(|a| a.question_id.clone()).collect(),
        catalog_fingerprint: catalog.fingerprint(),
        n_features: catalog.len(),
        rows,
    })
}

/// Presence row for one tree. Candidate roots are looked up by (kind, label).
pub fn encode_tree(root: &AstNode, catalog: &SubtreeCatalog) -> Vec<u32> {
    let mut by_head: HashMap<(NodeKind, Option<&str>), Vec<&AstNode>> = HashMap::new();
    for node in root.walk() {
        by_head
            .entry((node.kind, node.label.as_deref()))
            .or_default()
            .push(node);
    }
    let mut row = Vec::new();
    for (k, entry) in catalog.patterns.iter().enumerate() {
        let p = entry.pattern.root();
        let hit = by_head
            .get(&(p.kind, p.label.as_deref()))
            .is_some_and(|nodes| nodes.iter().any(|n| matches_at(n, p)));
        if hit {
            row.push(k as u32);
        }
    }
    row
}
