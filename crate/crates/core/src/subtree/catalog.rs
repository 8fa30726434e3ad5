use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ast::CanonicalAst;
use crate::digest;

use super::enumerate::{enumerate_into, EnumerationLimits, PatternArena, PatternId};
use super::{contains, SubtreeError, SubtreePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningParams {
    pub max_nodes: usize,
    pub min_support: usize,
    pub per_node_cap: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            max_nodes: 15,
            min_support: 5,
            per_node_cap: 20_000,
        }
    }
}

impl MiningParams {
    pub fn limits(&self) -> EnumerationLimits {
        EnumerationLimits {
            max_nodes: self.max_nodes,
            per_node_cap: self.per_node_cap,
        }
    }

    fn validate(&self) -> Result<(), SubtreeError> {
        if self.max_nodes == 0 || self.per_node_cap == 0 || self.min_support == 0 {
            return Err(SubtreeError::InvalidParams(
                "max_nodes, min_support and per_node_cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub index: usize,
    pub pattern: SubtreePattern,
    pub fingerprint: String,
    pub node_count: usize,
    pub support: usize,
    /// Question ids, ascending.
    pub occurrences: Vec<String>,
}

/// Mined patterns, ordered by size then canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeCatalog {
    pub params: MiningParams,
    pub canonicalization_digest: String,
    /// Programs in which at least one node hit the per-node cap.
    pub truncated_programs: Vec<String>,
    pub patterns: Vec<CatalogEntry>,
}

impl SubtreeCatalog {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Digest over the ordered canonical forms; feature matrices carry it.
    pub fn fingerprint(&self) -> String {
        let forms: Vec<&str> = self.patterns.iter().map(|e| e.pattern.canonical()).collect();
        digest::of_json(&forms)
    }

    pub fn pattern(&self, k: usize) -> &SubtreePattern {
        &self.patterns[k].pattern
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("catalog serializes");
        s.push('\n');
        s
    }

    /// Parses and re-checks the stored invariants.
    pub fn from_json(text: &str) -> Result<Self, SubtreeError> {
        let cat: SubtreeCatalog =
            serde_json::from_str(text).map_err(|e| SubtreeError::Format(e.to_string()))?;
        cat.check()?;
        Ok(cat)
    }

    pub fn check(&self) -> Result<(), SubtreeError> {
        let bad = |msg: String| Err(SubtreeError::Format(msg));
        let mut seen = HashSet::new();
        for (k, e) in self.patterns.iter().enumerate() {
            if e.index != k {
                return bad(format!("pattern {k} stored with index {}", e.index));
            }
            if e.fingerprint != e.pattern.fingerprint() || e.node_count != e.pattern.node_count() {
                return bad(format!("pattern {k}: fingerprint or size does not match its form"));
            }
            if !seen.insert(e.pattern.canonical()) {
                return bad(format!("pattern {k} duplicated"));
            }
            if e.support != e.occurrences.len() || e.support < self.params.min_support {
                return bad(format!("pattern {k}: inconsistent support"));
            }
            if e.occurrences.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("pattern {k}: occurrences not sorted and distinct"));
            }
        }
        Ok(())
    }
}

/// Mines the frequent valid subtrees of `corpus` and merges patterns that
/// always co-occur with a larger pattern containing them.
pub fn mine_catalog(
    corpus: &[CanonicalAst],
    canonicalization_digest: &str,
    params: MiningParams,
) -> Result<SubtreeCatalog, SubtreeError> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(SubtreeError::EmptyCorpus);
    }
    let mut ids = HashSet::new();
    for ast in corpus {
        if !ids.insert(ast.question_id.as_str()) {
            return Err(SubtreeError::DuplicateQuestionId(ast.question_id.clone()));
        }
    }

    // Per-program enumeration is independent; arenas are folded in corpus
    // order so global ids do not depend on scheduling.
    let limits = params.limits();
    let local: Vec<(PatternArena, Vec<PatternId>, usize)> = corpus
        .par_iter()
        .map(|ast| {
            let mut arena = PatternArena::new();
            let found = enumerate_into(&mut arena, &ast.root, limits);
            (arena, found.ids, found.truncated_nodes)
        })
        .collect();

    let mut global = PatternArena::new();
    let mut occurrences: HashMap<PatternId, Vec<u32>> = HashMap::new();
    let mut truncated_programs = Vec::new();
    for (program, (arena, found, truncated)) in local.into_iter().enumerate() {
        let map = global.absorb(&arena);
        for id in found {
            occurrences.entry(map[id as usize]).or_default().push(program as u32);
        }
        if truncated > 0 {
            truncated_programs.push(corpus[program].question_id.clone());
        }
    }
    truncated_programs.sort();

    // Frequent patterns grouped by occurrence set.
    let mut groups: BTreeMap<Vec<String>, Vec<SubtreePattern>> = BTreeMap::new();
    for (id, programs) in occurrences {
        if programs.len() < params.min_support {
            continue;
        }
        let mut qids: Vec<String> =
            programs.iter().map(|&p| corpus[p as usize].question_id.clone()).collect();
        qids.sort();
        groups.entry(qids).or_default().push(global.pattern(id));
    }
    if groups.is_empty() {
        return Err(SubtreeError::EmptyCatalog);
    }

    let merged: Vec<(Vec<String>, Vec<SubtreePattern>)> = groups
        .into_par_iter()
        .map(|(qids, group)| (qids, keep_maximal(group)))
        .collect();

    let mut entries: Vec<(SubtreePattern, Vec<String>)> = merged
        .into_iter()
        .flat_map(|(qids, kept)| kept.into_iter().map(move |p| (p, qids.clone())))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));

    let patterns = entries
        .into_iter()
        .enumerate()
        .map(|(index, (pattern, occurrences))| CatalogEntry {
            index,
            fingerprint: pattern.fingerprint(),
            node_count: pattern.node_count(),
            support: occurrences.len(),
            pattern,
            occurrences,
        })
        .collect();

    Ok(SubtreeCatalog {
        params,
        canonicalization_digest: canonicalization_digest.to_string(),
        truncated_programs,
        patterns,
    })
}

/// Drops every pattern contained in a larger one of the same group.
fn keep_maximal(mut group: Vec<SubtreePattern>) -> Vec<SubtreePattern> {
    group.sort_by(|a, b| b.node_count().cmp(&a.node_count()).then_with(|| a.cmp(b)));
    let mut kept: Vec<SubtreePattern> = Vec::new();
    for p in group {
        if !kept.iter().any(|k| k.node_count() > p.node_count() && contains(k, &p)) {
            kept.push(p);
        }
    }
    kept
}

/// Tree nodes at which any of `patterns` matches, each node counted once.
pub fn temporal_support(ast: &CanonicalAst, patterns: &[SubtreePattern]) -> usize {
    ast.root
        .walk()
        .filter(|node| patterns.iter().any(|p| super::matches_at(node, p.root())))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{AstNode, NodeKind};

    fn for_call(qid: &str) -> CanonicalAst {
        CanonicalAst::new(
            qid,
            AstNode::with(
                NodeKind::For,
                vec![
                    AstNode::leaf(NodeKind::NamePlaceholder),
                    AstNode::with(NodeKind::Call, vec![AstNode::api("frame_iterator")]),
                ],
            ),
        )
    }

    fn params(min_support: usize) -> MiningParams {
        MiningParams {
            min_support,
            ..MiningParams::default()
        }
    }

    #[test]
    fn identical_programs_keep_only_the_largest() {
        let corpus = [for_call("a"), for_call("b")];
        let cat = mine_catalog(&corpus, "d", params(2)).unwrap();
        let forms: Vec<_> = cat.patterns.iter().map(|e| e.pattern.canonical()).collect();
        assert_eq!(forms, ["For(NamePlaceholder Call(ApiName[frame_iterator]))"]);
        assert_eq!(cat.patterns[0].occurrences, ["a", "b"]);
    }

    #[test]
    fn disjoint_occurrences_both_kept() {
        let brk = |q: &str| CanonicalAst::new(q, AstNode::leaf(NodeKind::Break));
        let cont = |q: &str| CanonicalAst::new(q, AstNode::leaf(NodeKind::Continue));
        let corpus = [brk("a"), brk("b"), cont("c"), cont("d")];
        let cat = mine_catalog(&corpus, "d", params(2)).unwrap();
        let forms: Vec<_> = cat.patterns.iter().map(|e| e.pattern.canonical()).collect();
        assert_eq!(forms, ["Break", "Continue"]);
    }

    #[test]
    fn subpattern_with_wider_support_survives() {
        let corpus = [
            for_call("a"),
            for_call("b"),
            CanonicalAst::new("c", AstNode::with(NodeKind::Call, vec![AstNode::api("frame_iterator")])),
        ];
        let cat = mine_catalog(&corpus, "d", params(2)).unwrap();
        let forms: Vec<_> = cat.patterns.iter().map(|e| e.pattern.canonical()).collect();
        assert_eq!(
            forms,
            [
                "Call(ApiName[frame_iterator])",
                "For(NamePlaceholder Call(ApiName[frame_iterator]))"
            ]
        );
        assert_eq!(cat.patterns[0].support, 3);
    }

    #[test]
    fn empty_catalog_and_corpus_errors() {
        assert_eq!(mine_catalog(&[], "d", params(1)), Err(SubtreeError::EmptyCorpus));
        assert_eq!(
            mine_catalog(&[for_call("a")], "d", params(2)),
            Err(SubtreeError::EmptyCatalog)
        );
        assert!(matches!(
            mine_catalog(&[for_call("a"), for_call("a")], "d", params(1)),
            Err(SubtreeError::DuplicateQuestionId(_))
        ));
    }

    #[test]
    fn json_round_trip_and_check() {
        let corpus = [for_call("a"), for_call("b")];
        let cat = mine_catalog(&corpus, "d", params(2)).unwrap();
        let text = cat.to_json();
        assert_eq!(SubtreeCatalog::from_json(&text).unwrap(), cat);
        let tampered = text.replace("\"support\": 2", "\"support\": 3");
        assert!(SubtreeCatalog::from_json(&tampered).is_err());
    }

    #[test]
    fn temporal_support_counts_sites() {
        let store = SubtreePattern::parse("Call(ApiName[frame_iterator])").unwrap();
        let ast = CanonicalAst::new(
            "q",
            AstNode::with(
                NodeKind::FunctionDef,
                vec![
                    for_call("x").root,
                    AstNode::leaf(NodeKind::Break),
                    for_call("y").root,
                ],
            ),
        );
        assert_eq!(temporal_support(&ast, std::slice::from_ref(&store)), 2);
        assert_eq!(temporal_support(&for_call("z"), &[]), 0);
    }
}
