use std::collections::{HashMap, HashSet};

use crate::ast::{AstNode, NodeKind};

use super::{pattern::write_head, PatternNode, SubtreePattern};

pub type PatternId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    kind: NodeKind,
    label: Option<u32>,
    children: Box<[PatternId]>,
}

/// Hash-consed store of patterns. Structurally equal patterns share an id and
/// children are always interned before their parents.
#[derive(Debug, Default)]
pub struct PatternArena {
    keys: Vec<Key>,
    sizes: Vec<u32>,
    index: HashMap<Key, PatternId>,
    labels: Vec<String>,
    label_index: HashMap<String, u32>,
}

impl PatternArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn size(&self, id: PatternId) -> usize {
        self.sizes[id as usize] as usize
    }

    fn label_id(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.label_index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), id);
        id
    }

    fn intern(&mut self, key: Key) -> PatternId {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let size = 1 + key.children.iter().map(|&c| self.sizes[c as usize]).sum::<u32>();
        let id = self.keys.len() as PatternId;
        self.keys.push(key.clone());
        self.sizes.push(size);
        self.index.insert(key, id);
        id
    }

    /// Re-interns every pattern of `other` here; returns the id translation.
    pub fn absorb(&mut self, other: &PatternArena) -> Vec<PatternId> {
        let mut map = Vec::with_capacity(other.keys.len());
        for key in &other.keys {
            let label = key
                .label
                .map(|l| self.label_id(&other.labels[l as usize]));
            let children = key.children.iter().map(|&c| map[c as usize]).collect();
            map.push(self.intern(Key {
                kind: key.kind,
                label,
                children,
            }));
        }
        map
    }

    pub fn pattern_node(&self, id: PatternId) -> PatternNode {
        let key = &self.keys[id as usize];
        PatternNode::new(
            key.kind,
            key.label.map(|l| self.labels[l as usize].clone()),
            key.children.iter().map(|&c| self.pattern_node(c)).collect(),
        )
    }

    pub fn pattern(&self, id: PatternId) -> SubtreePattern {
        SubtreePattern::new(self.pattern_node(id))
    }

    pub fn canonical(&self, id: PatternId) -> String {
        let mut out = String::new();
        self.write_canonical(id, &mut out);
        out
    }

    fn write_canonical(&self, id: PatternId, out: &mut String) {
        let key = &self.keys[id as usize];
        write_head(out, key.kind, key.label.map(|l| self.labels[l as usize].as_str()));
        if !key.children.is_empty() {
            out.push('(');
            for (i, &c) in key.children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                self.write_canonical(c, out);
            }
            out.push(')');
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_nodes: usize,
    /// Most patterns kept per root node; smaller patterns are kept first.
    pub per_node_cap: usize,
}

/// Pattern ids found in one tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumeratedIds {
    /// Distinct ids, ascending.
    pub ids: Vec<PatternId>,
    /// Tree nodes whose pattern set hit the cap.
    pub truncated_nodes: usize,
}

/// Interns every valid pattern of `root` with at most `max_nodes` nodes.
pub fn enumerate_into(
    arena: &mut PatternArena,
    root: &AstNode,
    limits: EnumerationLimits,
) -> EnumeratedIds {
    assert!(limits.max_nodes >= 1 && limits.per_node_cap >= 1);
    let mut walk = Walk {
        arena,
        limits,
        seen: HashSet::new(),
        truncated_nodes: 0,
    };
    walk.visit(root);
    let mut ids: Vec<PatternId> = walk.seen.into_iter().collect();
    ids.sort_unstable();
    EnumeratedIds {
        ids,
        truncated_nodes: walk.truncated_nodes,
    }
}

/// Every valid pattern of `root` with at most `max_nodes` nodes, ordered by
/// size then canonical text, plus whether any node was truncated.
pub fn enumerate_subtrees(root: &AstNode, limits: EnumerationLimits) -> Enumeration {
    let mut arena = PatternArena::new();
    let found = enumerate_into(&mut arena, root, limits);
    let mut patterns: Vec<SubtreePattern> = found.ids.iter().map(|&id| arena.pattern(id)).collect();
    patterns.sort();
    Enumeration {
        patterns,
        truncated_nodes: found.truncated_nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub patterns: Vec<SubtreePattern>,
    pub truncated_nodes: usize,
}

impl Enumeration {
    pub fn truncated(&self) -> bool {
        self.truncated_nodes > 0
    }
}

/// Patterns rooted at one node, bucketed by size (index = size - 1).
type BySize = Vec<Vec<PatternId>>;

struct Walk<'a> {
    arena: &'a mut PatternArena,
    limits: EnumerationLimits,
    seen: HashSet<PatternId>,
    truncated_nodes: usize,
}

struct Combine<'a> {
    kids: &'a [BySize],
    mandatory: &'a [bool],
    /// Least total size the children from index j onward must contribute.
    min_rest: Vec<usize>,
    /// Largest total size they can contribute.
    max_rest: Vec<usize>,
}

impl Walk<'_> {
    fn visit(&mut self, node: &AstNode) -> BySize {
        let kids: Vec<BySize> = node.children.iter().map(|c| self.visit(c)).collect();
        let max = self.limits.max_nodes;
        let mut out: BySize = vec![Vec::new(); max];

        let n = kids.len();
        let mut min_rest = vec![0usize; n + 1];
        let mut max_rest = vec![0usize; n + 1];
        for j in (0..n).rev() {
            let smallest = kids[j].iter().position(|b| !b.is_empty()).map(|s| s + 1);
            let largest = kids[j].iter().rposition(|b| !b.is_empty()).map(|s| s + 1);
            if node.mandatory_mask[j] {
                match smallest {
                    Some(s) => min_rest[j] = min_rest[j + 1] + s,
                    // a required child has no pattern within the budget
                    None => return out,
                }
            } else {
                min_rest[j] = min_rest[j + 1];
            }
            max_rest[j] = max_rest[j + 1] + largest.unwrap_or(0);
        }

        let label = node.label.as_deref().map(|l| self.arena.label_id(l));
        let comb = Combine {
            kids: &kids,
            mandatory: &node.mandatory_mask,
            min_rest,
            max_rest,
        };
        let cap = self.limits.per_node_cap;
        let mut local = HashSet::new();
        let mut chosen = Vec::with_capacity(n);
        for total in 1..=max {
            let budget = total - 1;
            if budget < comb.min_rest[0] || budget > comb.max_rest[0] {
                continue;
            }
            let mut emit = |children: &[PatternId], arena: &mut PatternArena| -> bool {
                let id = arena.intern(Key {
                    kind: node.kind,
                    label,
                    children: children.into(),
                });
                if local.contains(&id) {
                    return true;
                }
                if local.len() == cap {
                    return false;
                }
                local.insert(id);
                out[total - 1].push(id);
                true
            };
            if !comb.fill(0, budget, &mut chosen, self.arena, &mut emit) {
                self.truncated_nodes += 1;
                break;
            }
        }
        self.seen.extend(local);
        out
    }
}

impl Combine<'_> {
    /// Chooses a pattern (or nothing, when optional) for each child from `j`
    /// on so that sizes sum to `budget`. Returns false once `emit` asks to stop.
    fn fill(
        &self,
        j: usize,
        budget: usize,
        chosen: &mut Vec<PatternId>,
        arena: &mut PatternArena,
        emit: &mut dyn FnMut(&[PatternId], &mut PatternArena) -> bool,
    ) -> bool {
        if budget < self.min_rest[j] || budget > self.max_rest[j] {
            return true;
        }
        if j == self.kids.len() {
            return budget != 0 || emit(chosen, arena);
        }
        if !self.mandatory[j] && !self.fill(j + 1, budget, chosen, arena, emit) {
            return false;
        }
        let rest_min = self.min_rest[j + 1];
        for (s, bucket) in self.kids[j].iter().enumerate() {
            let size = s + 1;
            if size + rest_min > budget {
                break;
            }
            for &id in bucket {
                chosen.push(id);
                let go = self.fill(j + 1, budget - size, chosen, arena, emit);
                chosen.pop();
                if !go {
                    return false;
                }
            }
        }
        true
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::AstNode;

    fn limits(max_nodes: usize) -> EnumerationLimits {
        EnumerationLimits {
            max_nodes,
            per_node_cap: 10_000,
        }
    }

    fn canon(root: &AstNode, max_nodes: usize) -> Vec<String> {
        enumerate_subtrees(root, limits(max_nodes))
            .patterns
            .iter()
            .map(|p| p.canonical().to_string())
            .collect()
    }

    #[test]
    fn single_break() {
        assert_eq!(canon(&AstNode::leaf(NodeKind::Break), 15), ["Break"]);
    }

    #[test]
    fn if_compare_break_has_four() {
        let tree = AstNode::with(
            NodeKind::If,
            vec![AstNode::labelled(NodeKind::Compare, "==", vec![]), AstNode::leaf(NodeKind::Break)],
        );
        assert_eq!(
            canon(&tree, 15),
            ["Break", "Compare[==]", "If(Compare[==])", "If(Compare[==] Break)"]
        );
    }

    #[test]
    fn max_nodes_one_gives_node_types_without_required_children() {
        let tree = AstNode::with(
            NodeKind::FunctionDef,
            vec![
                AstNode::leaf(NodeKind::Break),
                AstNode::with(NodeKind::Return, vec![AstNode::leaf(NodeKind::NamePlaceholder)]),
                AstNode::leaf(NodeKind::Break),
            ],
        );
        assert_eq!(canon(&tree, 1), ["Break", "FunctionDef", "NamePlaceholder", "Return"]);
    }

    #[test]
    fn repeated_siblings_dedup() {
        let tree = AstNode::with(
            NodeKind::FunctionDef,
            vec![AstNode::leaf(NodeKind::Break), AstNode::leaf(NodeKind::Break)],
        );
        assert_eq!(
            canon(&tree, 15),
            ["Break", "FunctionDef", "FunctionDef(Break)", "FunctionDef(Break Break)"]
        );
    }

    #[test]
    fn cap_truncates_and_flags() {
        let tree = AstNode::with(
            NodeKind::FunctionDef,
            (0..6).map(|_| AstNode::leaf(NodeKind::Break)).collect(),
        );
        let e = enumerate_subtrees(
            &tree,
            EnumerationLimits {
                max_nodes: 15,
                per_node_cap: 3,
            },
        );
        assert!(e.truncated());
        let c: Vec<_> = e.patterns.iter().map(|p| p.canonical()).collect();
        assert_eq!(c, ["Break", "FunctionDef", "FunctionDef(Break)", "FunctionDef(Break Break)"]);
    }

    #[test]
    fn arena_absorb_preserves_canonical_forms() {
        let tree = AstNode::with(
            NodeKind::If,
            vec![AstNode::labelled(NodeKind::Compare, "==", vec![]), AstNode::leaf(NodeKind::Break)],
        );
        let mut local = PatternArena::new();
        let found = enumerate_into(&mut local, &tree, limits(15));
        let mut global = PatternArena::new();
        global.absorb(&PatternArena::new());
        let map = global.absorb(&local);
        for id in found.ids {
            assert_eq!(global.canonical(map[id as usize]), local.canonical(id));
            assert_eq!(global.size(map[id as usize]), local.size(id));
        }
    }
}
