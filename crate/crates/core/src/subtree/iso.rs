use crate::ast::AstNode;

use super::{PatternNode, SubtreePattern};

/// Whether `pattern` occurs in `tree` rooted at some node.
pub fn iso(tree: &AstNode, pattern: &SubtreePattern) -> bool {
    tree.walk().any(|node| matches_at(node, pattern.root()))
}

/// Number of tree nodes at which `pattern` matches with its root there.
pub fn match_sites(tree: &AstNode, pattern: &SubtreePattern) -> usize {
    tree.walk().filter(|node| matches_at(node, pattern.root())).count()
}

/// Rooted match: equal kind and label, and the pattern's children embed into
/// the node's children in order, skipping only optional children.
pub fn matches_at(node: &AstNode, pat: &PatternNode) -> bool {
    if node.kind != pat.kind || node.label != pat.label {
        return false;
    }
    let n = node.children.len();
    let m = pat.children.len();
    if m > n {
        return false;
    }
    // reach[j] after processing pattern child i: first i pattern children are
    // embedded into the first j tree children with every mandatory one used.
    let mandatory = |j: usize| node.mandatory_mask.get(j).copied().unwrap_or(false);
    let mut reach = vec![false; n + 1];
    reach[0] = true;
    for j in 1..=n {
        reach[j] = reach[j - 1] && !mandatory(j - 1);
    }
    for pc in &pat.children {
        let mut next = vec![false; n + 1];
        for j in 1..=n {
            let skip = next[j - 1] && !mandatory(j - 1);
            next[j] = skip || (reach[j - 1] && matches_at(&node.children[j - 1], pc));
        }
        reach = next;
        if !reach.iter().any(|&r| r) {
            return false;
        }
    }
    reach[n]
}

/// `inner` is a sub-pattern of `outer`: it matches the tree read off `outer`.
pub fn contains(outer: &SubtreePattern, inner: &SubtreePattern) -> bool {
    inner.node_count() <= outer.node_count() && iso(&outer.root().to_ast(), inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{AstNode, NodeKind};

    fn p(text: &str) -> SubtreePattern {
        SubtreePattern::parse(text).unwrap()
    }

    fn if_compare_break() -> AstNode {
        AstNode::with(
            NodeKind::If,
            vec![
                AstNode::labelled(
                    NodeKind::Compare,
                    "<",
                    vec![AstNode::leaf(NodeKind::NamePlaceholder), AstNode::leaf(NodeKind::NumLit)],
                ),
                AstNode::leaf(NodeKind::Break),
            ],
        )
    }

    #[test]
    fn whole_tree_matches_itself() {
        let t = if_compare_break();
        assert!(iso(&t, &SubtreePattern::new(PatternNode::from_ast(&t))));
    }

    #[test]
    fn absent_kind_does_not_match() {
        assert!(!iso(&if_compare_break(), &p("While")));
    }

    #[test]
    fn mandatory_child_required() {
        let t = if_compare_break();
        assert!(!iso(&t, &p("If(Break)")));
        assert!(!iso(&t, &p("If")));
        assert!(iso(&t, &p("If(Compare[<](NamePlaceholder NumLit))")));
        assert!(!iso(&t, &p("If(Compare[<](NamePlaceholder))")));
        assert!(iso(&t, &p("Break")));
    }

    #[test]
    fn labels_must_agree() {
        assert!(!iso(&if_compare_break(), &p("Compare[>](NamePlaceholder NumLit)")));
    }

    #[test]
    fn gaps_allowed_between_optional_siblings() {
        let body = AstNode::with(
            NodeKind::FunctionDef,
            vec![
                AstNode::leaf(NodeKind::Break),
                AstNode::leaf(NodeKind::Continue),
                AstNode::leaf(NodeKind::Break),
            ],
        );
        assert!(iso(&body, &p("FunctionDef(Break Break)")));
        assert!(iso(&body, &p("FunctionDef(Continue Break)")));
        assert!(!iso(&body, &p("FunctionDef(Continue Continue)")));
        assert!(!iso(&body, &p("FunctionDef(Break Continue Continue)")));
        assert_eq!(match_sites(&body, &p("Break")), 2);
    }

    #[test]
    fn containment() {
        let big = p("If(Compare[<](NamePlaceholder NumLit) Break)");
        assert!(contains(&big, &p("Break")));
        assert!(contains(&big, &p("If(Compare[<](NamePlaceholder NumLit))")));
        assert!(!contains(&p("Break"), &big));
    }
}
