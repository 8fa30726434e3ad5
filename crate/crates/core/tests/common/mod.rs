//! Independent oracles shared by the integration tests. Nothing here calls
//! into the enumeration, matching or mining code it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use codeplexity::ast::{AstNode, NodeKind};
use codeplexity::subtree::{PatternNode, SubtreePattern};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

pub fn read_fixture(rel: &str) -> String {
    let path = fixtures().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Random canonical tree over a small alphabet so that kinds and labels
/// repeat and embeddings have real choices. Uses at most `budget` nodes.
pub fn random_tree(rng: &mut ChaCha8Rng, budget: usize) -> AstNode {
    assert!(budget >= 1);
    // (kind, label, min children, max children)
    const SHAPES: &[(NodeKind, Option<&str>, usize, usize)] = &[
        (NodeKind::NamePlaceholder, None, 0, 0),
        (NodeKind::NumLit, None, 0, 0),
        (NodeKind::Break, None, 0, 0),
        (NodeKind::ApiName, Some("find"), 0, 0),
        (NodeKind::ApiName, Some("exists"), 0, 0),
        (NodeKind::UnaryOp, Some("not"), 1, 1),
        (NodeKind::Call, None, 1, 3),
        (NodeKind::If, None, 1, 3),
        (NodeKind::Return, None, 0, 2),
        (NodeKind::ListLit, None, 0, 3),
        (NodeKind::BinOp, Some("+"), 2, 2),
        (NodeKind::For, None, 2, 3),
        (NodeKind::FunctionDef, None, 0, 3),
    ];
    loop {
        let (kind, label, lo, hi) = SHAPES[rng.random_range(0..SHAPES.len())];
        if lo + 1 > budget {
            continue;
        }
        let hi = hi.min(budget - 1);
        let arity = rng.random_range(lo..=hi);
        return AstNode::new(kind, label.map(str::to_string), random_children(rng, arity, budget - 1));
    }
}

fn random_children(rng: &mut ChaCha8Rng, arity: usize, mut budget: usize) -> Vec<AstNode> {
    let mut out = Vec::with_capacity(arity);
    for i in 0..arity {
        let reserve = arity - i - 1;
        let share = rng.random_range(1..=budget - reserve);
        let child = random_tree(rng, share);
        budget -= child.node_count();
        out.push(child);
    }
    out
}

/// A function body of random statements, at most `budget` nodes in total.
pub fn random_program(rng: &mut ChaCha8Rng, budget: usize) -> AstNode {
    let arity = rng.random_range(1..=3.min(budget - 1));
    AstNode::new(NodeKind::FunctionDef, None, random_children(rng, arity, budget - 1))
}

struct Flat<'a> {
    node: &'a AstNode,
    children: Vec<usize>,
}

fn flatten<'a>(node: &'a AstNode, out: &mut Vec<Flat<'a>>) -> usize {
    let me = out.len();
    out.push(Flat {
        node,
        children: Vec::new(),
    });
    for c in &node.children {
        let id = flatten(c, out);
        out[me].children.push(id);
    }
    me
}

fn build(flat: &[Flat], keep: &[bool], i: usize) -> PatternNode {
    let kids = flat[i]
        .children
        .iter()
        .filter(|&&c| keep[c])
        .map(|&c| build(flat, keep, c))
        .collect();
    PatternNode::new(flat[i].node.kind, flat[i].node.label.clone(), kids)
}

/// G(T) by exhaustive search: for every root, every parent-closed node set
/// grown one child at a time (up to `max_nodes`) that includes all
/// mandatory children of each kept node. Keyed by canonical text.
pub fn brute_force_patterns_upto(tree: &AstNode, max_nodes: usize) -> BTreeMap<String, SubtreePattern> {
    let mut out = BTreeMap::new();
    for root in tree.walk() {
        let mut flat = Vec::new();
        flatten(root, &mut flat);
        let m = flat.len();
        assert!(m <= 128, "brute force needs small trees");
        let mut seen: BTreeSet<u128> = BTreeSet::new();
        let mut frontier = vec![1u128];
        seen.insert(1);
        while let Some(set) = frontier.pop() {
            let keep: Vec<bool> = (0..m).map(|i| set >> i & 1 == 1).collect();
            let valid = (0..m).filter(|&i| keep[i]).all(|i| {
                flat[i]
                    .children
                    .iter()
                    .enumerate()
                    .all(|(pos, &c)| keep[c] || !flat[i].node.mandatory_mask[pos])
            });
            if valid {
                let p = SubtreePattern::new(build(&flat, &keep, 0));
                out.entry(p.canonical().to_string()).or_insert(p);
            }
            if (set.count_ones() as usize) < max_nodes {
                for i in (0..m).filter(|&i| keep[i]) {
                    for &c in &flat[i].children {
                        let grown = set | 1 << c;
                        if grown != set && seen.insert(grown) {
                            frontier.push(grown);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn brute_force_patterns(tree: &AstNode) -> BTreeMap<String, SubtreePattern> {
    brute_force_patterns_upto(tree, usize::MAX)
}

/// Reference miner: brute-force pattern sets, support filter, then within
/// each occurrence group drop patterns that lie in G of a larger member.
/// Returns canonical text → sorted occurrence ids.
pub fn oracle_catalog(
    programs: &[(String, AstNode)],
    max_nodes: usize,
    min_support: usize,
) -> BTreeMap<String, Vec<String>> {
    let mut occ: BTreeMap<String, (SubtreePattern, BTreeSet<String>)> = BTreeMap::new();
    for (id, tree) in programs {
        for (text, p) in brute_force_patterns_upto(tree, max_nodes) {
            occ.entry(text).or_insert_with(|| (p, BTreeSet::new())).1.insert(id.clone());
        }
    }
    let mut groups: BTreeMap<Vec<String>, Vec<SubtreePattern>> = BTreeMap::new();
    for (p, ids) in occ.into_values() {
        if ids.len() >= min_support {
            groups.entry(ids.into_iter().collect()).or_default().push(p);
        }
    }
    let mut out = BTreeMap::new();
    for (ids, members) in groups {
        let inside: Vec<BTreeMap<String, SubtreePattern>> =
            members.iter().map(|p| brute_force_patterns(&p.root().to_ast())).collect();
        for p in &members {
            let dominated = members
                .iter()
                .zip(&inside)
                .any(|(q, g)| q.node_count() > p.node_count() && g.contains_key(p.canonical()));
            if !dominated {
                out.insert(p.canonical().to_string(), ids.clone());
            }
        }
    }
    out
}

/// Exact binomial table in u128; C(60, 30)² still fits.
pub fn binomials(max: usize) -> Vec<Vec<u128>> {
    let mut c = vec![vec![0u128; max + 1]; max + 1];
    for n in 0..=max {
        c[n][0] = 1;
        for k in 1..=n {
            c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
        }
    }
    c
}

/// P(X ≤ x), X ~ Hypergeometric(population, successes, draws), summed in
/// exact integers and divided once.
pub fn hypergeometric_tail(c: &[Vec<u128>], population: usize, successes: usize, draws: usize, x: usize) -> f64 {
    let lo = (draws + successes).saturating_sub(population);
    let mut num: u128 = 0;
    for k in lo..=x.min(draws).min(successes) {
        num += c[successes][k] * c[population - successes][draws - k];
    }
    num as f64 / c[population][draws] as f64
}
