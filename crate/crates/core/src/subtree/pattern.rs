use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ast::{AstNode, NodeKind};
use crate::digest;

/// One node of a subtree pattern. Same shape as [`AstNode`] without the
/// mandatory mask, which is implied by the kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternNode {
    pub kind: NodeKind,
    pub label: Option<String>,
    pub children: Vec<PatternNode>,
}

impl PatternNode {
    pub fn new(kind: NodeKind, label: Option<String>, children: Vec<PatternNode>) -> Self {
        PatternNode {
            kind,
            label,
            children,
        }
    }

    pub fn leaf(kind: NodeKind) -> Self {
        PatternNode::new(kind, None, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(PatternNode::node_count).sum::<usize>()
    }

    /// Copies a whole syntax tree into pattern form.
    pub fn from_ast(node: &AstNode) -> Self {
        PatternNode {
            kind: node.kind,
            label: node.label.clone(),
            children: node.children.iter().map(PatternNode::from_ast).collect(),
        }
    }

    /// Reads the pattern back as a tree, re-deriving mandatory masks. This is
    /// sound because mandatory children always form a prefix and a valid
    /// pattern keeps all of them.
    pub fn to_ast(&self) -> AstNode {
        AstNode::new(
            self.kind,
            self.label.clone(),
            self.children.iter().map(PatternNode::to_ast).collect(),
        )
    }

    /// Appends `Kind[label](child child ...)`; `]` and `\\` in labels are escaped.
    pub fn write_canonical(&self, out: &mut String) {
        write_head(out, self.kind, self.label.as_deref());
        if !self.children.is_empty() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                c.write_canonical(out);
            }
            out.push(')');
        }
    }
}

pub(crate) fn write_head(out: &mut String, kind: NodeKind, label: Option<&str>) {
    out.push_str(kind.name());
    if let Some(label) = label {
        out.push('[');
        for c in label.chars() {
            if c == ']' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push(']');
    }
}

/// A canonicalized subtree with its serialization and digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubtreePattern {
    root: PatternNode,
    canonical: String,
    node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed pattern at byte {offset}: {message}")]
pub struct PatternSyntaxError {
    pub offset: usize,
    pub message: String,
}

impl SubtreePattern {
    pub fn new(root: PatternNode) -> Self {
        let mut canonical = String::new();
        root.write_canonical(&mut canonical);
        let node_count = root.node_count();
        SubtreePattern {
            root,
            canonical,
            node_count,
        }
    }

    pub fn root(&self) -> &PatternNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Canonical serialization, e.g. `For(NamePlaceholder Call(ApiName[len]))`.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// 64-bit digest of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", self.fingerprint_key())
    }

    pub fn fingerprint_key(&self) -> u64 {
        digest::short(&self.canonical)
    }

    pub fn parse(text: &str) -> Result<Self, PatternSyntaxError> {
        let mut p = CanonicalReader {
            bytes: text.as_bytes(),
            text,
            pos: 0,
        };
        let root = p.node()?;
        if p.pos != text.len() {
            return Err(p.err("trailing input"));
        }
        Ok(SubtreePattern::new(root))
    }

    /// Indented rendering with identifier placeholders elided, for reports.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        pretty_node(&self.root, 0, &mut out);
        out
    }
}

fn pretty_node(node: &PatternNode, depth: usize, out: &mut String) {
    if node.kind == NodeKind::NamePlaceholder {
        return;
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(node.kind.name());
    if let Some(label) = &node.label {
        let _ = write!(out, " {label}");
    }
    out.push('\n');
    for c in &node.children {
        pretty_node(c, depth + 1, out);
    }
}

impl fmt::Display for SubtreePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl PartialOrd for SubtreePattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Smaller patterns first, then canonical text.
impl Ord for SubtreePattern {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.node_count
            .cmp(&other.node_count)
            .then_with(|| self.canonical.cmp(&other.canonical))
    }
}

impl Serialize for SubtreePattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for SubtreePattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        SubtreePattern::parse(&text).map_err(serde::de::Error::custom)
    }
}

struct CanonicalReader<'a> {
    bytes: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> CanonicalReader<'a> {
    fn err(&self, message: &str) -> PatternSyntaxError {
        PatternSyntaxError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn node(&mut self) -> Result<PatternNode, PatternSyntaxError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        let kind = NodeKind::from_name(name).ok_or_else(|| self.err("unknown node kind"))?;
        let mut label = None;
        if self.bytes.get(self.pos) == Some(&b'[') {
            self.pos += 1;
            let mut buf = String::new();
            loop {
                let Some(c) = self.text[self.pos..].chars().next() else {
                    return Err(self.err("unterminated label"));
                };
                self.pos += c.len_utf8();
                match c {
                    ']' => break,
                    '\\' => {
                        let Some(e) = self.text[self.pos..].chars().next() else {
                            return Err(self.err("dangling escape"));
                        };
                        self.pos += e.len_utf8();
                        buf.push(e);
                    }
                    _ => buf.push(c),
                }
            }
            label = Some(buf);
        }
        let mut children = Vec::new();
        if self.bytes.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                match self.bytes.get(self.pos) {
                    Some(b' ') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ' ' or ')'")),
                }
            }
        }
        Ok(PatternNode::new(kind, label, children))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip_with_escapes() {
        let p = SubtreePattern::new(PatternNode::new(
            NodeKind::Compare,
            Some("not in,a]b\\".into()),
            vec![
                PatternNode::leaf(NodeKind::NamePlaceholder),
                PatternNode::new(NodeKind::Call, None, vec![PatternNode::new(
                    NodeKind::ApiName,
                    Some("len".into()),
                    vec![],
                )]),
            ],
        ));
        assert_eq!(
            p.canonical(),
            "Compare[not in,a\\]b\\\\](NamePlaceholder Call(ApiName[len]))"
        );
        let back = SubtreePattern::parse(p.canonical()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.node_count(), 4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SubtreePattern::parse("Nope").is_err());
        assert!(SubtreePattern::parse("For(Break").is_err());
        assert!(SubtreePattern::parse("Break)").is_err());
    }

    #[test]
    fn pretty_elides_placeholders() {
        let p = SubtreePattern::parse(
            "For(NamePlaceholder Call(Attribute(NamePlaceholder ApiName[frame_iterator])) Break)",
        )
        .unwrap();
        assert_eq!(
            p.pretty(),
            "For\n  Call\n    Attribute\n      ApiName frame_iterator\n  Break\n"
        );
    }
}
