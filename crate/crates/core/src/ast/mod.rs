//! Canonical syntax trees for generated visual programs.
//!
//! Programs are written in a narrow Python subset (a single
//! `def execute_command(...)` plus loops, conditionals and API calls). The
//! parser lowers them into [`CanonicalAst`]s in which user identifiers
//! collapse to [`NodeKind::NamePlaceholder`], literal values are dropped and
//! whitelisted API names survive as labelled [`NodeKind::ApiName`] nodes, so
//! that two programs differing only in naming compare equal.

mod lexer;
mod noise;
mod parser;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest;

pub use noise::strip_noise;
pub use parser::{parse, ParseOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: usize },
    #[error("line {line}: parse error, expected {expected}")]
    Parse { line: usize, expected: String },
    #[error("line {line}: unsupported construct `{construct}`")]
    UnsupportedConstruct { line: usize, construct: String },
    #[error("no top-level function definition")]
    MissingFunction,
}

/// Closed set of node kinds a canonical tree may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    FunctionDef,
    Assign,
    AugAssign,
    For,
    While,
    If,
    ElifBranch,
    ElseBranch,
    Break,
    Continue,
    Return,
    ExprStmt,
    Call,
    Attribute,
    Subscript,
    BinOp,
    UnaryOp,
    BoolOp,
    Compare,
    IfExp,
    ListLit,
    TupleLit,
    Comprehension,
    NumLit,
    StrLit,
    BoolLit,
    NoneLit,
    NamePlaceholder,
    ApiName,
    OpaqueStmt,
}

/// Which children of a node are syntactically required.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MandatoryRule {
    None,
    All,
    /// The first `n` children are required, the rest optional.
    Prefix(usize),
}

impl MandatoryRule {
    pub fn is_mandatory(self, position: usize) -> bool {
        match self {
            MandatoryRule::None => false,
            MandatoryRule::All => true,
            MandatoryRule::Prefix(n) => position < n,
        }
    }

    pub fn mask(self, len: usize) -> Vec<bool> {
        (0..len).map(|i| self.is_mandatory(i)).collect()
    }
}

impl NodeKind {
    pub const ALL: [NodeKind; 30] = [
        NodeKind::FunctionDef,
        NodeKind::Assign,
        NodeKind::AugAssign,
        NodeKind::For,
        NodeKind::While,
        NodeKind::If,
        NodeKind::ElifBranch,
        NodeKind::ElseBranch,
        NodeKind::Break,
        NodeKind::Continue,
        NodeKind::Return,
        NodeKind::ExprStmt,
        NodeKind::Call,
        NodeKind::Attribute,
        NodeKind::Subscript,
        NodeKind::BinOp,
        NodeKind::UnaryOp,
        NodeKind::BoolOp,
        NodeKind::Compare,
        NodeKind::IfExp,
        NodeKind::ListLit,
        NodeKind::TupleLit,
        NodeKind::Comprehension,
        NodeKind::NumLit,
        NodeKind::StrLit,
        NodeKind::BoolLit,
        NodeKind::NoneLit,
        NodeKind::NamePlaceholder,
        NodeKind::ApiName,
        NodeKind::OpaqueStmt,
    ];

    /// Mandatory-children table. Mandatory children always form a prefix of
    /// the child list (or all of it), so the rule can be re-applied to a
    /// pattern that kept only some optional children.
    pub fn mandatory_rule(self) -> MandatoryRule {
        use NodeKind::*;
        match self {
            If | ElifBranch | While | Call => MandatoryRule::Prefix(1),
            For => MandatoryRule::Prefix(2),
            Comprehension => MandatoryRule::Prefix(3),
            Assign | AugAssign | ExprStmt | Attribute | Subscript | BinOp | UnaryOp | BoolOp
            | Compare | IfExp => MandatoryRule::All,
            FunctionDef | ElseBranch | Return | ListLit | TupleLit => MandatoryRule::None,
            Break | Continue | NumLit | StrLit | BoolLit | NoneLit | NamePlaceholder | ApiName
            | OpaqueStmt => MandatoryRule::None,
        }
    }

    /// Kinds whose nodes carry a label (API names and operator tokens).
    pub fn is_labelled(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            ApiName | AugAssign | BinOp | UnaryOp | BoolOp | Compare
        )
    }

    pub fn name(self) -> &'static str {
        use NodeKind::*;
        match self {
            FunctionDef => "FunctionDef",
            Assign => "Assign",
            AugAssign => "AugAssign",
            For => "For",
            While => "While",
            If => "If",
            ElifBranch => "ElifBranch",
            ElseBranch => "ElseBranch",
            Break => "Break",
            Continue => "Continue",
            Return => "Return",
            ExprStmt => "ExprStmt",
            Call => "Call",
            Attribute => "Attribute",
            Subscript => "Subscript",
            BinOp => "BinOp",
            UnaryOp => "UnaryOp",
            BoolOp => "BoolOp",
            Compare => "Compare",
            IfExp => "IfExp",
            ListLit => "ListLit",
            TupleLit => "TupleLit",
            Comprehension => "Comprehension",
            NumLit => "NumLit",
            StrLit => "StrLit",
            BoolLit => "BoolLit",
            NoneLit => "NoneLit",
            NamePlaceholder => "NamePlaceholder",
            ApiName => "ApiName",
            OpaqueStmt => "OpaqueStmt",
        }
    }

    pub fn from_name(name: &str) -> Option<NodeKind> {
        NodeKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mandatory_mask: Vec<bool>,
}

impl AstNode {
    /// Builds a node, deriving the mandatory mask from the kind table.
    pub fn new(kind: NodeKind, label: Option<String>, children: Vec<AstNode>) -> Self {
        let mandatory_mask = kind.mandatory_rule().mask(children.len());
        AstNode {
            kind,
            label,
            children,
            mandatory_mask,
        }
    }

    pub fn leaf(kind: NodeKind) -> Self {
        AstNode::new(kind, None, Vec::new())
    }

    pub fn api(name: impl Into<String>) -> Self {
        AstNode::new(NodeKind::ApiName, Some(name.into()), Vec::new())
    }

    pub fn with(kind: NodeKind, children: Vec<AstNode>) -> Self {
        AstNode::new(kind, None, children)
    }

    pub fn labelled(kind: NodeKind, label: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode::new(kind, Some(label.into()), children)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(AstNode::node_count).sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> impl Iterator<Item = &AstNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Checks the node-level invariants recursively: labels only where the
    /// kind allows them, and a mandatory mask that agrees with the table.
    pub fn check_invariants(&self) -> Result<(), String> {
        for node in self.walk() {
            if node.mandatory_mask != node.kind.mandatory_rule().mask(node.children.len()) {
                return Err(format!("{}: mandatory mask disagrees with table", node.kind));
            }
            if node.kind.is_labelled() != node.label.is_some() {
                return Err(format!("{}: unexpected label state", node.kind));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalAst {
    pub question_id: String,
    pub root: AstNode,
    pub node_count: usize,
}

impl CanonicalAst {
    pub fn new(question_id: impl Into<String>, root: AstNode) -> Self {
        let node_count = root.node_count();
        CanonicalAst {
            question_id: question_id.into(),
            root,
            node_count,
        }
    }
}

/// Call names kept verbatim during canonicalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiWhitelist {
    names: BTreeSet<String>,
}

/// Names exposed by the visual-program API the generated programs call into,
/// plus the Python builtins they lean on.
const DEFAULT_API_NAMES: &[&str] = &[
    "ImagePatch",
    "VideoSegment",
    "best_image_match",
    "best_text_match",
    "bool_to_yesno",
    "coerce_to_numeric",
    "compute_depth",
    "crop",
    "distance",
    "exists",
    "find",
    "frame_from_index",
    "frame_iterator",
    "horizontal_center",
    "llm_query",
    "num_frames",
    "overlaps_with",
    "process_guesses",
    "select_answer",
    "simple_qa",
    "simple_query",
    "trim",
    "verify_property",
    "vertical_center",
    // builtins
    "abs",
    "enumerate",
    "int",
    "len",
    "list",
    "max",
    "min",
    "range",
    "round",
    "sorted",
    "str",
    "sum",
];

impl Default for ApiWhitelist {
    fn default() -> Self {
        ApiWhitelist::new(DEFAULT_API_NAMES.iter().copied())
    }
}

impl ApiWhitelist {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ApiWhitelist {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// Reads one name per line; blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Self {
        ApiWhitelist::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(ApiWhitelist::from_text(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// Everything that influences how a program is lowered to a canonical tree.
/// Trees (and everything mined from them) are only comparable when their
/// canonicalization digests agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canonicalization {
    pub api_whitelist: ApiWhitelist,
    pub strict: bool,
}

impl Default for Canonicalization {
    fn default() -> Self {
        Canonicalization {
            api_whitelist: ApiWhitelist::default(),
            strict: true,
        }
    }
}

impl Canonicalization {
    pub fn digest(&self) -> String {
        digest::of_json(self)
    }
}

/// One entry of an input corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSource {
    pub question_id: String,
    pub source: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate question_id `{0}`")]
    DuplicateQuestionId(String),
    #[error("question `{0}` has an empty program")]
    EmptySource(String),
}

/// Parses a JSON Lines corpus of `{"question_id", "source"}` objects.
pub fn read_corpus(text: &str) -> Result<Vec<ProgramSource>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let program: ProgramSource = serde_json::from_str(line)
            .map_err(|source| CorpusError::Json { line: i + 1, source })?;
        if program.source.trim_end().is_empty() {
            return Err(CorpusError::EmptySource(program.question_id));
        }
        if !seen.insert(program.question_id.clone()) {
            return Err(CorpusError::DuplicateQuestionId(program.question_id));
        }
        out.push(program);
    }
    Ok(out)
}

/// A parsed corpus together with the canonicalization that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstCorpus {
    pub canonicalization_digest: String,
    pub asts: Vec<CanonicalAst>,
}
