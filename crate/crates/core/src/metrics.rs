//! Baseline structural complexity: lines of code and cyclomatic complexity.

use serde::{Deserialize, Serialize};

use crate::ast::{strip_noise, AstError, AstNode, CanonicalAst, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralScore {
    pub question_id: String,
    pub loc: usize,
    pub cyclomatic: usize,
}

/// Number of lines left after removing comments and blank lines.
pub fn lines_of_code(source: &str) -> Result<usize, AstError> {
    Ok(strip_noise(source)?.lines().filter(|l| !l.trim().is_empty()).count())
}

/// McCabe complexity: one base path plus one per decision point.
///
/// | construct            | increment          |
/// |----------------------|--------------------|
/// | `if`, `elif`         | +1                 |
/// | `else`               | +0                 |
/// | `for`, `while`       | +1                 |
/// | `and` / `or`         | +1 per occurrence  |
/// | ternary              | +1                 |
/// | comprehension        | +1                 |
pub fn cyclomatic(ast: &CanonicalAst) -> usize {
    1 + decision_points(&ast.root)
}

fn decision_points(root: &AstNode) -> usize {
    root.walk()
        .map(|node| match node.kind {
            NodeKind::If
            | NodeKind::ElifBranch
            | NodeKind::For
            | NodeKind::While
            | NodeKind::IfExp
            | NodeKind::Comprehension => 1,
            // `a and b and c` holds two operator occurrences
            NodeKind::BoolOp => node.children.len().saturating_sub(1),
            _ => 0,
        })
        .sum()
}

pub fn structural_score(
    question_id: &str,
    source: &str,
    ast: &CanonicalAst,
) -> Result<StructuralScore, AstError> {
    Ok(StructuralScore {
        question_id: question_id.to_string(),
        loc: lines_of_code(source)?,
        cyclomatic: cyclomatic(ast),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{parse, ApiWhitelist, Canonicalization};

    fn cc(src: &str) -> usize {
        let canon = Canonicalization {
            api_whitelist: ApiWhitelist::default(),
            strict: false,
        };
        cyclomatic(&parse("q", src, &canon).unwrap().ast)
    }

    #[test]
    fn loc_examples() {
        assert_eq!(lines_of_code("def f():\n    return 1\n").unwrap(), 2);
        assert_eq!(lines_of_code("# only comment\n\n").unwrap(), 0);
    }

    #[test]
    fn loc_of_generated_style_program() {
        let src = "\
def execute_command(video, possible_answers, question):
    # Reason every step
    video_segment = VideoSegment(video)

    found = False
    # find the frame with the dog
    for frame in video_segment.frame_iterator():
        if frame.exists('dog'):
            found = True
            keep = frame
            break
    if not found:
        keep = video_segment.frame_from_index(video_segment.num_frames // 2)

    info = keep.simple_query('What is the dog doing?')  # ask
    return select_answer(info, question, possible_answers)
";
        assert_eq!(lines_of_code(src).unwrap(), 12);
    }

    #[test]
    fn straight_line_is_one() {
        assert_eq!(cc("def f(v):\n    x = v\n    return x\n"), 1);
    }

    #[test]
    fn single_if_is_two() {
        assert_eq!(cc("def f(v):\n    if v:\n        return 1\n    return 0\n"), 2);
    }

    #[test]
    fn for_if_else_and_is_four() {
        let src = "def f(v):\n    for x in v:\n        if x and v:\n            y = 1\n        else:\n            y = 2\n    return y\n";
        assert_eq!(cc(src), 4);
    }

    #[test]
    fn opaque_contributes_nothing() {
        assert_eq!(cc("def f(v):\n    try:\n        if v:\n            x = 1\n    except E:\n        pass\n    return 0\n"), 1);
    }

    #[test]
    fn plain_statement_does_not_change_cc_but_if_adds_one() {
        let base = "def f(v):\n    for x in v:\n        y = x\n";
        let more = "def f(v):\n    for x in v:\n        y = x\n        z = y + 1\n";
        let branch = "def f(v):\n    for x in v:\n        y = x\n        if y:\n            z = 1\n";
        assert_eq!(cc(base), cc(more));
        assert_eq!(cc(base) + 1, cc(branch));
    }
}
