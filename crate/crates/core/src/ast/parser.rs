use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Tok, Token};
use super::{AstError, AstNode, CanonicalAst, Canonicalization, NodeKind};

/// A statement replaced by [`NodeKind::OpaqueStmt`] in permissive mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaqueSite {
    pub line: usize,
    pub construct: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub ast: CanonicalAst,
    pub opaque: Vec<OpaqueSite>,
}

/// Parses one program into its canonical tree.
///
/// The program must contain exactly one top-level `def`. In strict mode any
/// construct outside the node taxonomy is an error; in permissive mode the
/// enclosing statement becomes an `OpaqueStmt` and the site is reported.
pub fn parse(
    question_id: &str,
    source: &str,
    canon: &Canonicalization,
) -> Result<ParseOutcome, AstError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        canon,
        opaque: Vec::new(),
    };
    let root = p.module()?;
    Ok(ParseOutcome {
        ast: CanonicalAst::new(question_id, root),
        opaque: p.opaque,
    })
}

type PResult<T> = Result<T, AstError>;

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "pass", "import", "from", "try", "with", "class", "global", "nonlocal", "del", "assert",
    "raise", "async", "await", "yield", "lambda", "except", "finally", "match",
];

const CLAUSE_KEYWORDS: &[&str] = &["elif", "else", "except", "finally"];

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    canon: &'a Canonicalization,
    opaque: Vec<OpaqueSite>,
}

fn unsupported<T>(line: usize, construct: &str) -> PResult<T> {
    Err(AstError::UnsupportedConstruct {
        line,
        construct: construct.to_string(),
    })
}

impl<'a> Parser<'a> {
    fn tok(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.tok(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.tok(), Tok::Name(n) if n == kw)
    }

    fn is_kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.toks.get(self.pos + offset).map(|t| &t.tok), Some(Tok::Name(n)) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(AstError::Parse {
            line: self.line(),
            expected: expected.to_string(),
        })
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.error(&format!("`{op}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        if self.is_op(";") {
            return unsupported(self.line(), "semicolon-separated statements");
        }
        match self.tok() {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::End => Ok(()),
            _ => self.error("end of statement"),
        }
    }

    // ---- statements -------------------------------------------------------

    fn module(&mut self) -> PResult<AstNode> {
        let mut function: Option<AstNode> = None;
        loop {
            match self.tok() {
                Tok::End => break,
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => return self.error("a statement at column 0"),
                _ if self.is_kw("def") => {
                    let line = self.line();
                    let def = self.function_def()?;
                    if function.is_some() {
                        return Err(AstError::Parse {
                            line,
                            expected: "a single top-level function definition".into(),
                        });
                    }
                    function = Some(def);
                }
                _ => {
                    let line = self.line();
                    if self.canon.strict {
                        return unsupported(line, "top-level statement");
                    }
                    self.skip_statement();
                    self.opaque.push(OpaqueSite {
                        line,
                        construct: "top-level statement".into(),
                    });
                }
            }
        }
        function.ok_or(AstError::MissingFunction)
    }

    fn function_def(&mut self) -> PResult<AstNode> {
        self.expect_kw("def")?;
        if !matches!(self.tok(), Tok::Name(_)) {
            return self.error("function name");
        }
        self.advance();
        self.expect_op("(")?;
        // Parameters are user identifiers and carry no structure of interest.
        let mut depth = 1;
        while depth > 0 {
            match self.tok() {
                Tok::Op("(") | Tok::Op("[") | Tok::Op("{") => depth += 1,
                Tok::Op(")") | Tok::Op("]") | Tok::Op("}") => depth -= 1,
                Tok::End => return self.error("`)`"),
                _ => {}
            }
            self.advance();
        }
        if self.eat_op("->") {
            self.test()?;
        }
        self.expect_op(":")?;
        let body = self.block()?;
        Ok(AstNode::with(NodeKind::FunctionDef, body))
    }

    /// `:` has been consumed. Either an indented suite or a simple statement
    /// on the same line.
    fn block(&mut self) -> PResult<Vec<AstNode>> {
        if matches!(self.tok(), Tok::Newline) {
            self.advance();
            if !matches!(self.tok(), Tok::Indent) {
                return self.error("an indented block");
            }
            self.advance();
            let mut body = Vec::new();
            loop {
                match self.tok() {
                    Tok::Dedent => {
                        self.advance();
                        break;
                    }
                    Tok::End => break,
                    Tok::Newline => {
                        self.advance();
                    }
                    _ => body.push(self.statement_or_opaque()?),
                }
            }
            Ok(body)
        } else {
            Ok(vec![self.statement_or_opaque()?])
        }
    }

    fn statement_or_opaque(&mut self) -> PResult<AstNode> {
        let start = self.pos;
        match self.statement() {
            Err(AstError::UnsupportedConstruct { line, construct }) if !self.canon.strict => {
                self.pos = start;
                let stmt_line = self.line();
                self.skip_statement();
                self.opaque.push(OpaqueSite {
                    line: line.max(stmt_line),
                    construct,
                });
                Ok(AstNode::leaf(NodeKind::OpaqueStmt))
            }
            other => other,
        }
    }

    /// Skips one statement starting at the current token, including an
    /// indented suite and any trailing `elif`/`else`/`except`/`finally` clauses.
    fn skip_statement(&mut self) {
        loop {
            let decorator = self.is_op("@");
            while !matches!(self.tok(), Tok::Newline | Tok::End) {
                self.advance();
            }
            if matches!(self.tok(), Tok::Newline) {
                self.advance();
            }
            if matches!(self.tok(), Tok::Indent) {
                let mut depth = 0usize;
                loop {
                    match self.tok() {
                        Tok::Indent => depth += 1,
                        Tok::Dedent => {
                            depth -= 1;
                            if depth == 0 {
                                self.advance();
                                break;
                            }
                        }
                        Tok::End => break,
                        _ => {}
                    }
                    self.advance();
                }
            }
            let continues = decorator
                || CLAUSE_KEYWORDS.iter().any(|kw| self.is_kw(kw));
            if !continues || matches!(self.tok(), Tok::End) {
                break;
            }
        }
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let line = self.line();
        if self.is_op("@") {
            return unsupported(line, "decorator");
        }
        let kw = match self.tok() {
            Tok::Name(n) => Some(n.clone()),
            _ => None,
        };
        match kw.as_deref() {
            Some("def") => self.function_def(),
            Some("for") => self.for_stmt(),
            Some("while") => self.while_stmt(),
            Some("if") => self.if_stmt(),
            Some("break") => {
                self.advance();
                self.expect_newline()?;
                Ok(AstNode::leaf(NodeKind::Break))
            }
            Some("continue") => {
                self.advance();
                self.expect_newline()?;
                Ok(AstNode::leaf(NodeKind::Continue))
            }
            Some("return") => {
                self.advance();
                let mut children = Vec::new();
                if !matches!(self.tok(), Tok::Newline | Tok::End) {
                    children.push(self.testlist()?);
                }
                self.expect_newline()?;
                Ok(AstNode::with(NodeKind::Return, children))
            }
            Some("elif") | Some("else") => self.error("a statement (dangling clause)"),
            Some(k) if UNSUPPORTED_KEYWORDS.contains(&k) => {
                // `match` is a soft keyword; only treat it as one when it opens a block.
                if k == "match" && !self.looks_like_match_statement() {
                    return self.simple_statement();
                }
                unsupported(line, k)
            }
            _ => self.simple_statement(),
        }
    }

    fn looks_like_match_statement(&self) -> bool {
        let mut i = self.pos + 1;
        while let Some(t) = self.toks.get(i) {
            match &t.tok {
                Tok::Newline | Tok::End => return false,
                Tok::Op(":") => {
                    return matches!(self.toks.get(i + 1).map(|t| &t.tok), Some(Tok::Newline));
                }
                Tok::Op("=") => return false,
                _ => {}
            }
            i += 1;
        }
        false
    }

    fn for_stmt(&mut self) -> PResult<AstNode> {
        self.expect_kw("for")?;
        let target = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.testlist()?;
        self.expect_op(":")?;
        let body = self.block()?;
        if self.is_kw("else") {
            return unsupported(self.line(), "for-else");
        }
        let mut children = vec![target, iter];
        children.extend(body);
        Ok(AstNode::with(NodeKind::For, children))
    }

    fn while_stmt(&mut self) -> PResult<AstNode> {
        self.expect_kw("while")?;
        let test = self.named_test()?;
        self.expect_op(":")?;
        let body = self.block()?;
        if self.is_kw("else") {
            return unsupported(self.line(), "while-else");
        }
        let mut children = vec![test];
        children.extend(body);
        Ok(AstNode::with(NodeKind::While, children))
    }

    fn if_stmt(&mut self) -> PResult<AstNode> {
        self.expect_kw("if")?;
        let mut children = vec![self.named_test()?];
        self.expect_op(":")?;
        children.extend(self.block()?);
        while self.is_kw("elif") {
            self.advance();
            let mut branch = vec![self.named_test()?];
            self.expect_op(":")?;
            branch.extend(self.block()?);
            children.push(AstNode::with(NodeKind::ElifBranch, branch));
        }
        if self.is_kw("else") {
            self.advance();
            self.expect_op(":")?;
            let body = self.block()?;
            children.push(AstNode::with(NodeKind::ElseBranch, body));
        }
        Ok(AstNode::with(NodeKind::If, children))
    }

    fn named_test(&mut self) -> PResult<AstNode> {
        let e = self.test()?;
        if self.is_op(":=") {
            return unsupported(self.line(), "assignment expression");
        }
        Ok(e)
    }

    fn simple_statement(&mut self) -> PResult<AstNode> {
        let line = self.line();
        let first = self.testlist()?;
        let node = if self.is_op("=") {
            let mut parts = vec![first];
            while self.eat_op("=") {
                parts.push(self.testlist()?);
            }
            for target in &parts[..parts.len() - 1] {
                check_assignable(target, line)?;
            }
            AstNode::with(NodeKind::Assign, parts)
        } else if let Tok::Op(op) = self.tok() {
            let op = *op;
            if is_aug_assign(op) {
                check_assignable(&first, line)?;
                self.advance();
                let value = self.testlist()?;
                AstNode::labelled(NodeKind::AugAssign, op, vec![first, value])
            } else if op == ":" {
                return unsupported(line, "annotated assignment");
            } else if op == ":=" {
                return unsupported(line, "assignment expression");
            } else {
                AstNode::with(NodeKind::ExprStmt, vec![first])
            }
        } else {
            AstNode::with(NodeKind::ExprStmt, vec![first])
        };
        self.expect_newline()?;
        Ok(node)
    }

    // ---- expressions ------------------------------------------------------

    fn target_list(&mut self) -> PResult<AstNode> {
        let line = self.line();
        let mut items = vec![self.bit_or()?];
        let mut trailing = false;
        while self.eat_op(",") {
            trailing = true;
            if self.is_kw("in") {
                break;
            }
            trailing = false;
            items.push(self.bit_or()?);
        }
        let target = if items.len() == 1 && !trailing {
            items.pop().unwrap()
        } else {
            AstNode::with(NodeKind::TupleLit, items)
        };
        check_assignable(&target, line)?;
        Ok(target)
    }

    /// Comma-separated expressions; more than one (or a trailing comma) forms a tuple.
    fn testlist(&mut self) -> PResult<AstNode> {
        let first = self.test()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expression_end() {
                break;
            }
            items.push(self.test()?);
        }
        Ok(AstNode::with(NodeKind::TupleLit, items))
    }

    fn at_expression_end(&self) -> bool {
        matches!(
            self.tok(),
            Tok::Newline | Tok::End | Tok::Op("=") | Tok::Op(")") | Tok::Op("]") | Tok::Op(":")
        ) || matches!(self.tok(), Tok::Op(op) if is_aug_assign(op))
    }

    fn test(&mut self) -> PResult<AstNode> {
        if self.is_kw("lambda") {
            return unsupported(self.line(), "lambda");
        }
        if self.is_kw("yield") || self.is_kw("await") {
            let kw = if self.is_kw("yield") { "yield" } else { "await" };
            return unsupported(self.line(), kw);
        }
        let body = self.or_test()?;
        if self.is_kw("if") {
            self.advance();
            let cond = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(AstNode::with(NodeKind::IfExp, vec![body, cond, orelse]));
        }
        Ok(body)
    }

    fn or_test(&mut self) -> PResult<AstNode> {
        self.bool_chain("or", Self::and_test)
    }

    fn and_test(&mut self) -> PResult<AstNode> {
        self.bool_chain("and", Self::not_test)
    }

    fn bool_chain(
        &mut self,
        op: &'static str,
        next: fn(&mut Self) -> PResult<AstNode>,
    ) -> PResult<AstNode> {
        let first = next(self)?;
        if !self.is_kw(op) {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.eat_kw(op) {
            operands.push(next(self)?);
        }
        Ok(AstNode::labelled(NodeKind::BoolOp, op, operands))
    }

    fn not_test(&mut self) -> PResult<AstNode> {
        if self.eat_kw("not") {
            let operand = self.not_test()?;
            return Ok(AstNode::labelled(NodeKind::UnaryOp, "not", vec![operand]));
        }
        self.comparison()
    }

    fn comparison_op(&mut self) -> Option<&'static str> {
        let op = match self.tok() {
            Tok::Op(op @ ("<" | ">" | "==" | ">=" | "<=" | "!=")) => *op,
            Tok::Name(n) if n == "in" => "in",
            Tok::Name(n) if n == "not" && self.is_kw_at(1, "in") => {
                self.advance();
                "not in"
            }
            Tok::Name(n) if n == "is" => {
                if self.is_kw_at(1, "not") {
                    self.advance();
                    "is not"
                } else {
                    "is"
                }
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> PResult<AstNode> {
        let first = self.bit_or()?;
        let mut ops = Vec::new();
        let mut operands = vec![first];
        while let Some(op) = self.comparison_op() {
            ops.push(op);
            operands.push(self.bit_or()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap());
        }
        Ok(AstNode::labelled(NodeKind::Compare, ops.join(","), operands))
    }

    fn binary(
        &mut self,
        ops: &[&'static str],
        next: fn(&mut Self) -> PResult<AstNode>,
    ) -> PResult<AstNode> {
        let mut left = next(self)?;
        while let Tok::Op(op) = self.tok() {
            let op = *op;
            if !ops.contains(&op) {
                break;
            }
            self.advance();
            let right = next(self)?;
            left = AstNode::labelled(NodeKind::BinOp, op, vec![left, right]);
        }
        Ok(left)
    }

    fn bit_or(&mut self) -> PResult<AstNode> {
        self.binary(&["|"], Self::bit_xor)
    }

    fn bit_xor(&mut self) -> PResult<AstNode> {
        self.binary(&["^"], Self::bit_and)
    }

    fn bit_and(&mut self) -> PResult<AstNode> {
        self.binary(&["&"], Self::shift)
    }

    fn shift(&mut self) -> PResult<AstNode> {
        self.binary(&["<<", ">>"], Self::arith)
    }

    fn arith(&mut self) -> PResult<AstNode> {
        self.binary(&["+", "-"], Self::term)
    }

    fn term(&mut self) -> PResult<AstNode> {
        self.binary(&["*", "/", "//", "%", "@"], Self::factor)
    }

    fn factor(&mut self) -> PResult<AstNode> {
        if let Tok::Op(op @ ("+" | "-" | "~")) = self.tok() {
            let op = *op;
            self.advance();
            let operand = self.factor()?;
            return Ok(AstNode::labelled(NodeKind::UnaryOp, op, vec![operand]));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<AstNode> {
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(AstNode::labelled(NodeKind::BinOp, "**", vec![base, exp]));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let mut node = self.atom()?;
        loop {
            if self.eat_op("(") {
                let mut children = vec![node];
                children.extend(self.call_args()?);
                node = AstNode::with(NodeKind::Call, children);
            } else if self.eat_op("[") {
                let index = self.subscript()?;
                self.expect_op("]")?;
                node = AstNode::with(NodeKind::Subscript, vec![node, index]);
            } else if self.eat_op(".") {
                let Tok::Name(name) = self.tok().clone() else {
                    return self.error("attribute name");
                };
                self.advance();
                let attr = if self.canon.api_whitelist.contains(&name) {
                    AstNode::api(name)
                } else {
                    AstNode::leaf(NodeKind::NamePlaceholder)
                };
                node = AstNode::with(NodeKind::Attribute, vec![node, attr]);
            } else {
                break;
            }
        }
        Ok(node)
    }

    fn call_args(&mut self) -> PResult<Vec<AstNode>> {
        let mut args = Vec::new();
        loop {
            if self.eat_op(")") {
                return Ok(args);
            }
            if self.is_op("*") || self.is_op("**") {
                return unsupported(self.line(), "star argument");
            }
            // keyword argument: the keyword itself is dropped like any identifier
            if matches!(self.tok(), Tok::Name(_))
                && matches!(self.toks.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Op("=")))
            {
                self.advance();
                self.advance();
            }
            let arg = self.test()?;
            if self.is_kw("for") {
                args.push(self.comprehension(arg)?);
            } else {
                args.push(arg);
            }
            if !self.eat_op(",") {
                self.expect_op(")")?;
                return Ok(args);
            }
        }
    }

    fn subscript(&mut self) -> PResult<AstNode> {
        if self.is_op(":") {
            return unsupported(self.line(), "slice");
        }
        let first = self.test()?;
        if self.is_op(":") {
            return unsupported(self.line(), "slice");
        }
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.test()?);
            if self.is_op(":") {
                return unsupported(self.line(), "slice");
            }
        }
        Ok(AstNode::with(NodeKind::TupleLit, items))
    }

    fn comprehension(&mut self, element: AstNode) -> PResult<AstNode> {
        self.expect_kw("for")?;
        let target = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.or_test()?;
        let mut children = vec![element, target, iter];
        loop {
            if self.is_kw("if") {
                self.advance();
                children.push(self.or_test()?);
            } else if self.is_kw("for") {
                return unsupported(self.line(), "multi-clause comprehension");
            } else if self.is_kw("async") {
                return unsupported(self.line(), "async comprehension");
            } else {
                break;
            }
        }
        Ok(AstNode::with(NodeKind::Comprehension, children))
    }

    fn atom(&mut self) -> PResult<AstNode> {
        let line = self.line();
        match self.tok().clone() {
            Tok::Name(name) => {
                self.advance();
                Ok(match name.as_str() {
                    "True" | "False" => AstNode::leaf(NodeKind::BoolLit),
                    "None" => AstNode::leaf(NodeKind::NoneLit),
                    "lambda" | "yield" | "await" => return unsupported(line, &name),
                    _ if is_reserved(&name) => {
                        return Err(AstError::Parse {
                            line,
                            expected: format!("an expression, found keyword `{name}`"),
                        })
                    }
                    _ if self.is_op("(") && self.canon.api_whitelist.contains(&name) => {
                        AstNode::api(name)
                    }
                    _ => AstNode::leaf(NodeKind::NamePlaceholder),
                })
            }
            Tok::Number => {
                self.advance();
                Ok(AstNode::leaf(NodeKind::NumLit))
            }
            Tok::Str => {
                while matches!(self.tok(), Tok::Str) {
                    self.advance();
                }
                Ok(AstNode::leaf(NodeKind::StrLit))
            }
            Tok::Op("(") => {
                self.advance();
                if self.eat_op(")") {
                    return Ok(AstNode::with(NodeKind::TupleLit, Vec::new()));
                }
                if self.is_op("*") {
                    return unsupported(line, "starred expression");
                }
                let first = self.test()?;
                if self.is_op(":=") {
                    return unsupported(line, "assignment expression");
                }
                if self.is_kw("for") {
                    let comp = self.comprehension(first)?;
                    self.expect_op(")")?;
                    return Ok(comp);
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op(")")?;
                Ok(AstNode::with(NodeKind::TupleLit, items))
            }
            Tok::Op("[") => {
                self.advance();
                if self.eat_op("]") {
                    return Ok(AstNode::with(NodeKind::ListLit, Vec::new()));
                }
                if self.is_op("*") {
                    return unsupported(line, "starred expression");
                }
                let first = self.test()?;
                if self.is_kw("for") {
                    let comp = self.comprehension(first)?;
                    self.expect_op("]")?;
                    return Ok(comp);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("]") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op("]")?;
                Ok(AstNode::with(NodeKind::ListLit, items))
            }
            Tok::Op("{") => unsupported(line, "dict or set literal"),
            Tok::Op("...") => unsupported(line, "ellipsis"),
            Tok::Op("*") => unsupported(line, "starred expression"),
            Tok::Indent => self.error("an expression (unexpected indent)"),
            _ => self.error("an expression"),
        }
    }
}

fn is_aug_assign(op: &str) -> bool {
    matches!(
        op,
        "+=" | "-=" | "*=" | "/=" | "//=" | "%=" | "**=" | ">>=" | "<<=" | "&=" | "|=" | "^=" | "@="
    )
}

fn is_reserved(name: &str) -> bool {
    matches!(
        name,
        "and"
            | "or"
            | "not"
            | "in"
            | "is"
            | "if"
            | "else"
            | "elif"
            | "for"
            | "while"
            | "def"
            | "return"
            | "break"
            | "continue"
            | "pass"
            | "import"
            | "from"
            | "class"
            | "try"
            | "except"
            | "finally"
            | "with"
            | "as"
            | "global"
            | "nonlocal"
            | "del"
            | "assert"
            | "raise"
    )
}

fn check_assignable(node: &AstNode, line: usize) -> PResult<()> {
    match node.kind {
        NodeKind::NamePlaceholder | NodeKind::Attribute | NodeKind::Subscript => Ok(()),
        NodeKind::TupleLit | NodeKind::ListLit => node
            .children
            .iter()
            .try_for_each(|c| check_assignable(c, line)),
        _ => Err(AstError::Parse {
            line,
            expected: "an assignable target".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::ApiWhitelist;
    use NodeKind::*;

    fn canon(names: &[&str]) -> Canonicalization {
        Canonicalization {
            api_whitelist: ApiWhitelist::new(names.iter().copied()),
            strict: true,
        }
    }

    fn parse_root(src: &str, names: &[&str]) -> AstNode {
        parse("q", src, &canon(names)).unwrap().ast.root
    }

    fn n(kind: NodeKind, children: Vec<AstNode>) -> AstNode {
        AstNode::with(kind, children)
    }

    fn leaf(kind: NodeKind) -> AstNode {
        AstNode::leaf(kind)
    }

    #[test]
    fn whitelisted_call_keeps_name() {
        let root = parse_root("def f(v):\n    return simple_qa(v)", &["simple_qa"]);
        let expected = n(
            FunctionDef,
            vec![n(
                Return,
                vec![n(Call, vec![AstNode::api("simple_qa"), leaf(NamePlaceholder)])],
            )],
        );
        assert_eq!(root, expected);
    }

    #[test]
    fn non_whitelisted_call_is_placeholder() {
        let root = parse_root("def f(v):\n    x = helper(v)", &["simple_qa"]);
        let call = &root.children[0].children[1];
        assert_eq!(call.kind, Call);
        assert_eq!(call.children[0].kind, NamePlaceholder);
    }

    #[test]
    fn for_break_node_count() {
        // FunctionDef, For, target, iter, Break
        let out = parse("q", "def f(v):\n    for i in v:\n        break", &canon(&[])).unwrap();
        assert_eq!(out.ast.node_count, 5);
        assert_eq!(
            out.ast.root,
            n(
                FunctionDef,
                vec![n(
                    For,
                    vec![leaf(NamePlaceholder), leaf(NamePlaceholder), leaf(Break)]
                )]
            )
        );
    }

    #[test]
    fn method_call_on_api_attribute() {
        let root = parse_root(
            "def execute_command(video, possible_answers, question):\n    \
             for frame in video.frame_iterator():\n        \
             if frame.exists('dog'):\n            break\n",
            &["frame_iterator", "exists"],
        );
        let for_node = &root.children[0];
        assert_eq!(for_node.kind, For);
        let iter = &for_node.children[1];
        assert_eq!(iter.kind, Call);
        assert_eq!(
            iter.children[0],
            n(Attribute, vec![leaf(NamePlaceholder), AstNode::api("frame_iterator")])
        );
        let if_node = &for_node.children[2];
        assert_eq!(if_node.kind, If);
        assert_eq!(if_node.children[0].children.len(), 2);
        assert_eq!(if_node.children[1].kind, Break);
        assert_eq!(if_node.mandatory_mask, vec![true, false]);
    }

    #[test]
    fn elif_else_chain() {
        let root = parse_root(
            "def f(a):\n    if a < 1:\n        x = 1\n    elif a == 2:\n        x = 2\n    elif a:\n        x = 3\n    else:\n        x = 4\n",
            &[],
        );
        let if_node = &root.children[0];
        let kinds: Vec<_> = if_node.children.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![Compare, Assign, ElifBranch, ElifBranch, ElseBranch]);
        assert_eq!(if_node.children[0].label.as_deref(), Some("<"));
    }

    #[test]
    fn operators_are_labelled() {
        let root = parse_root(
            "def f(a, b):\n    x = not a and b or a\n    y = -a + b // 2\n    z = a not in b is not None\n    x += 1\n",
            &[],
        );
        let x = &root.children[0].children[1];
        assert_eq!(x.kind, BoolOp);
        assert_eq!(x.label.as_deref(), Some("or"));
        assert_eq!(x.children[0].label.as_deref(), Some("and"));
        assert_eq!(x.children[0].children[0].label.as_deref(), Some("not"));
        let y = &root.children[1].children[1];
        assert_eq!(y.label.as_deref(), Some("+"));
        assert_eq!(y.children[0].label.as_deref(), Some("-"));
        assert_eq!(y.children[1].label.as_deref(), Some("//"));
        let z = &root.children[2].children[1];
        assert_eq!(z.label.as_deref(), Some("not in,is not"));
        assert_eq!(z.children.len(), 3);
        let aug = &root.children[3];
        assert_eq!(aug.kind, AugAssign);
        assert_eq!(aug.label.as_deref(), Some("+="));
    }

    #[test]
    fn literals_lose_values() {
        let a = parse_root("def f():\n    x = [1, 'a', True, None, 2.5]\n", &[]);
        let b = parse_root("def g():\n    y = [7, \"zz\", False, None, 1e3]\n", &[]);
        assert_eq!(a, b);
        let list = &a.children[0].children[1];
        let kinds: Vec<_> = list.children.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![NumLit, StrLit, BoolLit, NoneLit, NumLit]);
    }

    #[test]
    fn ternary_and_comprehension() {
        let root = parse_root(
            "def f(v):\n    a = 1 if v else 2\n    b = [len(x) for x in v if x]\n    c = sum(x for x in v)\n",
            &["len", "sum"],
        );
        assert_eq!(root.children[0].children[1].kind, IfExp);
        let comp = &root.children[1].children[1];
        assert_eq!(comp.kind, Comprehension);
        assert_eq!(comp.children.len(), 4);
        assert_eq!(comp.mandatory_mask, vec![true, true, true, false]);
        let sum_call = &root.children[2].children[1];
        assert_eq!(sum_call.children[1].kind, Comprehension);
    }

    #[test]
    fn keyword_arguments_keep_values() {
        let root = parse_root("def f(p):\n    p.simple_query(question='x')\n", &["simple_query"]);
        let call = &root.children[0].children[0];
        assert_eq!(call.children.len(), 2);
        assert_eq!(call.children[1].kind, StrLit);
    }

    #[test]
    fn docstring_is_expr_stmt() {
        let root = parse_root("def f():\n    \"\"\"Doc.\"\"\"\n    return\n", &[]);
        assert_eq!(root.children[0], n(ExprStmt, vec![leaf(StrLit)]));
        assert_eq!(root.children[1], n(Return, vec![]));
    }

    #[test]
    fn tuple_unpacking_and_subscript() {
        let root = parse_root("def f(v):\n    a, b = v[0], v[-1]\n", &[]);
        let assign = &root.children[0];
        assert_eq!(assign.children[0].kind, TupleLit);
        assert_eq!(assign.children[1].children[1].kind, Subscript);
        assert_eq!(assign.mandatory_mask, vec![true, true]);
    }

    #[test]
    fn single_line_suite() {
        let root = parse_root("def f(v):\n    if v: return v\n", &[]);
        assert_eq!(root.children[0].children[1].kind, Return);
    }

    #[test]
    fn missing_function() {
        let err = parse("q", "", &canon(&[])).unwrap_err();
        assert_eq!(err, AstError::MissingFunction);
    }

    #[test]
    fn two_functions_rejected() {
        let err = parse("q", "def f():\n    return\ndef g():\n    return\n", &canon(&[]))
            .unwrap_err();
        assert!(matches!(err, AstError::Parse { line: 3, .. }));
    }

    #[test]
    fn malformed_syntax_reports_line() {
        let err = parse("q", "def f(v):\n    x = (1 +\n", &canon(&[])).unwrap_err();
        assert!(matches!(err, AstError::Parse { .. }));
        let err = parse("q", "def f(v):\n    for in v:\n        break\n", &canon(&[])).unwrap_err();
        assert!(matches!(err, AstError::Parse { line: 2, .. }));
    }

    #[test]
    fn strict_mode_rejects_unsupported() {
        let src = "def f(v):\n    x = v[1:3]\n    return x\n";
        let err = parse("q", src, &canon(&[])).unwrap_err();
        assert_eq!(
            err,
            AstError::UnsupportedConstruct {
                line: 2,
                construct: "slice".into()
            }
        );
    }

    #[test]
    fn permissive_mode_emits_opaque() {
        let src = "def f(v):\n    try:\n        x = 1\n    except Exception:\n        x = 2\n    d = {1: 2}\n    return x\n";
        let mut c = canon(&[]);
        c.strict = false;
        let out = parse("q", src, &c).unwrap();
        let kinds: Vec<_> = out.ast.root.children.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![OpaqueStmt, OpaqueStmt, Return]);
        assert_eq!(out.opaque.len(), 2);
        assert_eq!(out.opaque[0].construct, "try");
        assert_eq!(out.opaque[1].construct, "dict or set literal");
        assert_eq!(out.opaque[1].line, 6);
    }

    #[test]
    fn permissive_nested_unsupported_stays_local() {
        let src = "def f(v):\n    for x in v:\n        pass\n        break\n";
        let mut c = canon(&[]);
        c.strict = false;
        let out = parse("q", src, &c).unwrap();
        let for_node = &out.ast.root.children[0];
        let kinds: Vec<_> = for_node.children.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![NamePlaceholder, NamePlaceholder, OpaqueStmt, Break]);
    }

    #[test]
    fn alpha_equivalence() {
        let a = parse_root(
            "def execute_command(video, answers, question):\n    count = 0\n    for frame in video.frame_iterator():\n        if frame.exists('cat') and count < 3:\n            count += 1\n    return count\n",
            &["frame_iterator", "exists"],
        );
        let b = parse_root(
            "def run(v, a, q):\n    n = 10\n    for f in v.frame_iterator():\n        if f.exists(\"dog\") and n < 99:\n            n += 2\n    return n\n",
            &["frame_iterator", "exists"],
        );
        assert_eq!(a, b);
        a.check_invariants().unwrap();
    }
}
