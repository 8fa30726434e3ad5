use super::AstError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Name(String),
    Number,
    Str,
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    line: usize,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
}

/// Splits source text into tokens with Python's indentation semantics:
/// `Indent`/`Dedent` at block boundaries, `Newline` only at bracket depth 0.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, AstError> {
    let mut lx = Lexer {
        src: text.as_bytes(),
        text,
        pos: 0,
        line: 1,
        depth: 0,
        indents: vec![0],
        out: Vec::new(),
    };
    lx.run()?;
    Ok(lx.out)
}

impl<'a> Lexer<'a> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn push(&mut self, tok: Tok) {
        self.out.push(Token {
            tok,
            line: self.line,
        });
    }

    fn run(&mut self) -> Result<(), AstError> {
        let mut at_line_start = true;
        while self.pos < self.src.len() {
            if at_line_start && self.depth == 0 {
                // skipped blank or comment lines leave us at a line start
                if self.indentation()? {
                    continue;
                }
                at_line_start = false;
            }
            let c = self.src[self.pos];
            match c {
                b'\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        self.push(Tok::Newline);
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                b'\r' | b' ' | b'\t' | b'\x0c' => self.pos += 1,
                b'#' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\\' if matches!(self.peek(1), Some(b'\n')) => {
                    self.pos += 2;
                    self.line += 1;
                }
                b'\\' if matches!(self.peek(1), Some(b'\r')) && matches!(self.peek(2), Some(b'\n')) => {
                    self.pos += 3;
                    self.line += 1;
                }
                b'"' | b'\'' => self.string()?,
                b'0'..=b'9' => self.number(),
                b'.' if matches!(self.peek(1), Some(b'0'..=b'9')) => self.number(),
                _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => self.name_or_prefixed_string()?,
                _ => self.operator()?,
            }
        }
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent);
        }
        self.push(Tok::End);
        Ok(())
    }

    /// Handles leading whitespace of a logical line. Returns true when the
    /// line turned out blank or comment-only and was skipped entirely.
    fn indentation(&mut self) -> Result<bool, AstError> {
        let mut col = 0;
        let mut p = self.pos;
        while p < self.src.len() {
            match self.src[p] {
                b' ' => col += 1,
                b'\t' => col = (col / 8 + 1) * 8,
                b'\x0c' => col = 0,
                _ => break,
            }
            p += 1;
        }
        match self.src.get(p) {
            None => {
                self.pos = p;
                return Ok(true);
            }
            Some(b'\n') | Some(b'#') | Some(b'\r') => {
                // blank or comment-only line
                while p < self.src.len() && self.src[p] != b'\n' {
                    p += 1;
                }
                self.pos = (p + 1).min(self.src.len());
                if p < self.src.len() {
                    self.line += 1;
                }
                return Ok(true);
            }
            _ => {}
        }
        self.pos = p;
        let current = *self.indents.last().unwrap();
        if col > current {
            self.indents.push(col);
            self.push(Tok::Indent);
        } else if col < current {
            while col < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent);
            }
            if col != *self.indents.last().unwrap() {
                return Err(AstError::Parse {
                    line: self.line,
                    expected: "indentation matching an enclosing block".into(),
                });
            }
        }
        Ok(false)
    }

    fn name_or_prefixed_string(&mut self) -> Result<(), AstError> {
        let start = self.pos;
        while let Some(c) = self.peek(0) {
            if c == b'_' || c.is_ascii_alphanumeric() || c >= 0x80 {
                self.pos += 1;
            } else {
                break;
            }
        }
        let word = &self.text[start..self.pos];
        let is_prefix = word.len() <= 2
            && word
                .chars()
                .all(|c| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'u' | 'f'));
        if is_prefix && matches!(self.peek(0), Some(b'"') | Some(b'\'')) {
            return self.string();
        }
        self.push(Tok::Name(word.to_string()));
        Ok(())
    }

    fn string(&mut self) -> Result<(), AstError> {
        let quote = self.src[self.pos];
        let start_line = self.line;
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        loop {
            let Some(c) = self.peek(0) else {
                return Err(AstError::UnterminatedString { line: start_line });
            };
            match c {
                b'\\' => {
                    if self.peek(1) == Some(b'\n') {
                        self.line += 1;
                    }
                    self.pos += 2;
                }
                b'\n' => {
                    if !triple {
                        return Err(AstError::UnterminatedString { line: start_line });
                    }
                    self.line += 1;
                    self.pos += 1;
                }
                _ if c == quote => {
                    if !triple {
                        self.pos += 1;
                        break;
                    }
                    if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                        self.pos += 3;
                        break;
                    }
                    self.pos += 1;
                }
                _ => self.pos += 1,
            }
        }
        // String tokens carry the line they started on.
        self.out.push(Token {
            tok: Tok::Str,
            line: start_line,
        });
        Ok(())
    }

    fn number(&mut self) {
        let mut prev = 0u8;
        while let Some(c) = self.peek(0) {
            let exp_sign = (c == b'+' || c == b'-') && matches!(prev, b'e' | b'E');
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || exp_sign {
                // `1.real` style attribute access is not used by generated programs.
                prev = c;
                self.pos += 1;
            } else {
                break;
            }
        }
        self.push(Tok::Number);
    }

    fn operator(&mut self) -> Result<(), AstError> {
        let rest = &self.text[self.pos..];
        let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
            return Err(AstError::Parse {
                line: self.line,
                expected: format!("a token, found `{}`", rest.chars().next().unwrap_or(' ')),
            });
        };
        match *op {
            "(" | "[" | "{" => self.depth += 1,
            ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        self.pos += op.len();
        self.push(Tok::Op(op));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn comment_line_opens_block() {
        let src = "def f(v):\n    # first\n\n    x = v\n    return x\n";
        let toks = kinds(src);
        let at = toks.iter().position(|t| *t == Tok::Indent).unwrap();
        assert_eq!(toks[at - 1], Tok::Newline);
        assert_eq!(toks.iter().filter(|t| **t == Tok::Indent).count(), 1);
    }

    #[test]
    fn indentation_tokens() {
        let toks = kinds("def f():\n    x = 1\n    if x:\n        y\nz\n");
        let indents = toks.iter().filter(|t| **t == Tok::Indent).count();
        let dedents = toks.iter().filter(|t| **t == Tok::Dedent).count();
        assert_eq!(indents, 2);
        assert_eq!(dedents, 2);
        assert_eq!(toks.last(), Some(&Tok::End));
    }

    #[test]
    fn newlines_suppressed_inside_brackets() {
        let toks = kinds("x = f(1,\n      2)\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn prefixed_and_triple_strings() {
        let toks = kinds("a = f'x{y}' + rb\"z\" + '''m\nn'''\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Str).count(), 3);
    }

    #[test]
    fn bad_dedent() {
        let err = tokenize("def f():\n    x\n  y\n").unwrap_err();
        assert!(matches!(err, AstError::Parse { line: 3, .. }));
    }

    #[test]
    fn comment_lines_do_not_affect_indentation() {
        let toks = kinds("def f():\n    x\n# c\n    y\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Dedent).count(), 1);
    }

    #[test]
    fn numbers() {
        let toks = kinds("x = 1.5e-3 + 0x1F + 1_000 + .5\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Number).count(), 4);
    }
}
