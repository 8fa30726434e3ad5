use super::AstError;

#[derive(Clone, Copy, PartialEq, Eq)]
enum StringState {
    Code,
    /// Inside a single-quoted literal continued with a trailing backslash.
    Single { quote: char, start: usize },
    Triple { quote: char, start: usize },
}

/// Removes `#` comments (full-line and trailing) and blank lines.
///
/// `#` inside string literals is preserved. Leading indentation is kept as is,
/// trailing whitespace is trimmed. Every kept line is terminated by `\n`.
pub fn strip_noise(source: &str) -> Result<String, AstError> {
    let mut out = String::with_capacity(source.len());
    let mut state = StringState::Code;

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut cut = line.len();
        let mut i = 0;

        while i < chars.len() {
            let (pos, c) = chars[i];
            match state {
                StringState::Triple { quote, .. } => {
                    if c == '\\' {
                        i += 2;
                        continue;
                    }
                    if c == quote && is_triple(&chars, i, quote) {
                        state = StringState::Code;
                        i += 3;
                        continue;
                    }
                    i += 1;
                }
                StringState::Single { quote, .. } => {
                    if c == '\\' {
                        i += 2;
                        continue;
                    }
                    if c == quote {
                        state = StringState::Code;
                    }
                    i += 1;
                }
                StringState::Code => {
                    if c == '#' {
                        cut = pos;
                        break;
                    }
                    if c == '"' || c == '\'' {
                        if is_triple(&chars, i, c) {
                            state = StringState::Triple {
                                quote: c,
                                start: line_no,
                            };
                            i += 3;
                        } else {
                            state = StringState::Single {
                                quote: c,
                                start: line_no,
                            };
                            i += 1;
                        }
                        continue;
                    }
                    i += 1;
                }
            }
        }

        if let StringState::Single { start, .. } = state {
            // A single-quoted literal may only span lines via a trailing backslash.
            if !line.ends_with('\\') {
                return Err(AstError::UnterminatedString { line: start });
            }
        }

        let kept = line[..cut].trim_end();
        if !kept.trim_start().is_empty() {
            out.push_str(kept);
            out.push('\n');
        }
    }

    match state {
        StringState::Code => Ok(out),
        StringState::Single { start, .. } | StringState::Triple { start, .. } => {
            Err(AstError::UnterminatedString { line: start })
        }
    }
}

fn is_triple(chars: &[(usize, char)], i: usize, quote: char) -> bool {
    chars.len() >= i + 3 && chars[i + 1].1 == quote && chars[i + 2].1 == quote
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn removes_comments_and_blank_lines() {
        assert_eq!(
            strip_noise("x = 1\n\n# c\ny = 2  # t\n").unwrap(),
            "x = 1\ny = 2\n"
        );
    }

    #[test]
    fn hash_inside_string_is_kept() {
        let src = "s = \"a # not comment\"\n";
        assert_eq!(strip_noise(src).unwrap(), src);
        let src = "s = 'it''s # fine'  # gone\n";
        assert_eq!(strip_noise(src).unwrap(), "s = 'it''s # fine'\n");
    }

    #[test]
    fn all_blank_is_empty() {
        assert_eq!(strip_noise("\n\n\n").unwrap(), "");
        assert_eq!(strip_noise("").unwrap(), "");
    }

    #[test]
    fn indentation_preserved() {
        let src = "def f(v):\n    # note\n    if v:\n        return 1\n";
        assert_eq!(
            strip_noise(src).unwrap(),
            "def f(v):\n    if v:\n        return 1\n"
        );
    }

    #[test]
    fn docstrings_are_code() {
        let src = "def f():\n    \"\"\"Doc.\n    # not a comment\n    \"\"\"\n    return 1\n";
        assert_eq!(strip_noise(src).unwrap(), src);
    }

    #[test]
    fn escaped_quote_does_not_close() {
        let src = "s = \"a \\\" # still string\"\n";
        assert_eq!(strip_noise(src).unwrap(), src);
    }

    #[test]
    fn unterminated_single_quote() {
        assert_eq!(
            strip_noise("x = 1\ny = 'abc\n"),
            Err(AstError::UnterminatedString { line: 2 })
        );
    }

    #[test]
    fn unterminated_triple_quote_reports_opening_line() {
        assert_eq!(
            strip_noise("x = 1\n\ny = \"\"\"abc\nmore\n"),
            Err(AstError::UnterminatedString { line: 3 })
        );
    }

    #[test]
    fn crlf_input() {
        assert_eq!(strip_noise("a = 1\r\n\r\n# c\r\n").unwrap(), "a = 1\n");
    }

    proptest! {
        #[test]
        fn idempotent(lines in proptest::collection::vec(
            prop_oneof![
                Just("x = 1".to_string()),
                Just("    y = f(x)  # trailing".to_string()),
                Just("# comment".to_string()),
                Just("".to_string()),
                Just("   ".to_string()),
                Just("s = 'a # b'".to_string()),
                Just("t = \"\"\"doc".to_string()),
                Just("  # inside? \"\"\"".to_string()),
                "[a-z =#]{0,12}",
            ],
            0..12,
        )) {
            let src = lines.join("\n");
            if let Ok(once) = strip_noise(&src) {
                prop_assert_eq!(strip_noise(&once).unwrap(), once);
            }
        }
    }
}
