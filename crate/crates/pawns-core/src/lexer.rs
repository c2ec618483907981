//! Tokenizer. `--` starts a comment running to end of line. Every
//! non-whitespace byte belongs to exactly one token; an illegal character
//! stops the scan with a single E001.

use crate::diag::{Code, Diagnostic};
use crate::span::Span;
use crate::token::{Kw, TokKind, Token};

pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = source.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($kind:expr, $start:expr, $startcol:expr, $len:expr) => {{
            toks.push(Token {
                kind: $kind,
                span: Span::new(line, $startcol, $start as u32, $len as u32),
            });
        }};
    }

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
            }
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            b'-' if i + 1 < bytes.len() && bytes[i + 1] == b'-' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                    col += 1;
                }
            }
            b'-' if i + 1 < bytes.len() && bytes[i + 1] == b'>' => {
                push!(TokKind::Arrow, i, col, 2);
                i += 2;
                col += 2;
            }
            b'-' => {
                push!(TokKind::Minus, i, col, 1);
                i += 1;
                col += 1;
            }
            b'(' => {
                push!(TokKind::LParen, i, col, 1);
                i += 1;
                col += 1;
            }
            b')' => {
                push!(TokKind::RParen, i, col, 1);
                i += 1;
                col += 1;
            }
            b'{' => {
                push!(TokKind::LBrace, i, col, 1);
                i += 1;
                col += 1;
            }
            b'}' => {
                push!(TokKind::RBrace, i, col, 1);
                i += 1;
                col += 1;
            }
            b';' => {
                push!(TokKind::Semi, i, col, 1);
                i += 1;
                col += 1;
            }
            b',' => {
                push!(TokKind::Comma, i, col, 1);
                i += 1;
                col += 1;
            }
            b'!' => {
                push!(TokKind::Bang, i, col, 1);
                i += 1;
                col += 1;
            }
            b'|' => {
                push!(TokKind::Pipe, i, col, 1);
                i += 1;
                col += 1;
            }
            b'+' => {
                push!(TokKind::Plus, i, col, 1);
                i += 1;
                col += 1;
            }
            b'*' => {
                let tight = i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_lowercase()
                        || bytes[i + 1] == b'!'
                        || bytes[i + 1] == b'(');
                push!(TokKind::Star { tight }, i, col, 1);
                i += 1;
                col += 1;
            }
            b':' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    push!(TokKind::Assign, i, col, 2);
                    i += 2;
                    col += 2;
                } else if i + 1 < bytes.len() && bytes[i + 1] == b':' {
                    push!(TokKind::DoubleColon, i, col, 2);
                    i += 2;
                    col += 2;
                } else {
                    return Err(illegal(source, line, col, i));
                }
            }
            b'=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    push!(TokKind::EqEq, i, col, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(TokKind::Equals, i, col, 1);
                    i += 1;
                    col += 1;
                }
            }
            b'<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    push!(TokKind::Le, i, col, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(TokKind::Lt, i, col, 1);
                    i += 1;
                    col += 1;
                }
            }
            b'>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    push!(TokKind::Ge, i, col, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(TokKind::Gt, i, col, 1);
                    i += 1;
                    col += 1;
                }
            }
            b'_' => {
                // Bare wildcard only; `_x` is not an identifier.
                push!(TokKind::Underscore, i, col, 1);
                i += 1;
                col += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                let startcol = col;
                let mut value: i64 = 0;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    value = value
                        .wrapping_mul(10)
                        .wrapping_add((bytes[i] - b'0') as i64);
                    i += 1;
                    col += 1;
                }
                push!(TokKind::IntLit(value), start, startcol, i - start);
            }
            b'a'..=b'z' => {
                let start = i;
                let startcol = col;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                    col += 1;
                }
                let text = &source[start..i];
                let kind = match Kw::from_str(text) {
                    Some(kw) => TokKind::Kw(kw),
                    None => TokKind::Ident(text.to_string()),
                };
                push!(kind, start, startcol, i - start);
            }
            b'A'..=b'Z' => {
                let start = i;
                let startcol = col;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                    col += 1;
                }
                push!(
                    TokKind::CtorName(source[start..i].to_string()),
                    start,
                    startcol,
                    i - start
                );
            }
            _ => return Err(illegal(source, line, col, i)),
        }
    }
    Ok(toks)
}

fn illegal(source: &str, line: u32, col: u32, offset: usize) -> Diagnostic {
    let ch = source[offset..].chars().next().unwrap_or('?');
    Diagnostic::error(
        Code::E001,
        Span::new(line, col, offset as u32, ch.len_utf8() as u32),
        format!("illegal character `{}`", ch),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_statement_tokens() {
        let toks = tokenize("*!tp := Node Empty x Empty").unwrap();
        let kinds: Vec<String> = toks.iter().map(|t| t.kind.to_string()).collect();
        assert_eq!(kinds, vec!["*", "!", "tp", ":=", "Node", "Empty", "x", "Empty"]);
        assert!(matches!(toks[0].kind, TokKind::Star { tight: true }));
        assert!(matches!(toks[2].kind, TokKind::Ident(_)));
        assert!(matches!(toks[4].kind, TokKind::CtorName(_)));
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn illegal_character_is_e001() {
        let err = tokenize("x = 4#2").unwrap_err();
        assert_eq!(err.code, Code::E001);
        assert_eq!(err.span.col, 6);
        assert!(err.message.contains('#'));
    }

    #[test]
    fn keywords_are_keywords() {
        for kw in [
            "data", "type", "case", "of", "if", "then", "else", "sharing", "pre", "post",
            "nosharing", "implicit", "ro", "wo", "rw", "renaming", "with", "abstract", "inferred",
        ] {
            let toks = tokenize(kw).unwrap();
            assert!(matches!(toks[0].kind, TokKind::Kw(_)), "{} not a keyword", kw);
        }
        // div/mod are ordinary identifiers handled by the parser.
        assert!(matches!(tokenize("div").unwrap()[0].kind, TokKind::Ident(_)));
    }

    #[test]
    fn spans_reconstruct_source() {
        let src = "x = 42;  -- comment\n*xp = x";
        let toks = tokenize(src).unwrap();
        // Non-overlapping, ordered, and lexemes match the source slices.
        let mut last_end = 0u32;
        for t in &toks {
            assert!(t.span.offset >= last_end);
            last_end = t.span.end_offset();
            let lexeme = &src[t.span.offset as usize..t.span.end_offset() as usize];
            assert_eq!(lexeme, t.kind.to_string());
        }
    }

    #[test]
    fn star_tightness() {
        let toks = tokenize("a * b").unwrap();
        assert!(matches!(toks[1].kind, TokKind::Star { tight: false }));
        let toks = tokenize("f *b").unwrap();
        assert!(matches!(toks[1].kind, TokKind::Star { tight: true }));
    }

    #[test]
    fn int_literal_wraps() {
        let toks = tokenize("99999999999999999999999").unwrap();
        assert!(matches!(toks[0].kind, TokKind::IntLit(_)));
    }
}
