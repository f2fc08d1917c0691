//! Line-oriented tokenizer with Python-style indentation tokens.
//!
//! Newlines inside brackets are ignored, `#` starts a comment, and
//! blank or comment-only lines never affect indentation.

use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Star,
    Slash,
    Percent,
    Plus,
    Minus,
    Gt,
    Lt,
    EqEq,
    Assign,
    Question,
    Semi,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Int(v) => return write!(f, "integer `{v}`"),
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Colon => "`:`",
            Tok::Dot => "`.`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Gt => "`>`",
            Tok::Lt => "`<`",
            Tok::EqEq => "`==`",
            Tok::Assign => "`=`",
            Tok::Question => "`?`",
            Tok::Semi => "`;`",
            Tok::Newline => "end of line",
            Tok::Indent => "indentation",
            Tok::Dedent => "dedent",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;

    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;

        if depth == 0 {
            let mut width = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                width += if chars[i] == '\t' { 4 } else { 1 };
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' {
                continue;
            }
            let current = *indents.last().expect("indent stack is never empty");
            if width > current {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, line, col: 1 });
            } else {
                while width < *indents.last().expect("indent stack is never empty") {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, line, col: 1 });
                }
                if width != *indents.last().expect("indent stack is never empty") {
                    return Err(ParseError::Syntax {
                        line,
                        col: i + 1,
                        expected: "indentation matching an enclosing block".into(),
                        found: format!("{width} columns"),
                    });
                }
            }
        }

        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == ' ' || c == '\t' || c == '\r' {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                    line,
                    col,
                    expected: "integer literal that fits in 64 bits".into(),
                    found: text.clone(),
                })?;
                out.push(Token { tok: Tok::Int(v), line, col });
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line, col });
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('=', _) => (Tok::Assign, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (',', _) => (Tok::Comma, 1),
                (':', _) => (Tok::Colon, 1),
                ('.', _) => (Tok::Dot, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('%', _) => (Tok::Percent, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('>', _) => (Tok::Gt, 1),
                ('<', _) => (Tok::Lt, 1),
                ('?', _) => (Tok::Question, 1),
                (';', _) => (Tok::Semi, 1),
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        expected: "a token".into(),
                        found: format!("character `{c}`"),
                    })
                }
            };
            match tok {
                Tok::LParen | Tok::LBracket => depth += 1,
                Tok::RParen | Tok::RBracket => depth = depth.saturating_sub(1),
                _ => {}
            }
            out.push(Token { tok, line, col });
            i += len;
        }

        if depth == 0 && out.last().is_some_and(|t| t.tok != Tok::Newline && t.tok != Tok::Indent) {
            out.push(Token { tok: Tok::Newline, line, col: chars.len() + 1 });
        }
    }

    let end_line = source.lines().count().max(1);
    if out.last().is_some_and(|t| t.tok != Tok::Newline) {
        out.push(Token { tok: Tok::Newline, line: end_line, col: 1 });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, line: end_line, col: 1 });
    }
    out.push(Token { tok: Tok::Eof, line: end_line, col: 1 });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_produces_block_tokens() {
        let toks = kinds("def f(x):\n    return x\ny = 1\n");
        assert!(toks.contains(&Tok::Indent));
        assert!(toks.contains(&Tok::Dedent));
        assert_eq!(toks.last(), Some(&Tok::Eof));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let toks = kinds("# header\n\nx = 1 # trailing\n   # indented comment\ny = 2\n");
        assert!(!toks.contains(&Tok::Indent));
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 2);
    }

    #[test]
    fn brackets_join_lines() {
        let toks = kinds("x = (1,\n     2)\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
        assert!(!toks.contains(&Tok::Indent));
    }

    #[test]
    fn operators() {
        let toks = kinds("a == b = c ? d : e");
        assert_eq!(toks[1], Tok::EqEq);
        assert_eq!(toks[3], Tok::Assign);
        assert_eq!(toks[5], Tok::Question);
    }

    #[test]
    fn bad_dedent_is_reported() {
        let err = tokenize("def f(x):\n    y = 1\n  return y\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 3, .. }));
    }

    #[test]
    fn stray_character() {
        assert!(matches!(tokenize("x = 1 @ 2"), Err(ParseError::Syntax { line: 1, col: 7, .. })));
    }
}
