//! Tokenizer shared by the chart DSL, the IR text format and the C-subset reader.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A positioned message produced by a frontend or a validator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { line: pos.line, col: pos.col, message: message.into() }
    }

    /// A diagnostic that is not tied to a source position.
    pub fn global(message: impl Into<String>) -> Self {
        Diagnostic { line: 0, col: 0, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "{}:{}: {}", self.line, self.col, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const PUNCT: &[&str] = &[
    ":=", "==", "!=", "<=", ">=", "&&", "||", "->", "++", "--", "+=", "-=", "*=", "/=", "<<", ">>",
    "{", "}", "(", ")", "[", "]", ";", ":", ",", ".", "=", "<", ">", "+", "-", "*", "/", "%", "!",
    "&", "|", "^", "~", "?", "#",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! advance {
        ($c:expr) => {{
            let ch: char = $c;
            i += 1;
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance!(c);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(chars[i]);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance!('/');
            advance!('*');
            loop {
                if i >= chars.len() {
                    return Err(Diagnostic::new(pos, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance!('*');
                    advance!('/');
                    break;
                }
                advance!(chars[i]);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!(chars[i]);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                if chars[i] == '.' {
                    // `1.` followed by a non-digit is still a float literal in C
                    if is_float {
                        break;
                    }
                    is_float = true;
                }
                advance!(chars[i]);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                advance!(chars[i]);
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    advance!(chars[i]);
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    is_float = true;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!(chars[i]);
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            // C integer/float suffixes
            while i < chars.len() && matches!(chars[i], 'u' | 'U' | 'l' | 'L' | 'f' | 'F') {
                if matches!(chars[i], 'f' | 'F') {
                    is_float = true;
                }
                advance!(chars[i]);
            }
            let tok = if is_float {
                text.parse::<f64>()
                    .map(Tok::Float)
                    .map_err(|_| Diagnostic::new(pos, format!("malformed number `{text}`")))?
            } else {
                text.parse::<i64>()
                    .map(Tok::Int)
                    .map_err(|_| Diagnostic::new(pos, format!("integer literal out of range `{text}`")))?
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            advance!(c);
            while i < chars.len() && chars[i] != '"' {
                s.push(chars[i]);
                advance!(chars[i]);
            }
            if i >= chars.len() {
                return Err(Diagnostic::new(pos, "unterminated string literal"));
            }
            advance!('"');
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                for ch in p.chars() {
                    advance!(ch);
                }
                out.push(Token { tok: Tok::Punct(p), pos });
            }
            None => return Err(Diagnostic::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

/// Cursor over a token stream with the small set of helpers the frontends share.
pub struct Cursor {
    toks: Vec<Token>,
    at: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, at: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_ident(&mut self, kw: &str) -> bool {
        if self.is_ident(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), Diagnostic> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        if self.eat_ident(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Pos), Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn expect_int(&mut self) -> Result<i64, Diagnostic> {
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::new(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_positions() {
        let toks = tokenize("a := 1;\n  b>=2.5 // c\n/* d */ e").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Punct(":="),
                Tok::Int(1),
                Tok::Punct(";"),
                Tok::Ident("b".into()),
                Tok::Punct(">="),
                Tok::Float(2.5),
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks[4].pos, Pos { line: 2, col: 3 });
        assert_eq!(toks[7].pos, Pos { line: 3, col: 9 });
    }

    #[test]
    fn c_suffixes_are_accepted() {
        let toks = tokenize("1U 2.0F 3e2").unwrap();
        assert_eq!(toks[0].tok, Tok::Int(1));
        assert_eq!(toks[1].tok, Tok::Float(2.0));
        assert_eq!(toks[2].tok, Tok::Float(300.0));
    }

    #[test]
    fn unterminated_comment_is_reported() {
        let err = tokenize("a /* b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
