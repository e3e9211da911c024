//! Tokenizer and positioned diagnostics shared by the three text formats
//! (bound expressions, DCP files and concrete program files).

use std::fmt;

/// A message attached to a 1-based line/column position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

/// All diagnostics produced while reading one input.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn single(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            diagnostics: vec![Diagnostic::new(pos, message)],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Unsigned decimal literal, kept as text so callers pick the width.
    Int(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(s) => write!(f, "integer `{s}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte offset one past the token.
    pub end: usize,
}

// Longest first so that `->` wins over `-`.
const PUNCTS: &[&str] = &[
    "->", "<=", ">=", "==", ":=", "&&", "<", ">", "=", "'", "+", "-", "*", ",", ":", ";", "{", "}",
    "(", ")", "?",
];

/// Splits `src` into tokens. `#` starts a comment running to end of line.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos {
            line,
            col: src[line_start..i].chars().count() + 1,
            offset: i,
        };
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                pos,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Int(src[start..i].to_string()),
                pos,
                end: i,
            });
            continue;
        }
        for p in PUNCTS {
            if src[i..].starts_with(p) {
                i += p.len();
                out.push(Token {
                    tok: Tok::Punct(p),
                    pos,
                    end: i,
                });
                continue 'outer;
            }
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(ParseError::single(
            pos,
            format!("unexpected character `{ch}`"),
        ));
    }
    let pos = Pos {
        line,
        col: src[line_start..].chars().count() + 1,
        offset: src.len(),
    };
    out.push(Token {
        tok: Tok::Eof,
        pos,
        end: src.len(),
    });
    Ok(out)
}

/// Cursor over a token vector with the usual expect/eat helpers.
pub struct Cursor<'s> {
    pub src: &'s str,
    toks: Vec<Token>,
    idx: usize,
}

impl<'s> Cursor<'s> {
    pub fn new(src: &'s str) -> Result<Self, ParseError> {
        Ok(Cursor {
            src,
            toks: tokenize(src)?,
            idx: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.idx].tok
    }

    pub fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.idx + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.idx].pos
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
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

    pub fn expect_punct(&mut self, p: &str) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.eat_punct(p) {
            Ok(pos)
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.is_keyword(kw) {
            self.bump();
            Ok(pos)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// An identifier, or a parenthesized norm name such as `(l-i)`. The
    /// parenthesized form is returned with whitespace removed.
    pub fn expect_name(&mut self) -> Result<(String, Pos), ParseError> {
        if !self.is_punct("(") {
            return self.expect_ident();
        }
        let open = self.bump();
        let mut depth = 1usize;
        loop {
            let t = self.bump();
            match t.tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        let raw = &self.src[open.pos.offset..t.end];
                        let name: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
                        return Ok((name, open.pos));
                    }
                }
                Tok::Eof => {
                    return Err(ParseError::single(open.pos, "unclosed `(` in name"));
                }
                _ => {}
            }
        }
    }

    pub fn expect_int(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    /// Optionally signed integer literal that fits an `i64`.
    pub fn expect_i64(&mut self) -> Result<(i64, Pos), ParseError> {
        let pos = self.pos();
        let neg = self.eat_punct("-");
        let (digits, _) = self.expect_int()?;
        let text = if neg { format!("-{digits}") } else { digits };
        text.parse::<i64>()
            .map(|v| (v, pos))
            .map_err(|_| ParseError::single(pos, format!("integer `{text}` out of range")))
    }

    pub fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::single(
            self.pos(),
            format!("expected {wanted}, found {}", self.peek()),
        )
    }
}
