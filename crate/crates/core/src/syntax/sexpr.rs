//! S-expression reader with line/column spans.
//!
//! Atoms are maximal runs of characters other than whitespace, `(`, `)` and
//! `;`. A `;` starts a comment running to the end of the line.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Byte range plus the 1-based line and column of its first character.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl SyntaxError {
    pub fn new(message: impl Into<String>, span: Span) -> SyntaxError {
        SyntaxError { message: message.into(), span }
    }
}

#[derive(Clone, Debug)]
pub enum SexpKind {
    Atom(String),
    List(Vec<Sexp>),
}

/// A node of the forest. Equality ignores spans.
#[derive(Clone, Debug)]
pub struct Sexp {
    pub kind: SexpKind,
    pub span: Span,
}

impl PartialEq for Sexp {
    fn eq(&self, other: &Sexp) -> bool {
        match (&self.kind, &other.kind) {
            (SexpKind::Atom(a), SexpKind::Atom(b)) => a == b,
            (SexpKind::List(a), SexpKind::List(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Sexp {}

impl Sexp {
    pub fn atom(text: &str) -> Sexp {
        Sexp { kind: SexpKind::Atom(text.to_string()), span: Span::default() }
    }

    pub fn list(items: Vec<Sexp>) -> Sexp {
        Sexp { kind: SexpKind::List(items), span: Span::default() }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Atom(a) => Some(a),
            SexpKind::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(items) => Some(items),
            SexpKind::Atom(_) => None,
        }
    }

    /// The leading atom of a non-empty list.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(Sexp::as_atom)
    }

    pub fn expect_atom(&self, what: &str) -> Result<&str, SyntaxError> {
        self.as_atom().ok_or_else(|| SyntaxError::new(format!("expected {what}"), self.span))
    }

    pub fn expect_list(&self, what: &str) -> Result<&[Sexp], SyntaxError> {
        self.as_list().ok_or_else(|| SyntaxError::new(format!("expected {what}"), self.span))
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SexpKind::Atom(a) => f.write_str(a),
            SexpKind::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || c == '(' || c == ')' || c == ';'
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span { start: self.pos, end: self.pos, line: self.line, col: self.col }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }
}

/// Reads every top-level form of `text`.
pub fn parse(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut cur = Cursor { text, pos: 0, line: 1, col: 1 };
    let mut stack: Vec<(Span, Vec<Sexp>)> = Vec::new();
    let mut top = Vec::new();
    loop {
        cur.skip_trivia();
        let start = cur.here();
        let Some(c) = cur.peek() else { break };
        let node = match c {
            '(' => {
                cur.bump();
                stack.push((start, Vec::new()));
                continue;
            }
            ')' => {
                cur.bump();
                let Some((open, items)) = stack.pop() else {
                    return Err(SyntaxError::new("unexpected ')'", start));
                };
                Sexp { kind: SexpKind::List(items), span: Span { end: cur.pos, ..open } }
            }
            _ => {
                while cur.peek().is_some_and(|c| !is_delimiter(c)) {
                    cur.bump();
                }
                let atom = &text[start.start..cur.pos];
                Sexp { kind: SexpKind::Atom(atom.to_string()), span: Span { end: cur.pos, ..start } }
            }
        };
        match stack.last_mut() {
            Some((_, items)) => items.push(node),
            None => top.push(node),
        }
    }
    if let Some((open, _)) = stack.pop() {
        return Err(SyntaxError::new("unclosed '('", open));
    }
    Ok(top)
}
