//! Surface syntax: the s-expression reader, system files and proof scripts.

pub mod proof;
pub mod sexpr;
pub mod system;

pub use sexpr::{parse as parse_sexps, Sexp, SexpKind, Span, SyntaxError};

use crate::elem::{parse_rational, Elem, Rational};

pub(crate) fn rational(s: &Sexp, what: &str) -> Result<Rational, SyntaxError> {
    let text = s.expect_atom(what)?;
    parse_rational(text).ok_or_else(|| SyntaxError::new(format!("expected {what}, got {text}"), s.span))
}

pub(crate) fn natural(s: &Sexp, what: &str) -> Result<usize, SyntaxError> {
    let text = s.expect_atom(what)?;
    text.parse().map_err(|_| SyntaxError::new(format!("expected {what}, got {text}"), s.span))
}

/// A carrier element: a rational literal or a symbol.
pub(crate) fn element(s: &Sexp) -> Result<Elem, SyntaxError> {
    let text = s.expect_atom("an element")?;
    Ok(match parse_rational(text) {
        Some(r) => Elem::Num(r),
        None => Elem::atom(text),
    })
}

pub(crate) fn arity_error(s: &Sexp, form: &str, expected: &str) -> SyntaxError {
    SyntaxError::new(format!("{form} expects {expected}"), s.span)
}
