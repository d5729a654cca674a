//! Carrier elements and exact rationals.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::sde::Term;

pub type Rational = num_rational::BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `INT` or `INT/INT`. Floating literals are rejected.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, d),
        None => (text, "1"),
    };
    let valid = |s: &str| {
        let digits = s.strip_prefix('-').unwrap_or(s);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !valid(num) || !valid(den) || den.starts_with('-') {
        return None;
    }
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rational::new(n, d))
}

pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn in_unit_interval(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

/// An element of some carrier.
///
/// One representation serves every carrier in the engine: atoms of finite
/// sets, pairs for relations, tags and finite sets for the values of
/// behaviour functors, tuples for variable assignments and stream terms for
/// the SDE universe.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Elem {
    Unit,
    Atom(Arc<str>),
    Num(Rational),
    Pair(Arc<Elem>, Arc<Elem>),
    Inl(Arc<Elem>),
    Inr(Arc<Elem>),
    Set(Arc<BTreeSet<Elem>>),
    Tuple(Arc<[Elem]>),
    Stream(Arc<Term>),
}

impl Elem {
    pub fn atom(name: &str) -> Elem {
        Elem::Atom(Arc::from(name))
    }

    pub fn num(r: Rational) -> Elem {
        Elem::Num(r)
    }

    pub fn pair(a: Elem, b: Elem) -> Elem {
        Elem::Pair(Arc::new(a), Arc::new(b))
    }

    pub fn inl(a: Elem) -> Elem {
        Elem::Inl(Arc::new(a))
    }

    pub fn inr(a: Elem) -> Elem {
        Elem::Inr(Arc::new(a))
    }

    pub fn set(items: impl IntoIterator<Item = Elem>) -> Elem {
        Elem::Set(Arc::new(items.into_iter().collect()))
    }

    pub fn tuple(items: impl IntoIterator<Item = Elem>) -> Elem {
        Elem::Tuple(items.into_iter().collect::<Vec<_>>().into())
    }

    pub fn stream(t: Term) -> Elem {
        Elem::Stream(Arc::new(t))
    }

    pub fn as_pair(&self) -> Option<(&Elem, &Elem)> {
        match self {
            Elem::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Elem::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Elem]> {
        match self {
            Elem::Tuple(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            Elem::Stream(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Unit => write!(f, "*"),
            Elem::Atom(a) => write!(f, "{a}"),
            Elem::Num(r) => write!(f, "{}", fmt_rational(r)),
            Elem::Pair(a, b) => write!(f, "({a}, {b})"),
            Elem::Inl(a) => write!(f, "inl {a}"),
            Elem::Inr(a) => write!(f, "inr {a}"),
            Elem::Set(items) => {
                write!(f, "{{")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Elem::Tuple(items) => {
                write!(f, "<")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ">")
            }
            Elem::Stream(t) => write!(f, "{t}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("3/4"), Some(rat(3, 4)));
        assert_eq!(parse_rational("-2"), Some(int(-2)));
        assert_eq!(parse_rational("6/8"), Some(rat(3, 4)));
        assert_eq!(parse_rational("0.5"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("1/-2"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(fmt_rational(&rat(5, 8)), "5/8");
        assert_eq!(fmt_rational(&int(-3)), "-3");
    }
}
