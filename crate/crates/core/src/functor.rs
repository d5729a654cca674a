//! Polynomial behaviour functors over finite sets.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::elem::Elem;
use crate::error::{Error, Result};

/// Default bound on the number of elements enumerated for `F(X)` or `F^n(1)`.
pub const DEFAULT_SIZE_BOUND: usize = 100_000;

/// Grammar of behaviour functors.
///
/// `Rationals` is the infinite constant functor used for real-valued stream
/// heads; every other constant is a finite set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Functor {
    Const(Arc<[Elem]>),
    Rationals,
    Id,
    Product(Box<Functor>, Box<Functor>),
    Sum(Box<Functor>, Box<Functor>),
    FinPowerset(Box<Functor>),
}

impl Functor {
    pub fn constant(items: impl IntoIterator<Item = Elem>) -> Functor {
        let set: BTreeSet<Elem> = items.into_iter().collect();
        Functor::Const(set.into_iter().collect::<Vec<_>>().into())
    }

    pub fn product(a: Functor, b: Functor) -> Functor {
        Functor::Product(Box::new(a), Box::new(b))
    }

    pub fn sum(a: Functor, b: Functor) -> Functor {
        Functor::Sum(Box::new(a), Box::new(b))
    }

    pub fn powerset(a: Functor) -> Functor {
        Functor::FinPowerset(Box::new(a))
    }

    /// `A × Id`, the stream functor over output alphabet `A`.
    pub fn stream(alphabet: Functor) -> Functor {
        Functor::product(alphabet, Functor::Id)
    }

    /// `P(L × Id)`, the functor of finitely branching labelled transition systems.
    pub fn lts(labels: impl IntoIterator<Item = Elem>) -> Functor {
        Functor::powerset(Functor::product(Functor::constant(labels), Functor::Id))
    }

    /// True when the functor is `A × Id` for some constant `A`.
    pub fn is_stream_shaped(&self) -> bool {
        matches!(self, Functor::Product(a, b)
            if matches!(**a, Functor::Const(_) | Functor::Rationals) && **b == Functor::Id)
    }

    pub fn has_finite_constants(&self) -> bool {
        match self {
            Functor::Const(_) | Functor::Id => true,
            Functor::Rationals => false,
            Functor::Product(a, b) | Functor::Sum(a, b) => {
                a.has_finite_constants() && b.has_finite_constants()
            }
            Functor::FinPowerset(a) => a.has_finite_constants(),
        }
    }

    /// Enumerates `F(X)` for a finite `X`.
    pub fn apply_elems(&self, xs: &[Elem], bound: usize) -> Result<Vec<Elem>> {
        let too_big = |n: usize| Error::SizeBound(format!("|{self}(X)| exceeds {bound} (at least {n})"));
        let out = match self {
            Functor::Const(items) => items.to_vec(),
            Functor::Rationals => return Err(Error::NotEnumerable(self.to_string())),
            Functor::Id => xs.to_vec(),
            Functor::Product(a, b) => {
                let left = a.apply_elems(xs, bound)?;
                let right = b.apply_elems(xs, bound)?;
                let n = left.len().saturating_mul(right.len());
                if n > bound {
                    return Err(too_big(n));
                }
                let mut out = Vec::with_capacity(n);
                for l in &left {
                    for r in &right {
                        out.push(Elem::pair(l.clone(), r.clone()));
                    }
                }
                out
            }
            Functor::Sum(a, b) => {
                let mut out: Vec<Elem> = a.apply_elems(xs, bound)?.into_iter().map(Elem::inl).collect();
                out.extend(b.apply_elems(xs, bound)?.into_iter().map(Elem::inr));
                if out.len() > bound {
                    return Err(too_big(out.len()));
                }
                out
            }
            Functor::FinPowerset(a) => {
                let base = a.apply_elems(xs, bound)?;
                if base.len() >= usize::BITS as usize - 1 || (1usize << base.len()) > bound {
                    return Err(too_big(base.len()));
                }
                (0..1usize << base.len())
                    .map(|mask| {
                        Elem::set(base.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()))
                    })
                    .collect()
            }
        };
        Ok(out)
    }

    /// Enumerates `F^n(1)`.
    pub fn iterate_elems(&self, n: usize, bound: usize) -> Result<Vec<Elem>> {
        let mut current = vec![Elem::Unit];
        for _ in 0..n {
            current = self.apply_elems(&current, bound)?;
        }
        Ok(current)
    }

    /// Shape membership: is `v` in `F(X)` where `X` is described by `inner`?
    pub fn contains(&self, v: &Elem, inner: &dyn Fn(&Elem) -> bool) -> bool {
        match (self, v) {
            (Functor::Const(items), _) => items.binary_search(v).is_ok(),
            (Functor::Rationals, Elem::Num(_)) => true,
            (Functor::Rationals, _) => false,
            (Functor::Id, _) => inner(v),
            (Functor::Product(a, b), Elem::Pair(x, y)) => a.contains(x, inner) && b.contains(y, inner),
            (Functor::Sum(a, _), Elem::Inl(x)) => a.contains(x, inner),
            (Functor::Sum(_, b), Elem::Inr(y)) => b.contains(y, inner),
            (Functor::FinPowerset(a), Elem::Set(items)) => items.iter().all(|x| a.contains(x, inner)),
            _ => false,
        }
    }

    /// Is `v` in `F^n(1)`?
    pub fn contains_iterate(&self, v: &Elem, n: usize) -> bool {
        if n == 0 {
            return *v == Elem::Unit;
        }
        self.contains(v, &|x| self.contains_iterate(x, n - 1))
    }

    /// Functorial action `F(f)` on a single value.
    pub fn fmap(&self, v: &Elem, f: &mut dyn FnMut(&Elem) -> Result<Elem>) -> Result<Elem> {
        match (self, v) {
            (Functor::Const(items), _) => {
                if items.binary_search(v).is_ok() {
                    Ok(v.clone())
                } else {
                    Err(Error::Shape(format!("{v} is not in constant set {self}")))
                }
            }
            (Functor::Rationals, Elem::Num(_)) => Ok(v.clone()),
            (Functor::Id, _) => f(v),
            (Functor::Product(a, b), Elem::Pair(x, y)) => Ok(Elem::pair(a.fmap(x, f)?, b.fmap(y, f)?)),
            (Functor::Sum(a, _), Elem::Inl(x)) => Ok(Elem::inl(a.fmap(x, f)?)),
            (Functor::Sum(_, b), Elem::Inr(y)) => Ok(Elem::inr(b.fmap(y, f)?)),
            (Functor::FinPowerset(a), Elem::Set(items)) => {
                let mut out = BTreeSet::new();
                for x in items.iter() {
                    out.insert(a.fmap(x, f)?);
                }
                Ok(Elem::Set(Arc::new(out)))
            }
            _ => Err(Error::Shape(format!("{v} does not have shape {self}"))),
        }
    }
}

impl fmt::Display for Functor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functor::Const(items) => {
                write!(f, "{{")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Functor::Rationals => write!(f, "Q"),
            Functor::Id => write!(f, "Id"),
            Functor::Product(a, b) => write!(f, "({a} x {b})"),
            Functor::Sum(a, b) => write!(f, "({a} + {b})"),
            Functor::FinPowerset(a) => write!(f, "P({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::int;

    fn pm() -> Functor {
        Functor::stream(Functor::constant([Elem::Num(int(-1)), Elem::Num(int(1))]))
    }

    #[test]
    fn iterate_sizes() {
        assert_eq!(pm().iterate_elems(0, 100).unwrap(), vec![Elem::Unit]);
        assert_eq!(pm().iterate_elems(3, 100).unwrap().len(), 8);
        let lts1 = Functor::lts([Elem::atom("a")]);
        // |F^n(1)| = 1, 2, 4, 16, 65536
        let sizes: Vec<usize> = (0..4).map(|n| lts1.iterate_elems(n, 1000).unwrap().len()).collect();
        assert_eq!(sizes, vec![1, 2, 4, 16]);
        assert!(matches!(lts1.iterate_elems(4, 1000), Err(Error::SizeBound(_))));
    }

    #[test]
    fn membership_and_fmap() {
        let f = pm();
        let v = Elem::pair(Elem::Num(int(1)), Elem::pair(Elem::Num(int(-1)), Elem::Unit));
        assert!(f.contains_iterate(&v, 2));
        assert!(!f.contains_iterate(&v, 1));
        let mapped = f.fmap(&v, &mut |_| Ok(Elem::Unit)).unwrap();
        assert_eq!(mapped, Elem::pair(Elem::Num(int(1)), Elem::Unit));
        assert!(f.fmap(&Elem::pair(Elem::Num(int(3)), Elem::Unit), &mut |x| Ok(x.clone())).is_err());
    }

    #[test]
    fn shapes() {
        assert!(pm().is_stream_shaped());
        assert!(Functor::stream(Functor::Rationals).is_stream_shaped());
        assert!(!Functor::lts([Elem::atom("a")]).is_stream_shaped());
        assert!(!Functor::stream(Functor::Rationals).has_finite_constants());
    }
}
