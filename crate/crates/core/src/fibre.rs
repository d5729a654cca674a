//! Posetal predicate fibres.
//!
//! Two fibres are supported over every carrier: Boolean predicates (subsets or
//! decidable tests) and quantitative predicates (valuations into `[0,1]`,
//! exact rationals). Both are Heyting algebras fibrewise, and reindexing,
//! products along maps and coproducts along maps act on either.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::elem::{fmt_rational, in_unit_interval, Elem, Rational};
use crate::error::{Error, Result};
use crate::functor::{Functor, DEFAULT_SIZE_BOUND};

/// Carriers up to this size are tabulated eagerly.
pub const TABULATE_LIMIT: usize = 1 << 14;

// ---------------------------------------------------------------------------
// Carriers
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Eq)]
pub enum CarrierKind {
    /// Sorted, duplicate-free.
    Finite(Arc<[Elem]>),
    /// Elements are `Elem::Pair`; relations over `X` live over `Pairs(X, X)`.
    Pairs(Carrier, Carrier),
    /// Elements are `Elem::Tuple`; the empty product is the singleton carrier.
    Product(Vec<Carrier>),
    /// The universe of stream terms of an SDE system. Not enumerable.
    Terms(Arc<str>),
    /// `F^n(1)` for a behaviour functor `F`.
    Behaviour(Functor, usize),
}

struct CarrierNode {
    kind: CarrierKind,
    elems: OnceLock<Result<Arc<[Elem]>>>,
}

#[derive(Clone)]
pub struct Carrier(Arc<CarrierNode>);

impl Carrier {
    fn from_kind(kind: CarrierKind) -> Carrier {
        Carrier(Arc::new(CarrierNode { kind, elems: OnceLock::new() }))
    }

    pub fn finite(items: impl IntoIterator<Item = Elem>) -> Carrier {
        let set: BTreeSet<Elem> = items.into_iter().collect();
        Carrier::from_kind(CarrierKind::Finite(set.into_iter().collect::<Vec<_>>().into()))
    }

    pub fn atoms(names: &[&str]) -> Carrier {
        Carrier::finite(names.iter().map(|n| Elem::atom(n)))
    }

    pub fn pairs(a: &Carrier, b: &Carrier) -> Carrier {
        Carrier::from_kind(CarrierKind::Pairs(a.clone(), b.clone()))
    }

    /// `X × X`, the carrier of relations on `X`.
    pub fn square(x: &Carrier) -> Carrier {
        Carrier::pairs(x, x)
    }

    pub fn product(parts: Vec<Carrier>) -> Carrier {
        Carrier::from_kind(CarrierKind::Product(parts))
    }

    pub fn unit() -> Carrier {
        Carrier::product(Vec::new())
    }

    pub fn terms(universe: &str) -> Carrier {
        Carrier::from_kind(CarrierKind::Terms(Arc::from(universe)))
    }

    pub fn behaviour(functor: &Functor, depth: usize) -> Carrier {
        Carrier::from_kind(CarrierKind::Behaviour(functor.clone(), depth))
    }

    pub fn kind(&self) -> &CarrierKind {
        &self.0.kind
    }

    pub fn is_enumerable(&self) -> bool {
        match self.kind() {
            CarrierKind::Finite(_) => true,
            CarrierKind::Pairs(a, b) => a.is_enumerable() && b.is_enumerable(),
            CarrierKind::Product(parts) => parts.iter().all(Carrier::is_enumerable),
            CarrierKind::Terms(_) => false,
            CarrierKind::Behaviour(f, _) => f.has_finite_constants(),
        }
    }

    /// Whether predicates over this carrier are stored as explicit tables.
    pub fn is_tabulable(&self) -> bool {
        match self.kind() {
            CarrierKind::Finite(_) => true,
            CarrierKind::Pairs(a, b) => {
                a.is_tabulable() && b.is_tabulable() && self.elements().is_ok_and(|e| e.len() <= TABULATE_LIMIT)
            }
            CarrierKind::Product(parts) => {
                parts.iter().all(Carrier::is_tabulable) && self.elements().is_ok_and(|e| e.len() <= TABULATE_LIMIT)
            }
            CarrierKind::Terms(_) | CarrierKind::Behaviour(..) => false,
        }
    }

    /// All elements, in a fixed order. Cached.
    pub fn elements(&self) -> Result<Arc<[Elem]>> {
        self.0.elems.get_or_init(|| self.enumerate()).clone()
    }

    fn enumerate(&self) -> Result<Arc<[Elem]>> {
        let bound = DEFAULT_SIZE_BOUND;
        match self.kind() {
            CarrierKind::Finite(items) => Ok(items.clone()),
            CarrierKind::Pairs(a, b) => {
                let (xs, ys) = (a.elements()?, b.elements()?);
                if xs.len().saturating_mul(ys.len()) > bound {
                    return Err(Error::SizeBound(format!("{self} has more than {bound} elements")));
                }
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for x in xs.iter() {
                    for y in ys.iter() {
                        out.push(Elem::pair(x.clone(), y.clone()));
                    }
                }
                Ok(out.into())
            }
            CarrierKind::Product(parts) => {
                let mut rows: Vec<Vec<Elem>> = vec![Vec::new()];
                for part in parts {
                    let xs = part.elements()?;
                    if rows.len().saturating_mul(xs.len()) > bound {
                        return Err(Error::SizeBound(format!("{self} has more than {bound} elements")));
                    }
                    rows = rows
                        .iter()
                        .flat_map(|row| {
                            xs.iter().map(move |x| {
                                let mut r = row.clone();
                                r.push(x.clone());
                                r
                            })
                        })
                        .collect();
                }
                Ok(rows.into_iter().map(Elem::tuple).collect::<Vec<_>>().into())
            }
            CarrierKind::Terms(_) => Err(Error::NotEnumerable(self.to_string())),
            CarrierKind::Behaviour(f, n) => Ok(f.iterate_elems(*n, bound)?.into()),
        }
    }

    pub fn contains(&self, x: &Elem) -> bool {
        match (self.kind(), x) {
            (CarrierKind::Finite(items), _) => items.binary_search(x).is_ok(),
            (CarrierKind::Pairs(a, b), Elem::Pair(u, v)) => a.contains(u) && b.contains(v),
            (CarrierKind::Product(parts), Elem::Tuple(items)) => {
                parts.len() == items.len() && parts.iter().zip(items.iter()).all(|(c, e)| c.contains(e))
            }
            (CarrierKind::Terms(_), Elem::Stream(_)) => true,
            (CarrierKind::Behaviour(f, n), _) => f.contains_iterate(x, *n),
            _ => false,
        }
    }

    pub fn check(&self, x: &Elem) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::NotInCarrier { elem: x.to_string(), carrier: self.to_string() })
        }
    }

    pub fn len(&self) -> Option<usize> {
        self.elements().ok().map(|e| e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

impl PartialEq for Carrier {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.kind == other.0.kind
    }
}

impl Eq for Carrier {}

impl fmt::Debug for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Carrier({self})")
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            CarrierKind::Finite(items) => {
                write!(f, "{{")?;
                for (i, x) in items.iter().take(8).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                if items.len() > 8 {
                    write!(f, ",...")?;
                }
                write!(f, "}}")
            }
            CarrierKind::Pairs(a, b) => write!(f, "{a} x {b}"),
            CarrierKind::Product(parts) if parts.is_empty() => write!(f, "1"),
            CarrierKind::Product(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            CarrierKind::Terms(name) => write!(f, "Terms({name})"),
            CarrierKind::Behaviour(func, n) => write!(f, "{func}^{n}(1)"),
        }
    }
}

// ---------------------------------------------------------------------------
// Degrees
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fibre {
    /// Boolean predicates.
    Pred,
    /// Valuations into `[0,1]`.
    QPred,
}

impl fmt::Display for Fibre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fibre::Pred => write!(f, "Pred"),
            Fibre::QPred => write!(f, "qPred"),
        }
    }
}

/// Truth value of a predicate at one element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Degree {
    Bool(bool),
    Quant(Rational),
}

impl Degree {
    pub fn top(fibre: Fibre) -> Degree {
        match fibre {
            Fibre::Pred => Degree::Bool(true),
            Fibre::QPred => Degree::Quant(Rational::one()),
        }
    }

    pub fn bottom(fibre: Fibre) -> Degree {
        match fibre {
            Fibre::Pred => Degree::Bool(false),
            Fibre::QPred => Degree::Quant(Rational::zero()),
        }
    }

    pub fn fibre(&self) -> Fibre {
        match self {
            Degree::Bool(_) => Fibre::Pred,
            Degree::Quant(_) => Fibre::QPred,
        }
    }

    /// Embeds into `[0,1]`; Booleans become 0 or 1.
    pub fn as_rational(&self) -> Rational {
        match self {
            Degree::Bool(true) => Rational::one(),
            Degree::Bool(false) => Rational::zero(),
            Degree::Quant(r) => r.clone(),
        }
    }

    pub fn is_top(&self) -> bool {
        match self {
            Degree::Bool(b) => *b,
            Degree::Quant(r) => r.is_one(),
        }
    }

    pub fn le(&self, other: &Degree) -> bool {
        match (self, other) {
            (Degree::Bool(a), Degree::Bool(b)) => !a || *b,
            _ => self.as_rational() <= other.as_rational(),
        }
    }

    pub fn meet(&self, other: &Degree) -> Degree {
        match (self, other) {
            (Degree::Bool(a), Degree::Bool(b)) => Degree::Bool(*a && *b),
            _ => Degree::Quant(self.as_rational().min(other.as_rational())),
        }
    }

    pub fn join(&self, other: &Degree) -> Degree {
        match (self, other) {
            (Degree::Bool(a), Degree::Bool(b)) => Degree::Bool(*a || *b),
            _ => Degree::Quant(self.as_rational().max(other.as_rational())),
        }
    }

    /// Heyting implication: `x ∈ P ⟹ x ∈ Q`, or `1 if δ ≤ γ else γ`.
    pub fn implies(&self, other: &Degree) -> Degree {
        match (self, other) {
            (Degree::Bool(a), Degree::Bool(b)) => Degree::Bool(!a || *b),
            _ => {
                if self.le(other) {
                    Degree::Quant(Rational::one())
                } else {
                    Degree::Quant(other.as_rational())
                }
            }
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Bool(b) => write!(f, "{b}"),
            Degree::Quant(r) => write!(f, "{}", fmt_rational(r)),
        }
    }
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

type DegreeFn = dyn Fn(&Elem) -> Result<Degree> + Send + Sync;

struct LazyBody {
    eval: Box<DegreeFn>,
    memo: Mutex<HashMap<Elem, Degree>>,
}

#[derive(Clone)]
enum Body {
    Subset(Arc<BTreeSet<Elem>>),
    Valuation(Arc<BTreeMap<Elem, Rational>>),
    Lazy(Arc<LazyBody>),
}

/// An object of a fibre: a predicate over a carrier.
#[derive(Clone)]
pub struct Predicate {
    carrier: Carrier,
    fibre: Fibre,
    body: Body,
}

impl Predicate {
    /// Finite subset of a carrier.
    pub fn subset(carrier: &Carrier, items: impl IntoIterator<Item = Elem>) -> Result<Predicate> {
        let set: BTreeSet<Elem> = items.into_iter().collect();
        for x in &set {
            carrier.check(x)?;
        }
        Ok(Predicate { carrier: carrier.clone(), fibre: Fibre::Pred, body: Body::Subset(Arc::new(set)) })
    }

    /// Total valuation over an enumerable carrier; every value must lie in `[0,1]`.
    pub fn valuation(carrier: &Carrier, values: impl IntoIterator<Item = (Elem, Rational)>) -> Result<Predicate> {
        let map: BTreeMap<Elem, Rational> = values.into_iter().collect();
        for (x, v) in &map {
            carrier.check(x)?;
            if !in_unit_interval(v) {
                return Err(Error::OutOfRange(format!("{x} |-> {}", fmt_rational(v))));
            }
        }
        let elems = carrier.elements()?;
        if let Some(missing) = elems.iter().find(|x| !map.contains_key(x)) {
            return Err(Error::Invalid(format!("valuation is not total: no value for {missing}")));
        }
        Ok(Predicate { carrier: carrier.clone(), fibre: Fibre::QPred, body: Body::Valuation(Arc::new(map)) })
    }

    /// Decidable membership test. Results are memoised per element.
    pub fn test<F>(carrier: &Carrier, f: F) -> Predicate
    where
        F: Fn(&Elem) -> Result<bool> + Send + Sync + 'static,
    {
        Predicate::lazy(carrier, Fibre::Pred, move |x| f(x).map(Degree::Bool))
    }

    /// Valuation given by a procedure. Results are memoised per element.
    pub fn measure<F>(carrier: &Carrier, f: F) -> Predicate
    where
        F: Fn(&Elem) -> Result<Rational> + Send + Sync + 'static,
    {
        Predicate::lazy(carrier, Fibre::QPred, move |x| f(x).map(Degree::Quant))
    }

    fn lazy<F>(carrier: &Carrier, fibre: Fibre, f: F) -> Predicate
    where
        F: Fn(&Elem) -> Result<Degree> + Send + Sync + 'static,
    {
        Predicate {
            carrier: carrier.clone(),
            fibre,
            body: Body::Lazy(Arc::new(LazyBody { eval: Box::new(f), memo: Mutex::new(HashMap::new()) })),
        }
    }

    /// Builds a predicate from a pointwise rule: an explicit table when the
    /// carrier is small and enumerable, a memoised procedure otherwise.
    pub fn tabulate<F>(carrier: &Carrier, fibre: Fibre, f: F) -> Result<Predicate>
    where
        F: Fn(&Elem) -> Result<Degree> + Send + Sync + 'static,
    {
        if !carrier.is_tabulable() {
            return Ok(Predicate::lazy(carrier, fibre, f));
        }
        let elems = carrier.elements()?;
        match fibre {
            Fibre::Pred => {
                let mut set = BTreeSet::new();
                for x in elems.iter() {
                    if f(x)?.is_top() {
                        set.insert(x.clone());
                    }
                }
                Ok(Predicate { carrier: carrier.clone(), fibre, body: Body::Subset(Arc::new(set)) })
            }
            Fibre::QPred => {
                let mut map = BTreeMap::new();
                for x in elems.iter() {
                    let v = f(x)?.as_rational();
                    if !in_unit_interval(&v) {
                        return Err(Error::OutOfRange(format!("{x} |-> {}", fmt_rational(&v))));
                    }
                    map.insert(x.clone(), v);
                }
                Ok(Predicate { carrier: carrier.clone(), fibre, body: Body::Valuation(Arc::new(map)) })
            }
        }
    }

    /// The final object of the fibre over `carrier`.
    pub fn top(carrier: &Carrier, fibre: Fibre) -> Predicate {
        Predicate::constant(carrier, Degree::top(fibre))
    }

    pub fn bottom(carrier: &Carrier, fibre: Fibre) -> Predicate {
        Predicate::constant(carrier, Degree::bottom(fibre))
    }

    pub fn constant(carrier: &Carrier, d: Degree) -> Predicate {
        let fibre = d.fibre();
        let d2 = d.clone();
        match Predicate::tabulate(carrier, fibre, move |_| Ok(d2.clone())) {
            Ok(p) => p,
            Err(_) => Predicate::lazy(carrier, fibre, move |_| Ok(d.clone())),
        }
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn fibre(&self) -> Fibre {
        self.fibre
    }

    pub fn is_extensional(&self) -> bool {
        !matches!(self.body, Body::Lazy(_))
    }

    /// Members of an extensional Boolean predicate.
    pub fn members(&self) -> Option<&BTreeSet<Elem>> {
        match &self.body {
            Body::Subset(s) => Some(s),
            _ => None,
        }
    }

    pub fn degree(&self, x: &Elem) -> Result<Degree> {
        match &self.body {
            Body::Subset(s) => {
                if s.contains(x) {
                    return Ok(Degree::Bool(true));
                }
                self.carrier.check(x)?;
                Ok(Degree::Bool(false))
            }
            Body::Valuation(m) => match m.get(x) {
                Some(v) => Ok(Degree::Quant(v.clone())),
                None => {
                    self.carrier.check(x)?;
                    Err(Error::Invalid(format!("valuation has no value at {x}")))
                }
            },
            Body::Lazy(lazy) => {
                if let Some(d) = lazy.memo.lock().expect("memo lock").get(x) {
                    return Ok(d.clone());
                }
                self.carrier.check(x)?;
                // Lazy tests recurse along coalgebra steps; grow the stack on demand.
                let d = stacker::maybe_grow(256 * 1024, 8 * 1024 * 1024, || (lazy.eval)(x))?;
                let d = match (self.fibre, d) {
                    (Fibre::Pred, Degree::Bool(b)) => Degree::Bool(b),
                    (Fibre::QPred, d) => {
                        let v = d.as_rational();
                        if !in_unit_interval(&v) {
                            return Err(Error::OutOfRange(format!("{x} |-> {}", fmt_rational(&v))));
                        }
                        Degree::Quant(v)
                    }
                    (Fibre::Pred, Degree::Quant(v)) => {
                        return Err(Error::FibreMismatch(format!(
                            "Boolean predicate produced value {} at {x}",
                            fmt_rational(&v)
                        )))
                    }
                };
                lazy.memo.lock().expect("memo lock").insert(x.clone(), d.clone());
                Ok(d)
            }
        }
    }

    /// `x ∈ P`, or `δ(x) = 1` in the quantitative fibre.
    pub fn holds(&self, x: &Elem) -> Result<bool> {
        Ok(self.degree(x)?.is_top())
    }

    /// Degrees at every element of `domain`.
    pub fn table(&self, domain: &[Elem]) -> Result<Vec<(Elem, Degree)>> {
        domain.iter().map(|x| Ok((x.clone(), self.degree(x)?))).collect()
    }

    /// Domain over which comparisons are made: the probes when given,
    /// otherwise the full carrier.
    pub fn domain(carrier: &Carrier, probes: Option<&[Elem]>) -> Result<Arc<[Elem]>> {
        match probes {
            Some(p) => Ok(p.to_vec().into()),
            None if carrier.is_enumerable() => carrier.elements(),
            None => Err(Error::NoProbes(carrier.to_string())),
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate[{} over {}]({self})", self.fibre, self.carrier)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Subset(s) => {
                write!(f, "{{")?;
                for (i, x) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Body::Valuation(m) => {
                write!(f, "[")?;
                for (i, (x, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}: {}", fmt_rational(v))?;
                }
                write!(f, "]")
            }
            Body::Lazy(_) => write!(f, "<{} test over {}>", self.fibre, self.carrier),
        }
    }
}

fn same_fibre(p: &Predicate, q: &Predicate) -> Result<()> {
    if p.carrier != q.carrier {
        return Err(Error::CarrierMismatch { left: p.carrier.to_string(), right: q.carrier.to_string() });
    }
    if p.fibre != q.fibre {
        return Err(Error::FibreMismatch(format!("{} vs {}", p.fibre, q.fibre)));
    }
    Ok(())
}

fn pointwise2(p: &Predicate, q: &Predicate, op: fn(&Degree, &Degree) -> Degree) -> Result<Predicate> {
    same_fibre(p, q)?;
    let (p2, q2) = (p.clone(), q.clone());
    Predicate::tabulate(&p.carrier, p.fibre, move |x| Ok(op(&p2.degree(x)?, &q2.degree(x)?)))
}

/// Fibred product: intersection, or pointwise minimum.
pub fn meet(p: &Predicate, q: &Predicate) -> Result<Predicate> {
    if let (Body::Subset(a), Body::Subset(b)) = (&p.body, &q.body) {
        same_fibre(p, q)?;
        let set = a.intersection(b).cloned().collect();
        return Ok(Predicate { carrier: p.carrier.clone(), fibre: Fibre::Pred, body: Body::Subset(Arc::new(set)) });
    }
    pointwise2(p, q, Degree::meet)
}

/// Fibred coproduct: union, or pointwise maximum.
pub fn join(p: &Predicate, q: &Predicate) -> Result<Predicate> {
    if let (Body::Subset(a), Body::Subset(b)) = (&p.body, &q.body) {
        same_fibre(p, q)?;
        let set = a.union(b).cloned().collect();
        return Ok(Predicate { carrier: p.carrier.clone(), fibre: Fibre::Pred, body: Body::Subset(Arc::new(set)) });
    }
    pointwise2(p, q, Degree::join)
}

/// Fibred exponential `Q^P`.
pub fn heyting_impl(p: &Predicate, q: &Predicate) -> Result<Predicate> {
    pointwise2(p, q, Degree::implies)
}

/// First element of the comparison domain at which `p ≤ q` fails.
pub fn first_violation(p: &Predicate, q: &Predicate, probes: Option<&[Elem]>) -> Result<Option<Elem>> {
    same_fibre(p, q)?;
    if probes.is_none() {
        if let (Body::Subset(a), Body::Subset(b)) = (&p.body, &q.body) {
            return Ok(a.difference(b).next().cloned());
        }
    }
    for x in Predicate::domain(&p.carrier, probes)?.iter() {
        if !p.degree(x)?.le(&q.degree(x)?) {
            return Ok(Some(x.clone()));
        }
    }
    Ok(None)
}

/// Pointwise order of the fibre. Intensional predicates over non-enumerable
/// carriers are compared on `probes` only.
pub fn leq(p: &Predicate, q: &Predicate, probes: Option<&[Elem]>) -> Result<bool> {
    Ok(first_violation(p, q, probes)?.is_none())
}

pub fn first_difference(p: &Predicate, q: &Predicate, probes: Option<&[Elem]>) -> Result<Option<Elem>> {
    same_fibre(p, q)?;
    if probes.is_none() {
        match (&p.body, &q.body) {
            (Body::Subset(a), Body::Subset(b)) => return Ok(a.symmetric_difference(b).next().cloned()),
            (Body::Valuation(a), Body::Valuation(b)) => {
                return Ok(a.iter().find(|(x, v)| b.get(*x) != Some(*v)).map(|(x, _)| x.clone()))
            }
            _ => {}
        }
    }
    for x in Predicate::domain(&p.carrier, probes)?.iter() {
        if p.degree(x)? != q.degree(x)? {
            return Ok(Some(x.clone()));
        }
    }
    Ok(None)
}

pub fn equal(p: &Predicate, q: &Predicate, probes: Option<&[Elem]>) -> Result<bool> {
    Ok(first_difference(p, q, probes)?.is_none())
}

// ---------------------------------------------------------------------------
// Base maps and quantifiers
// ---------------------------------------------------------------------------

type ElemFn = dyn Fn(&Elem) -> Result<Elem> + Send + Sync;

/// A map between carriers in the base category, with an optional section.
#[derive(Clone)]
pub struct BaseMap {
    name: Arc<str>,
    source: Carrier,
    target: Carrier,
    map: Arc<ElemFn>,
    section: Option<Arc<ElemFn>>,
}

impl BaseMap {
    pub fn new<F>(name: &str, source: &Carrier, target: &Carrier, f: F) -> BaseMap
    where
        F: Fn(&Elem) -> Result<Elem> + Send + Sync + 'static,
    {
        BaseMap { name: Arc::from(name), source: source.clone(), target: target.clone(), map: Arc::new(f), section: None }
    }

    /// A map given by a finite table; must be total on the source.
    pub fn table(
        name: &str,
        source: &Carrier,
        target: &Carrier,
        rows: impl IntoIterator<Item = (Elem, Elem)>,
    ) -> Result<BaseMap> {
        let table: BTreeMap<Elem, Elem> = rows.into_iter().collect();
        for (x, y) in &table {
            source.check(x)?;
            target.check(y)?;
        }
        for x in source.elements()?.iter() {
            if !table.contains_key(x) {
                return Err(Error::Invalid(format!("map {name} is not total: no image for {x}")));
            }
        }
        Ok(BaseMap::new(name, source, target, move |x| {
            table.get(x).cloned().ok_or_else(|| Error::Invalid(format!("no image for {x}")))
        }))
    }

    pub fn identity(carrier: &Carrier) -> BaseMap {
        BaseMap::new("id", carrier, carrier, |x| Ok(x.clone()))
    }

    /// Declares a section `g` with `f ∘ g = id`, checked on every enumerable
    /// target element.
    pub fn with_section<G>(mut self, g: G) -> Result<BaseMap>
    where
        G: Fn(&Elem) -> Result<Elem> + Send + Sync + 'static,
    {
        if self.target.is_enumerable() {
            for y in self.target.elements()?.iter() {
                let gy = g(y)?;
                self.source.check(&gy)?;
                let back = (self.map)(&gy)?;
                if back != *y {
                    return Err(Error::InvalidSection(format!(
                        "{}(g({y})) = {}({gy}) = {back}",
                        self.name, self.name
                    )));
                }
            }
        }
        self.section = Some(Arc::new(g));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &Carrier {
        &self.source
    }

    pub fn target(&self) -> &Carrier {
        &self.target
    }

    pub fn has_section(&self) -> bool {
        self.section.is_some()
    }

    pub fn apply(&self, x: &Elem) -> Result<Elem> {
        let y = (self.map)(x)?;
        self.target.check(&y)?;
        Ok(y)
    }

    pub fn apply_section(&self, y: &Elem) -> Result<Option<Elem>> {
        match &self.section {
            Some(g) => Ok(Some(g(y)?)),
            None => Ok(None),
        }
    }

    /// `g ∘ self`.
    pub fn then(&self, g: &BaseMap) -> Result<BaseMap> {
        if self.target != g.source {
            return Err(Error::CarrierMismatch { left: self.target.to_string(), right: g.source.to_string() });
        }
        let (f1, f2) = (self.clone(), g.clone());
        Ok(BaseMap::new(&format!("{}.{}", g.name, self.name), &self.source, &g.target, move |x| {
            f2.apply(&f1.apply(x)?)
        }))
    }

    /// Preimages of every image point; requires an enumerable source.
    pub fn fibres(&self) -> Result<BTreeMap<Elem, Vec<Elem>>> {
        if !self.source.is_enumerable() {
            return Err(Error::NotEnumerable(format!("fibres of {}: source {}", self.name, self.source)));
        }
        let mut out: BTreeMap<Elem, Vec<Elem>> = BTreeMap::new();
        for x in self.source.elements()?.iter() {
            out.entry(self.apply(x)?).or_default().push(x.clone());
        }
        Ok(out)
    }
}

impl fmt::Debug for BaseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BaseMap({}: {} -> {})", self.name, self.source, self.target)
    }
}

/// Reindexing `f*`: `x ∈ f*(Q) ⟺ f(x) ∈ Q`.
pub fn reindex(f: &BaseMap, q: &Predicate) -> Result<Predicate> {
    if q.carrier != f.target {
        return Err(Error::CarrierMismatch { left: f.target.to_string(), right: q.carrier.to_string() });
    }
    let (f2, q2) = (f.clone(), q.clone());
    Predicate::tabulate(&f.source, q.fibre, move |x| q2.degree(&f2.apply(x)?))
}

/// Product along `f` (universal quantification over fibres; infimum).
pub fn prod_along(f: &BaseMap, p: &Predicate) -> Result<Predicate> {
    along(f, p, Degree::meet, Degree::top(p.fibre))
}

/// Coproduct along `f` (direct image; supremum).
pub fn coprod_along(f: &BaseMap, p: &Predicate) -> Result<Predicate> {
    along(f, p, Degree::join, Degree::bottom(p.fibre))
}

fn along(f: &BaseMap, p: &Predicate, combine: fn(&Degree, &Degree) -> Degree, unit: Degree) -> Result<Predicate> {
    if p.carrier != f.source {
        return Err(Error::CarrierMismatch { left: f.source.to_string(), right: p.carrier.to_string() });
    }
    let fibres = f.fibres()?;
    let mut folded: BTreeMap<Elem, Degree> = BTreeMap::new();
    for (y, xs) in fibres {
        let mut acc = unit.clone();
        for x in xs {
            acc = combine(&acc, &p.degree(&x)?);
        }
        folded.insert(y, acc);
    }
    Predicate::tabulate(&f.target, p.fibre, move |y| Ok(folded.get(y).cloned().unwrap_or_else(|| unit.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::{int, rat};

    fn x123() -> Carrier {
        Carrier::finite([1, 2, 3].map(|i| Elem::Num(int(i))))
    }

    fn set(c: &Carrier, xs: &[i64]) -> Predicate {
        Predicate::subset(c, xs.iter().map(|&i| Elem::Num(int(i)))).unwrap()
    }

    fn val(c: &Carrier, xs: &[(&str, Rational)]) -> Predicate {
        Predicate::valuation(c, xs.iter().map(|(a, v)| (Elem::atom(a), v.clone()))).unwrap()
    }

    #[test]
    fn top_per_fibre() {
        let ab = Carrier::atoms(&["a", "b"]);
        assert_eq!(Predicate::top(&ab, Fibre::Pred).members().unwrap().len(), 2);
        let a = Carrier::atoms(&["a"]);
        assert_eq!(Predicate::top(&a, Fibre::QPred).degree(&Elem::atom("a")).unwrap(), Degree::Quant(int(1)));
        let t = Predicate::top(&Carrier::terms("s"), Fibre::Pred);
        assert!(t.holds(&Elem::stream(crate::sde::Term::name("anything"))).unwrap());
    }

    #[test]
    fn meet_examples() {
        let c = x123();
        assert!(equal(&meet(&set(&c, &[1, 2]), &set(&c, &[2, 3])).unwrap(), &set(&c, &[2]), None).unwrap());
        let a = Carrier::atoms(&["a"]);
        let m = meet(&val(&a, &[("a", rat(1, 2))]), &val(&a, &[("a", rat(3, 10))])).unwrap();
        assert_eq!(m.degree(&Elem::atom("a")).unwrap(), Degree::Quant(rat(3, 10)));
        let p = set(&c, &[1, 3]);
        assert!(equal(&meet(&p, &Predicate::top(&c, Fibre::Pred)).unwrap(), &p, None).unwrap());
    }

    #[test]
    fn impl_examples() {
        let c = x123();
        let r = heyting_impl(&set(&c, &[1]), &set(&c, &[1, 2])).unwrap();
        assert!(equal(&r, &set(&c, &[1, 2, 3]), None).unwrap());
        let a = Carrier::atoms(&["a"]);
        let i1 = heyting_impl(&val(&a, &[("a", rat(3, 10))]), &val(&a, &[("a", rat(1, 2))])).unwrap();
        assert_eq!(i1.degree(&Elem::atom("a")).unwrap(), Degree::Quant(int(1)));
        let i2 = heyting_impl(&val(&a, &[("a", rat(1, 2))]), &val(&a, &[("a", rat(3, 10))])).unwrap();
        assert_eq!(i2.degree(&Elem::atom("a")).unwrap(), Degree::Quant(rat(3, 10)));
    }

    #[test]
    fn leq_examples() {
        let c = x123();
        assert!(leq(&set(&c, &[2]), &set(&c, &[2, 3]), None).unwrap());
        let a = Carrier::atoms(&["a"]);
        assert!(!leq(&val(&a, &[("a", rat(1, 2))]), &val(&a, &[("a", rat(1, 4))]), None).unwrap());
        assert!(leq(&set(&c, &[1, 3]), &Predicate::top(&c, Fibre::Pred), None).unwrap());
    }

    #[test]
    fn errors() {
        let c = x123();
        let ab = Carrier::atoms(&["a", "b"]);
        assert!(matches!(
            meet(&set(&c, &[1]), &Predicate::top(&ab, Fibre::Pred)),
            Err(Error::CarrierMismatch { .. })
        ));
        assert!(matches!(Predicate::subset(&ab, [Elem::atom("z")]), Err(Error::NotInCarrier { .. })));
        assert!(matches!(
            Predicate::valuation(&ab, [(Elem::atom("a"), rat(3, 2)), (Elem::atom("b"), int(0))]),
            Err(Error::OutOfRange(_))
        ));
        let terms = Carrier::terms("s");
        let t = Predicate::test(&terms, |_| Ok(true));
        assert!(matches!(leq(&t, &t, None), Err(Error::NoProbes(_))));
        let probe = [Elem::stream(crate::sde::Term::name("x"))];
        assert!(leq(&t, &t, Some(&probe)).unwrap());
    }

    #[test]
    fn reindex_and_quantifiers() {
        let ab = Carrier::atoms(&["a", "b"]);
        let c = Carrier::atoms(&["c"]);
        let f = BaseMap::new("!", &ab, &c, |_| Ok(Elem::atom("c")));
        let q = Predicate::subset(&c, [Elem::atom("c")]).unwrap();
        assert_eq!(reindex(&f, &q).unwrap().members().unwrap().len(), 2);
        let p = Predicate::subset(&ab, [Elem::atom("a")]).unwrap();
        assert!(prod_along(&f, &p).unwrap().members().unwrap().is_empty());
        assert_eq!(coprod_along(&f, &p).unwrap().members().unwrap().len(), 1);
        let empty = Predicate::bottom(&ab, Fibre::Pred);
        assert!(coprod_along(&f, &empty).unwrap().members().unwrap().is_empty());
        let top = Predicate::top(&ab, Fibre::Pred);
        assert!(equal(&prod_along(&f, &top).unwrap(), &Predicate::top(&c, Fibre::Pred), None).unwrap());

        let d = Predicate::valuation(&ab, [(Elem::atom("a"), rat(1, 2)), (Elem::atom("b"), rat(1, 4))]).unwrap();
        assert_eq!(prod_along(&f, &d).unwrap().degree(&Elem::atom("c")).unwrap(), Degree::Quant(rat(1, 4)));
        assert_eq!(coprod_along(&f, &d).unwrap().degree(&Elem::atom("c")).unwrap(), Degree::Quant(rat(1, 2)));

        let id = BaseMap::identity(&ab);
        assert!(equal(&reindex(&id, &p).unwrap(), &p, None).unwrap());
    }

    #[test]
    fn empty_fibres() {
        // A non-surjective map: the fibre over `d` is empty.
        let a = Carrier::atoms(&["a"]);
        let cd = Carrier::atoms(&["c", "d"]);
        let f = BaseMap::new("f", &a, &cd, |_| Ok(Elem::atom("c")));
        let d = Predicate::valuation(&a, [(Elem::atom("a"), rat(1, 3))]).unwrap();
        assert_eq!(prod_along(&f, &d).unwrap().degree(&Elem::atom("d")).unwrap(), Degree::Quant(int(1)));
        assert_eq!(coprod_along(&f, &d).unwrap().degree(&Elem::atom("d")).unwrap(), Degree::Quant(int(0)));
    }

    #[test]
    fn sections() {
        let ab = Carrier::atoms(&["a", "b"]);
        let c = Carrier::atoms(&["c"]);
        let f = BaseMap::new("!", &ab, &c, |_| Ok(Elem::atom("c")));
        assert!(f.clone().with_section(|_| Ok(Elem::atom("a"))).unwrap().has_section());
        let g = BaseMap::new("g", &c, &ab, |_| Ok(Elem::atom("a")));
        assert!(matches!(g.with_section(|_| Ok(Elem::atom("c"))), Err(Error::InvalidSection(_))));
    }

    #[test]
    fn lazy_memo_is_idempotent() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = calls.clone();
        let p = Predicate::test(&Carrier::terms("s"), move |_| {
            seen.fetch_add(1, Ordering::SeqCst);
            Ok(true)
        });
        let x = Elem::stream(crate::sde::Term::name("s"));
        assert!(p.holds(&x).unwrap());
        assert!(p.holds(&x).unwrap());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }
}
