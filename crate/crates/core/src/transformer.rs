//! Coalgebras, predicate liftings and the transformers `Φ = c* ∘ G`, with
//! their final chains, global chains and fixed-point oracles.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::chain::{self, Chain, Failure};
use crate::elem::{fmt_rational, Elem, Rational};
use crate::error::{Error, Result};
use crate::fibre::{self, BaseMap, Carrier, Degree, Fibre, Predicate};
use crate::functor::{Functor, DEFAULT_SIZE_BOUND};
use crate::sde::{SdeSystem, Term};

/// Iteration bound for [`nu_oracle`].
pub const NU_BOUND: usize = 10_000;

// ---------------------------------------------------------------------------
// Coalgebras
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum CoalgebraKind {
    Table(Arc<BTreeMap<Elem, Elem>>),
    Streams(Arc<SdeSystem>),
}

/// A coalgebra `c : X → F X`.
#[derive(Clone, Debug)]
pub struct Coalgebra {
    name: Arc<str>,
    functor: Functor,
    carrier: Carrier,
    kind: CoalgebraKind,
}

impl Coalgebra {
    /// A finite coalgebra given by its full transition table.
    pub fn table(
        name: &str,
        carrier: &Carrier,
        functor: &Functor,
        rows: impl IntoIterator<Item = (Elem, Elem)>,
    ) -> Result<Coalgebra> {
        let table: BTreeMap<Elem, Elem> = rows.into_iter().collect();
        for (x, v) in &table {
            carrier.check(x)?;
            if !functor.contains(v, &|y| carrier.contains(y)) {
                return Err(Error::Shape(format!("c({x}) = {v} is not in {functor}(X)")));
            }
        }
        for x in carrier.elements()?.iter() {
            if !table.contains_key(x) {
                return Err(Error::Invalid(format!("coalgebra {name} has no transition for {x}")));
            }
        }
        Ok(Coalgebra { name: Arc::from(name), functor: functor.clone(), carrier: carrier.clone(), kind: CoalgebraKind::Table(Arc::new(table)) })
    }

    /// A labelled transition system `X → P(L × X)`.
    pub fn lts(name: &str, states: &[Elem], labels: &[Elem], transitions: &[(Elem, Elem, Elem)]) -> Result<Coalgebra> {
        let carrier = Carrier::finite(states.iter().cloned());
        let functor = Functor::lts(labels.iter().cloned());
        let mut succ: BTreeMap<Elem, Vec<Elem>> = states.iter().map(|s| (s.clone(), Vec::new())).collect();
        for (s, a, t) in transitions {
            let entry = succ.get_mut(s).ok_or_else(|| Error::NotInCarrier { elem: s.to_string(), carrier: carrier.to_string() })?;
            entry.push(Elem::pair(a.clone(), t.clone()));
        }
        Coalgebra::table(name, &carrier, &functor, succ.into_iter().map(|(s, v)| (s, Elem::set(v))))
    }

    /// A Moore automaton `X → A × X` with rational outputs.
    pub fn automaton(name: &str, rows: &[(Elem, Rational, Elem)]) -> Result<Coalgebra> {
        let carrier = Carrier::finite(rows.iter().map(|(x, _, _)| x.clone()));
        let functor = Functor::stream(Functor::constant(rows.iter().map(|(_, o, _)| Elem::Num(o.clone()))));
        Coalgebra::table(name, &carrier, &functor, rows.iter().map(|(x, o, y)| (x.clone(), Elem::pair(Elem::Num(o.clone()), y.clone()))))
    }

    /// The stream coalgebra `⟨head, tail⟩` on the terms of an SDE system.
    pub fn streams(name: &str, system: Arc<SdeSystem>) -> Coalgebra {
        Coalgebra {
            name: Arc::from(name),
            functor: Functor::stream(Functor::Rationals),
            carrier: Carrier::terms(name),
            kind: CoalgebraKind::Streams(system),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn functor(&self) -> &Functor {
        &self.functor
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn kind(&self) -> &CoalgebraKind {
        &self.kind
    }

    pub fn system(&self) -> Option<&Arc<SdeSystem>> {
        match &self.kind {
            CoalgebraKind::Streams(s) => Some(s),
            CoalgebraKind::Table(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, CoalgebraKind::Table(_))
    }

    /// `c(x)`.
    pub fn step(&self, x: &Elem) -> Result<Elem> {
        match &self.kind {
            CoalgebraKind::Table(t) => {
                t.get(x).cloned().ok_or_else(|| Error::NotInCarrier { elem: x.to_string(), carrier: self.carrier.to_string() })
            }
            CoalgebraKind::Streams(sys) => {
                let term = x.as_term().ok_or_else(|| Error::NotInCarrier { elem: x.to_string(), carrier: self.carrier.to_string() })?;
                let head = sys.elem(term, 0)?;
                let tail = sys.tail_of(term)?;
                Ok(Elem::pair(Elem::Num(head), Elem::stream(tail)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Liftings
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        [CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne].into_iter().find(|c| c.symbol() == s)
    }

    pub fn eval(self, a: &Rational, b: &Rational) -> bool {
        match self {
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    /// `b ⋈ a` iff `a ⋈' b`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            c => c,
        }
    }
}

/// Custom lifting bodies for stream-shaped functors `A × Id`: `head` is the
/// output, `rec` the component predicate at the successor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LiftExpr {
    Head,
    Rec,
    Num(Rational),
    Bool(bool),
    Add(Box<LiftExpr>, Box<LiftExpr>),
    Sub(Box<LiftExpr>, Box<LiftExpr>),
    Mul(Box<LiftExpr>, Box<LiftExpr>),
    Neg(Box<LiftExpr>),
    Min(Box<LiftExpr>, Box<LiftExpr>),
    Max(Box<LiftExpr>, Box<LiftExpr>),
    Cmp(CmpOp, Box<LiftExpr>, Box<LiftExpr>),
    And(Vec<LiftExpr>),
    Or(Vec<LiftExpr>),
    Not(Box<LiftExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Num,
    Bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Polarity {
    Absent,
    Pos,
    Neg,
    Mixed,
}

impl Polarity {
    fn combine(self, other: Polarity) -> Polarity {
        match (self, other) {
            (Polarity::Absent, p) | (p, Polarity::Absent) => p,
            (a, b) if a == b => a,
            _ => Polarity::Mixed,
        }
    }

    fn flip(self) -> Polarity {
        match self {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
            p => p,
        }
    }
}

enum Value {
    Num(Rational),
    Bool(bool),
}

impl LiftExpr {
    fn ty(&self, rec: Ty) -> Result<Ty> {
        let need = |e: &LiftExpr, t: Ty| -> Result<()> {
            if e.ty(rec)? == t {
                Ok(())
            } else {
                Err(Error::Invalid(format!("lifting expression {e} should be {}", if t == Ty::Num { "numeric" } else { "boolean" })))
            }
        };
        Ok(match self {
            LiftExpr::Head | LiftExpr::Num(_) => Ty::Num,
            LiftExpr::Rec => rec,
            LiftExpr::Bool(_) => Ty::Bool,
            LiftExpr::Add(a, b) | LiftExpr::Sub(a, b) | LiftExpr::Mul(a, b) | LiftExpr::Min(a, b) | LiftExpr::Max(a, b) => {
                need(a, Ty::Num)?;
                need(b, Ty::Num)?;
                Ty::Num
            }
            LiftExpr::Neg(a) => {
                need(a, Ty::Num)?;
                Ty::Num
            }
            LiftExpr::Cmp(_, a, b) => {
                need(a, Ty::Num)?;
                need(b, Ty::Num)?;
                Ty::Bool
            }
            LiftExpr::And(xs) | LiftExpr::Or(xs) => {
                for x in xs {
                    need(x, Ty::Bool)?;
                }
                Ty::Bool
            }
            LiftExpr::Not(a) => {
                need(a, Ty::Bool)?;
                Ty::Bool
            }
        })
    }

    /// The fibre an expression lives in: boolean bodies are predicates,
    /// numeric bodies valuations.
    pub fn infer_fibre(&self) -> Result<Fibre> {
        if self.ty(Ty::Bool).ok() == Some(Ty::Bool) {
            return Ok(Fibre::Pred);
        }
        match self.ty(Ty::Num)? {
            Ty::Num => Ok(Fibre::QPred),
            Ty::Bool => Err(Error::Invalid(format!("lifting {self} mixes boolean and numeric uses of rec"))),
        }
    }

    fn polarity(&self) -> Polarity {
        match self {
            LiftExpr::Rec => Polarity::Pos,
            LiftExpr::Head | LiftExpr::Num(_) | LiftExpr::Bool(_) => Polarity::Absent,
            LiftExpr::Add(a, b) | LiftExpr::Min(a, b) | LiftExpr::Max(a, b) => a.polarity().combine(b.polarity()),
            LiftExpr::Sub(a, b) => a.polarity().combine(b.polarity().flip()),
            LiftExpr::Neg(a) | LiftExpr::Not(a) => a.polarity().flip(),
            LiftExpr::Mul(a, b) => match (a.polarity(), b.polarity(), a.as_ref(), b.as_ref()) {
                (Polarity::Absent, Polarity::Absent, _, _) => Polarity::Absent,
                (Polarity::Absent, p, LiftExpr::Num(c), _) | (p, Polarity::Absent, _, LiftExpr::Num(c)) => {
                    if *c < Rational::zero() {
                        p.flip()
                    } else {
                        p
                    }
                }
                _ => Polarity::Mixed,
            },
            LiftExpr::Cmp(op, a, b) => {
                let (pa, pb) = (a.polarity(), b.polarity());
                match op {
                    CmpOp::Gt | CmpOp::Ge => pa.combine(pb.flip()),
                    CmpOp::Lt | CmpOp::Le => pa.flip().combine(pb),
                    CmpOp::Eq | CmpOp::Ne => {
                        if pa == Polarity::Absent && pb == Polarity::Absent {
                            Polarity::Absent
                        } else {
                            Polarity::Mixed
                        }
                    }
                }
            }
            LiftExpr::And(xs) | LiftExpr::Or(xs) => xs.iter().fold(Polarity::Absent, |p, x| p.combine(x.polarity())),
        }
    }

    /// Does `rec` occur only in monotone positions?
    pub fn is_monotone(&self) -> bool {
        matches!(self.polarity(), Polarity::Absent | Polarity::Pos)
    }

    fn eval(&self, head: &Rational, rec: &mut dyn FnMut() -> Result<Degree>, fibre: Fibre) -> Result<Value> {
        let num = |v: Value| match v {
            Value::Num(r) => Ok(r),
            Value::Bool(_) => Err(Error::Invalid("expected a number".into())),
        };
        let boolean = |v: Value| match v {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(Error::Invalid("expected a boolean".into())),
        };
        Ok(match self {
            LiftExpr::Head => Value::Num(head.clone()),
            LiftExpr::Rec => match (fibre, rec()?) {
                (Fibre::Pred, d) => Value::Bool(d.is_top()),
                (Fibre::QPred, d) => Value::Num(d.as_rational()),
            },
            LiftExpr::Num(r) => Value::Num(r.clone()),
            LiftExpr::Bool(b) => Value::Bool(*b),
            LiftExpr::Add(a, b) => Value::Num(num(a.eval(head, rec, fibre)?)? + num(b.eval(head, rec, fibre)?)?),
            LiftExpr::Sub(a, b) => Value::Num(num(a.eval(head, rec, fibre)?)? - num(b.eval(head, rec, fibre)?)?),
            LiftExpr::Mul(a, b) => Value::Num(num(a.eval(head, rec, fibre)?)? * num(b.eval(head, rec, fibre)?)?),
            LiftExpr::Neg(a) => Value::Num(-num(a.eval(head, rec, fibre)?)?),
            LiftExpr::Min(a, b) => Value::Num(num(a.eval(head, rec, fibre)?)?.min(num(b.eval(head, rec, fibre)?)?)),
            LiftExpr::Max(a, b) => Value::Num(num(a.eval(head, rec, fibre)?)?.max(num(b.eval(head, rec, fibre)?)?)),
            LiftExpr::Cmp(op, a, b) => {
                Value::Bool(op.eval(&num(a.eval(head, rec, fibre)?)?, &num(b.eval(head, rec, fibre)?)?))
            }
            LiftExpr::And(xs) => {
                for x in xs {
                    if !boolean(x.eval(head, rec, fibre)?)? {
                        return Ok(Value::Bool(false));
                    }
                }
                Value::Bool(true)
            }
            LiftExpr::Or(xs) => {
                for x in xs {
                    if boolean(x.eval(head, rec, fibre)?)? {
                        return Ok(Value::Bool(true));
                    }
                }
                Value::Bool(false)
            }
            LiftExpr::Not(a) => Value::Bool(!boolean(a.eval(head, rec, fibre)?)?),
        })
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&LiftExpr> {
        match self {
            LiftExpr::And(xs) => xs.iter().flat_map(|x| x.conjuncts()).collect(),
            _ => vec![self],
        }
    }

    pub fn mentions_rec(&self) -> bool {
        self.polarity() != Polarity::Absent
    }
}

impl fmt::Display for LiftExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, xs: &[&LiftExpr]| -> fmt::Result {
            write!(f, "({name}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        };
        match self {
            LiftExpr::Head => write!(f, "head"),
            LiftExpr::Rec => write!(f, "rec"),
            LiftExpr::Num(r) => write!(f, "{}", fmt_rational(r)),
            LiftExpr::Bool(b) => write!(f, "{b}"),
            LiftExpr::Add(a, b) => list(f, "+", &[a, b]),
            LiftExpr::Sub(a, b) => list(f, "-", &[a, b]),
            LiftExpr::Mul(a, b) => list(f, "*", &[a, b]),
            LiftExpr::Neg(a) => list(f, "-", &[a]),
            LiftExpr::Min(a, b) => list(f, "min", &[a, b]),
            LiftExpr::Max(a, b) => list(f, "max", &[a, b]),
            LiftExpr::Cmp(op, a, b) => list(f, op.symbol(), &[a, b]),
            LiftExpr::And(xs) => list(f, "and", &xs.iter().collect::<Vec<_>>()),
            LiftExpr::Or(xs) => list(f, "or", &xs.iter().collect::<Vec<_>>()),
            LiftExpr::Not(a) => list(f, "not", &[a]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LiftMode {
    /// Unary predicates over `X`.
    Predicate,
    /// Binary relations over `X × X`.
    Relation,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LiftRule {
    /// Structural lifting over the functor grammar.
    Canonical,
    Expr(LiftExpr),
}

/// A predicate lifting `G` of a behaviour functor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lifting {
    pub name: Arc<str>,
    pub fibre: Fibre,
    pub mode: LiftMode,
    pub rule: LiftRule,
}

type Leaf<'a> = &'a dyn Fn(&Elem) -> Result<Degree>;
type Leaf2<'a> = &'a dyn Fn(&Elem, &Elem) -> Result<Degree>;

impl Lifting {
    pub fn canonical(name: &str, mode: LiftMode, fibre: Fibre) -> Lifting {
        Lifting { name: Arc::from(name), fibre, mode, rule: LiftRule::Canonical }
    }

    /// A custom lifting; the fibre follows from the expression's type.
    pub fn expr(name: &str, body: LiftExpr) -> Result<Lifting> {
        let fibre = body.infer_fibre()?;
        if !body.is_monotone() {
            return Err(Error::NotMonotone(format!("lifting {name}: rec occurs negatively in {body}")));
        }
        Ok(Lifting { name: Arc::from(name), fibre, mode: LiftMode::Predicate, rule: LiftRule::Expr(body) })
    }

    pub fn body(&self) -> Option<&LiftExpr> {
        match &self.rule {
            LiftRule::Expr(e) => Some(e),
            LiftRule::Canonical => None,
        }
    }

    /// Can this lifting be used with coalgebras of functor `f`?
    pub fn check_functor(&self, f: &Functor) -> Result<()> {
        if matches!(self.rule, LiftRule::Expr(_)) && !f.is_stream_shaped() {
            return Err(Error::Shape(format!("lifting {} expects a functor A x Id, got {f}", self.name)));
        }
        Ok(())
    }

    /// `G(P)` at `v ∈ F X`, where `leaf` gives `P`.
    pub fn lift(&self, f: &Functor, v: &Elem, leaf: Leaf<'_>) -> Result<Degree> {
        match &self.rule {
            LiftRule::Canonical => canonical_pred(f, v, self.fibre, leaf),
            LiftRule::Expr(e) => {
                let (head, next) = v.as_pair().ok_or_else(|| Error::Shape(format!("{v} is not a (head, tail) pair")))?;
                let head = head.as_num().ok_or_else(|| Error::Shape(format!("output {head} is not numeric")))?;
                let mut rec = || leaf(next);
                Ok(match e.eval(head, &mut rec, self.fibre)? {
                    Value::Bool(b) => Degree::Bool(b),
                    Value::Num(r) => Degree::Quant(r),
                })
            }
        }
    }

    /// `G(R)` at `(v, w) ∈ F X × F X`.
    pub fn lift_rel(&self, f: &Functor, v: &Elem, w: &Elem, leaf: Leaf2<'_>) -> Result<Degree> {
        match &self.rule {
            LiftRule::Canonical => canonical_rel(f, v, w, self.fibre, leaf),
            LiftRule::Expr(_) => Err(Error::Shape(format!("lifting {} is unary", self.name))),
        }
    }
}

fn canonical_pred(f: &Functor, v: &Elem, fibre: Fibre, leaf: Leaf<'_>) -> Result<Degree> {
    match (f, v) {
        (Functor::Const(_) | Functor::Rationals, _) => Ok(Degree::top(fibre)),
        (Functor::Id, x) => leaf(x),
        (Functor::Product(a, b), Elem::Pair(x, y)) => {
            let l = canonical_pred(a, x, fibre, leaf)?;
            if l == Degree::bottom(fibre) {
                return Ok(l);
            }
            Ok(l.meet(&canonical_pred(b, y, fibre, leaf)?))
        }
        (Functor::Sum(a, _), Elem::Inl(x)) => canonical_pred(a, x, fibre, leaf),
        (Functor::Sum(_, b), Elem::Inr(y)) => canonical_pred(b, y, fibre, leaf),
        (Functor::FinPowerset(a), Elem::Set(items)) => {
            let mut acc = Degree::top(fibre);
            for x in items.iter() {
                acc = acc.meet(&canonical_pred(a, x, fibre, leaf)?);
            }
            Ok(acc)
        }
        _ => Err(Error::Shape(format!("{v} does not have shape {f}"))),
    }
}

fn canonical_rel(f: &Functor, v: &Elem, w: &Elem, fibre: Fibre, leaf: Leaf2<'_>) -> Result<Degree> {
    let truth = |b: bool| if b { Degree::top(fibre) } else { Degree::bottom(fibre) };
    match (f, v, w) {
        (Functor::Const(_) | Functor::Rationals, _, _) => Ok(truth(v == w)),
        (Functor::Id, x, y) => leaf(x, y),
        (Functor::Product(a, b), Elem::Pair(x1, y1), Elem::Pair(x2, y2)) => {
            let l = canonical_rel(a, x1, x2, fibre, leaf)?;
            if l == Degree::bottom(fibre) {
                return Ok(l);
            }
            Ok(l.meet(&canonical_rel(b, y1, y2, fibre, leaf)?))
        }
        (Functor::Sum(a, _), Elem::Inl(x), Elem::Inl(y)) => canonical_rel(a, x, y, fibre, leaf),
        (Functor::Sum(_, b), Elem::Inr(x), Elem::Inr(y)) => canonical_rel(b, x, y, fibre, leaf),
        (Functor::Sum(..), Elem::Inl(_) | Elem::Inr(_), Elem::Inl(_) | Elem::Inr(_)) => Ok(truth(false)),
        (Functor::FinPowerset(a), Elem::Set(xs), Elem::Set(ys)) => {
            // Egli-Milner: every x is matched by some y, and conversely.
            let mut acc = Degree::top(fibre);
            for x in xs.iter() {
                let mut best = Degree::bottom(fibre);
                for y in ys.iter() {
                    best = best.join(&canonical_rel(a, x, y, fibre, leaf)?);
                }
                acc = acc.meet(&best);
            }
            for y in ys.iter() {
                let mut best = Degree::bottom(fibre);
                for x in xs.iter() {
                    best = best.join(&canonical_rel(a, x, y, fibre, leaf)?);
                }
                acc = acc.meet(&best);
            }
            Ok(acc)
        }
        _ => Err(Error::Shape(format!("({v}, {w}) does not have shape {f}"))),
    }
}

// ---------------------------------------------------------------------------
// Transformers
// ---------------------------------------------------------------------------

struct TransformerInner {
    name: Arc<str>,
    coalgebra: Coalgebra,
    lifting: Lifting,
    carrier: Carrier,
    final_chain: OnceLock<Chain>,
}

/// `Φ = c* ∘ G` on the fibre over the coalgebra's carrier (or its square,
/// for relation liftings).
#[derive(Clone)]
pub struct Transformer(Arc<TransformerInner>);

impl Transformer {
    pub fn new(name: &str, coalgebra: &Coalgebra, lifting: &Lifting) -> Result<Transformer> {
        lifting.check_functor(coalgebra.functor())?;
        let carrier = match lifting.mode {
            LiftMode::Predicate => coalgebra.carrier().clone(),
            LiftMode::Relation => Carrier::square(coalgebra.carrier()),
        };
        Ok(Transformer(Arc::new(TransformerInner {
            name: Arc::from(name),
            coalgebra: coalgebra.clone(),
            lifting: lifting.clone(),
            carrier,
            final_chain: OnceLock::new(),
        })))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn coalgebra(&self) -> &Coalgebra {
        &self.0.coalgebra
    }

    pub fn lifting(&self) -> &Lifting {
        &self.0.lifting
    }

    pub fn carrier(&self) -> &Carrier {
        &self.0.carrier
    }

    pub fn fibre(&self) -> Fibre {
        self.0.lifting.fibre
    }

    /// `Φ(P)(x) = G(P)(c(x))`.
    pub fn apply(&self, p: &Predicate) -> Result<Predicate> {
        if p.carrier() != self.carrier() {
            return Err(Error::CarrierMismatch { left: self.carrier().to_string(), right: p.carrier().to_string() });
        }
        if p.fibre() != self.fibre() {
            return Err(Error::FibreMismatch(format!("{} applied to a {} predicate", self.name(), p.fibre())));
        }
        let (phi, p) = (self.clone(), p.clone());
        Predicate::tabulate(self.carrier(), self.fibre(), move |x| phi.degree_at(&p, x))
    }

    fn degree_at(&self, p: &Predicate, x: &Elem) -> Result<Degree> {
        let c = &self.0.coalgebra;
        let f = c.functor();
        match self.0.lifting.mode {
            LiftMode::Predicate => self.0.lifting.lift(f, &c.step(x)?, &|y| p.degree(y)),
            LiftMode::Relation => {
                let (a, b) = x.as_pair().ok_or_else(|| Error::Shape(format!("{x} is not a pair")))?;
                let (ca, cb) = (c.step(a)?, c.step(b)?);
                self.0.lifting.lift_rel(f, &ca, &cb, &|u, v| p.degree(&Elem::pair(u.clone(), v.clone())))
            }
        }
    }
}

impl fmt::Debug for Transformer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Transformer({}: {} on {})", self.0.name, self.0.lifting.name, self.0.coalgebra.name())
    }
}

/// `ch(Φ)`: `⊤, Φ⊤, Φ²⊤, …`. Shared per transformer.
pub fn final_chain(phi: &Transformer) -> Chain {
    phi.0.final_chain.get_or_init(|| fresh_final_chain(phi)).clone()
}

/// An unshared copy of `ch(Φ)` with its own memo.
pub fn fresh_final_chain(phi: &Transformer) -> Chain {
    let p = phi.clone();
    Chain::iterate(phi.carrier(), phi.fibre(), &format!("ch({})", phi.name()), move |x| p.apply(x))
}

/// `Φ̂`: `Φ` applied index-wise.
pub fn map_transformer(phi: &Transformer, s: &Chain) -> Chain {
    let p = phi.clone();
    Chain::pointwise(s, &format!("{}^ {}", phi.name(), s.label()), move |x| p.apply(x))
}

/// Checks `ch(Φ) = ▷(Φ̂ ch(Φ))` index-wise, both sides built independently.
pub fn step_check(phi: &Transformer, depth: usize, probes: Option<&[Elem]>) -> Result<Option<Failure>> {
    let lhs = fresh_final_chain(phi);
    let rhs = chain::later(&map_transformer(phi, &fresh_final_chain(phi)));
    chain::chains_equal(&lhs, &rhs, depth, probes)
}

/// Exhaustive monotonicity check over all pairs `P ⊆ Q` of subsets of a
/// small finite carrier. Returns a witness pair on failure.
pub fn check_monotone(phi: &Transformer, max_size: usize) -> Result<Option<(Predicate, Predicate)>> {
    let elems = phi.carrier().elements()?;
    if elems.len() > max_size {
        return Err(Error::SizeBound(format!("monotonicity check on {} elements", elems.len())));
    }
    let subsets: Vec<Predicate> = all_subsets(phi.carrier())?;
    let images: Vec<Predicate> = subsets.iter().map(|p| phi.apply(p)).collect::<Result<_>>()?;
    for (i, p) in subsets.iter().enumerate() {
        for (j, q) in subsets.iter().enumerate() {
            if i & j == i && !fibre::leq(&images[i], &images[j], None)? {
                return Ok(Some((p.clone(), q.clone())));
            }
        }
    }
    Ok(None)
}

/// All subsets of a finite carrier, indexed by bitmask over the element order.
pub fn all_subsets(carrier: &Carrier) -> Result<Vec<Predicate>> {
    let elems = carrier.elements()?;
    if elems.len() >= 20 {
        return Err(Error::SizeBound(format!("2^{} subsets", elems.len())));
    }
    (0..1usize << elems.len())
        .map(|mask| Predicate::subset(carrier, elems.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone())))
        .collect()
}

/// Greatest fixed point by descending Knaster-Tarski iteration from `⊤`.
pub fn nu_oracle(phi: &Transformer) -> Result<Predicate> {
    if !phi.carrier().is_enumerable() {
        return Err(Error::NotEnumerable(phi.carrier().to_string()));
    }
    let mut p = Predicate::top(phi.carrier(), phi.fibre());
    for _ in 0..NU_BOUND {
        let q = phi.apply(&p)?;
        if fibre::equal(&p, &q, None)? {
            return Ok(p);
        }
        p = q;
    }
    Err(Error::NotStabilized(NU_BOUND))
}

/// `s_n` for a named stream.
pub fn sde_eval(system: &SdeSystem, name: &str, n: usize) -> Result<Rational> {
    system.nth(name, n)
}

// ---------------------------------------------------------------------------
// Global chain
// ---------------------------------------------------------------------------

/// The chain `ch(G)` over the varying carriers `F^n(1)`.
pub struct GlobalChain {
    lifting: Lifting,
    functor: Functor,
    memo: Mutex<Vec<Predicate>>,
}

impl GlobalChain {
    pub fn new(lifting: &Lifting, functor: &Functor) -> Result<GlobalChain> {
        if !functor.has_finite_constants() {
            return Err(Error::NotEnumerable(format!("global chain needs finite constants, got {functor}")));
        }
        lifting.check_functor(functor)?;
        Ok(GlobalChain { lifting: lifting.clone(), functor: functor.clone(), memo: Mutex::new(Vec::new()) })
    }

    pub fn functor(&self) -> &Functor {
        &self.functor
    }

    /// `F^n(1)`, squared for relation liftings.
    pub fn carrier(&self, n: usize) -> Carrier {
        let base = Carrier::behaviour(&self.functor, n);
        match self.lifting.mode {
            LiftMode::Predicate => base,
            LiftMode::Relation => Carrier::square(&base),
        }
    }

    /// `ch(G)_n`: `⊤` at 0, then `G(ch(G)_{n-1})`. Evaluated lazily per element.
    pub fn at(&self, n: usize) -> Result<Predicate> {
        let mut memo = self.memo.lock().expect("memo lock");
        while memo.len() <= n {
            let k = memo.len();
            let p = if k == 0 {
                Predicate::top(&self.carrier(0), self.lifting.fibre)
            } else {
                let prev = memo[k - 1].clone();
                let (lifting, functor) = (self.lifting.clone(), self.functor.clone());
                let carrier = self.carrier(k);
                match lifting.mode {
                    LiftMode::Predicate => {
                        let g = move |v: &Elem| lifting.lift(&functor, v, &|y| prev.degree(y));
                        lazy(&carrier, self.lifting.fibre, g)
                    }
                    LiftMode::Relation => {
                        let g = move |x: &Elem| {
                            let (v, w) = x.as_pair().ok_or_else(|| Error::Shape(format!("{x} is not a pair")))?;
                            lifting.lift_rel(&functor, v, w, &|a, b| prev.degree(&Elem::pair(a.clone(), b.clone())))
                        };
                        lazy(&carrier, self.lifting.fibre, g)
                    }
                }
            };
            memo.push(p);
        }
        Ok(memo[n].clone())
    }
}

fn lazy<F>(carrier: &Carrier, fibre: Fibre, f: F) -> Predicate
where
    F: Fn(&Elem) -> Result<Degree> + Send + Sync + 'static,
{
    match fibre {
        Fibre::Pred => Predicate::test(carrier, move |x| Ok(f(x)?.is_top())),
        Fibre::QPred => Predicate::measure(carrier, move |x| Ok(f(x)?.as_rational())),
    }
}

/// The cone map `ch(c)_n : X → F^n(1)`: `!` at 0, then `F(ch(c)_n) ∘ c`.
pub fn cone_map(coalgebra: &Coalgebra, functor: &Functor, n: usize) -> Result<BaseMap> {
    let target = Carrier::behaviour(functor, n);
    if n == 0 {
        return Ok(BaseMap::new("ch(c)_0", coalgebra.carrier(), &target, |_| Ok(Elem::Unit)));
    }
    let prev = cone_map(coalgebra, functor, n - 1)?;
    let (c, f) = (coalgebra.clone(), functor.clone());
    Ok(BaseMap::new(&format!("ch(c)_{n}"), coalgebra.carrier(), &target, move |x| {
        f.fmap(&c.step(x)?, &mut |y| prev.apply(y))
    }))
}

/// `m × m` on pairs.
pub fn square_map(m: &BaseMap) -> BaseMap {
    let inner = m.clone();
    BaseMap::new(
        &format!("{}^2", m.name()),
        &Carrier::square(m.source()),
        &Carrier::square(m.target()),
        move |x| {
            let (a, b) = x.as_pair().ok_or_else(|| Error::Shape(format!("{x} is not a pair")))?;
            Ok(Elem::pair(inner.apply(a)?, inner.apply(b)?))
        },
    )
}

fn local_cone(phi: &Transformer, functor: &Functor, n: usize) -> Result<BaseMap> {
    let m = cone_map(phi.coalgebra(), functor, n)?;
    Ok(match phi.lifting().mode {
        LiftMode::Predicate => m,
        LiftMode::Relation => square_map(&m),
    })
}

/// Checks `ch(c)_n^*(ch(G)_n) = ch(Φ)_n` for `n ≤ depth`.
pub fn local_global_check(
    phi: &Transformer,
    functor: &Functor,
    depth: usize,
    probes: Option<&[Elem]>,
) -> Result<Option<Failure>> {
    let global = GlobalChain::new(phi.lifting(), functor)?;
    let local = fresh_final_chain(phi);
    for n in 0..=depth {
        let lhs = fibre::reindex(&local_cone(phi, functor, n)?, &global.at(n)?)?;
        if let Some(x) = fibre::first_difference(&lhs, &local.at(n)?, probes)? {
            return Ok(Some(Failure { index: n, element: Some(x), note: "local and global chains differ".into() }));
        }
    }
    Ok(None)
}

/// The limit form on a finite carrier: with `c_ω = ⟨ch(c)_0, …, ch(c)_N⟩`
/// for `N` past stabilisation of `ch(Φ)`, `c_ω^*(lim ch(G)) = lim ch(Φ)`.
pub fn local_global_limit_check(phi: &Transformer, functor: &Functor) -> Result<bool> {
    let local = fresh_final_chain(phi);
    let n_stable = chain::stabilization_index(&local, chain::DEFAULT_LIMIT_BOUND)? + 1;
    let global = Arc::new(GlobalChain::new(phi.lifting(), functor)?);
    let cones: Vec<BaseMap> = (0..=n_stable).map(|n| local_cone(phi, functor, n)).collect::<Result<_>>()?;
    let tuple_carrier = Carrier::product((0..=n_stable).map(|n| global.carrier(n)).collect());
    let omega = BaseMap::new("c_omega", phi.carrier(), &tuple_carrier, move |x| {
        Ok(Elem::tuple(cones.iter().map(|m| m.apply(x)).collect::<Result<Vec<_>>>()?))
    });
    let g = global.clone();
    let lim_global = lazy(&tuple_carrier, phi.fibre(), move |t| {
        let parts = t.as_tuple().ok_or_else(|| Error::Shape(format!("{t} is not a tuple")))?;
        let mut acc = Degree::top(g.lifting.fibre);
        for (n, v) in parts.iter().enumerate() {
            acc = acc.meet(&g.at(n)?.degree(v)?);
        }
        Ok(acc)
    });
    let lhs = fibre::reindex(&omega, &lim_global)?;
    let rhs = chain::chain_limit(&local, 1, chain::DEFAULT_LIMIT_BOUND)?;
    fibre::equal(&lhs, &rhs, None)
}

/// Probe elements for stream carriers: every defined name and its first
/// few syntactic tails.
pub fn stream_probes(system: &SdeSystem, tails: usize) -> Result<Vec<Elem>> {
    let mut out = Vec::new();
    for name in system.names() {
        let mut t = Term::Name(name.clone());
        for _ in 0..=tails {
            out.push(Elem::stream(t.clone()));
            t = system.tail_of(&t)?;
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// `Σ_{k<n} 2^{-(k+1)} s_k + 2^{-n}`, the expected value of the final chain
/// of the discounting lifting `½·head + ½·rec`.
pub fn discounted_prefix(values: &[Rational]) -> Rational {
    let two = Rational::from_integer(2.into());
    let mut weight = Rational::one();
    let mut acc = Rational::zero();
    for v in values {
        weight /= &two;
        acc += &weight * v;
    }
    acc + weight
}

/// Bound used when enumerating behaviour carriers.
pub fn size_bound() -> usize {
    DEFAULT_SIZE_BOUND
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::{int, rat};
    use crate::sde::{HeadExpr, StreamOp};

    fn gt0() -> Lifting {
        let body = LiftExpr::And(vec![
            LiftExpr::Cmp(CmpOp::Gt, Box::new(LiftExpr::Head), Box::new(LiftExpr::Num(int(0)))),
            LiftExpr::Rec,
        ]);
        Lifting::expr("gt0", body).unwrap()
    }

    fn half() -> Lifting {
        let h = |e| LiftExpr::Mul(Box::new(LiftExpr::Num(rat(1, 2))), Box::new(e));
        Lifting::expr("half", LiftExpr::Add(Box::new(h(LiftExpr::Head)), Box::new(h(LiftExpr::Rec)))).unwrap()
    }

    fn streams() -> Coalgebra {
        let mut sys = SdeSystem::new();
        sys.declare_op("oplus", true, 2).unwrap();
        sys.declare_op("neg", true, 1).unwrap();
        sys.define("one", HeadExpr::Lit(int(1)), Term::name("one")).unwrap();
        sys.define("s", HeadExpr::Lit(int(1)), Term::op(StreamOp::Oplus, vec![Term::name("one"), Term::name("s")]))
            .unwrap();
        sys.define("alt", HeadExpr::Lit(int(1)), Term::op(StreamOp::Neg, vec![Term::name("alt")])).unwrap();
        sys.validate().unwrap();
        Coalgebra::streams("S", Arc::new(sys))
    }

    #[test]
    fn gt0_transformer() {
        let c = streams();
        let phi = Transformer::new("phi", &c, &gt0()).unwrap();
        let ch = final_chain(&phi);
        let s = Elem::stream(Term::name("s"));
        let alt = Elem::stream(Term::name("alt"));
        assert!(ch.at(0).unwrap().holds(&alt).unwrap());
        assert!(ch.at(1).unwrap().holds(&alt).unwrap());
        assert!(!ch.at(2).unwrap().holds(&alt).unwrap());
        assert!(ch.at(30).unwrap().holds(&s).unwrap());
        let probes = stream_probes(c.system().unwrap(), 3).unwrap();
        assert!(step_check(&phi, 32, Some(&probes)).unwrap().is_none());
    }

    #[test]
    fn negative_rec_rejected() {
        let body = LiftExpr::Not(Box::new(LiftExpr::Rec));
        assert!(matches!(Lifting::expr("bad", body), Err(Error::NotMonotone(_))));
        let mixed = LiftExpr::Cmp(CmpOp::Gt, Box::new(LiftExpr::Rec), Box::new(LiftExpr::Head));
        assert!(Lifting::expr("cmp", mixed).is_err());
    }

    #[test]
    fn quantitative_closed_form() {
        let mut sys = SdeSystem::new();
        sys.define("h", HeadExpr::Lit(rat(1, 2)), Term::name("h")).unwrap();
        let c = Coalgebra::streams("Q", Arc::new(sys));
        let phi = Transformer::new("q", &c, &half()).unwrap();
        assert_eq!(phi.fibre(), Fibre::QPred);
        let ch = final_chain(&phi);
        let h = Elem::stream(Term::name("h"));
        assert_eq!(ch.at(2).unwrap().degree(&h).unwrap(), Degree::Quant(rat(5, 8)));
        assert_eq!(discounted_prefix(&[rat(1, 2), rat(1, 2)]), rat(5, 8));
    }

    fn two_state(dead: bool) -> Coalgebra {
        let (x, y, a) = (Elem::atom("x"), Elem::atom("y"), Elem::atom("a"));
        let mut tr = vec![(x.clone(), a.clone(), x.clone())];
        if !dead {
            tr.push((y.clone(), a.clone(), y.clone()));
        }
        Coalgebra::lts("L", &[x, y], &[a], &tr).unwrap()
    }

    #[test]
    fn bisimulation() {
        let bisim = Lifting::canonical("bisim", LiftMode::Relation, Fibre::Pred);
        let phi = Transformer::new("b", &two_state(false), &bisim).unwrap();
        let top = Predicate::top(phi.carrier(), Fibre::Pred);
        assert!(fibre::equal(&phi.apply(&top).unwrap(), &top, None).unwrap());
        let phi = Transformer::new("b", &two_state(true), &bisim).unwrap();
        let nu = nu_oracle(&phi).unwrap();
        assert_eq!(nu.members().unwrap().len(), 2);
        let lim = chain::chain_limit(&final_chain(&phi), 1, 100).unwrap();
        assert!(fibre::equal(&nu, &lim, None).unwrap());
        assert!(check_monotone(&phi, 4).unwrap().is_none());
        assert!(step_check(&phi, 8, None).unwrap().is_none());
    }

    #[test]
    fn global_chain_streams() {
        let pm = Functor::stream(Functor::constant([Elem::Num(int(-1)), Elem::Num(int(1))]));
        let g = GlobalChain::new(&gt0(), &pm).unwrap();
        assert_eq!(g.at(0).unwrap().degree(&Elem::Unit).unwrap(), Degree::Bool(true));
        let two = g.carrier(2).elements().unwrap();
        let members: Vec<&Elem> = two.iter().filter(|v| g.at(2).unwrap().holds(v).unwrap()).collect();
        assert_eq!(members, vec![&Elem::pair(Elem::Num(int(1)), Elem::pair(Elem::Num(int(1)), Elem::Unit))]);

        let c = streams();
        let phi = Transformer::new("phi", &c, &gt0()).unwrap();
        let probes = vec![Elem::stream(Term::name("alt")), Elem::stream(Term::name("one"))];
        assert!(local_global_check(&phi, &pm, 6, Some(&probes)).unwrap().is_none());
        let m1 = cone_map(&c, &pm, 1).unwrap();
        assert_eq!(m1.apply(&probes[0]).unwrap(), Elem::pair(Elem::Num(int(1)), Elem::Unit));
        // `s` leaves the alphabet after one step.
        let m2 = cone_map(&c, &pm, 2).unwrap();
        assert!(m2.apply(&Elem::stream(Term::name("s"))).is_err());
    }

    #[test]
    fn global_chain_lts() {
        let bisim = Lifting::canonical("bisim", LiftMode::Relation, Fibre::Pred);
        let c = two_state(true);
        let phi = Transformer::new("b", &c, &bisim).unwrap();
        let f = c.functor().clone();
        assert!(local_global_check(&phi, &f, 3, None).unwrap().is_none());
        assert!(local_global_limit_check(&phi, &f).unwrap());
    }
}
