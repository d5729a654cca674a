//! Stream differential equations: terms, evaluation and syntactic tails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::elem::{fmt_rational, Rational};
use crate::error::{Error, Result};

/// Elements checked by [`SdeSystem::validate`].
pub const VALIDATION_PREFIX: usize = 8;

/// Built-in stream operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamOp {
    /// Pointwise sum.
    Oplus,
    /// Pointwise difference.
    Ominus,
    /// Pointwise product.
    Otimes,
    /// Pointwise negation.
    Neg,
    /// `odd(s)_k = s_{2k+1}`; not causal.
    Odd,
}

impl StreamOp {
    pub const ALL: [StreamOp; 5] = [StreamOp::Oplus, StreamOp::Ominus, StreamOp::Otimes, StreamOp::Neg, StreamOp::Odd];

    pub fn name(self) -> &'static str {
        match self {
            StreamOp::Oplus => "oplus",
            StreamOp::Ominus => "ominus",
            StreamOp::Otimes => "otimes",
            StreamOp::Neg => "neg",
            StreamOp::Odd => "odd",
        }
    }

    pub fn from_name(name: &str) -> Option<StreamOp> {
        StreamOp::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            StreamOp::Neg | StreamOp::Odd => 1,
            _ => 2,
        }
    }

    pub fn is_causal(self) -> bool {
        self != StreamOp::Odd
    }

    pub fn is_pointwise(self) -> bool {
        self != StreamOp::Odd
    }

    /// The `k`-th output element, reading inputs through `arg(i, j)`.
    pub fn elem(self, k: usize, arg: &mut dyn FnMut(usize, usize) -> Result<Rational>) -> Result<Rational> {
        Ok(match self {
            StreamOp::Oplus => arg(0, k)? + arg(1, k)?,
            StreamOp::Ominus => arg(0, k)? - arg(1, k)?,
            StreamOp::Otimes => arg(0, k)? * arg(1, k)?,
            StreamOp::Neg => -arg(0, k)?,
            StreamOp::Odd => arg(0, 2 * k + 1)?,
        })
    }
}

impl fmt::Display for StreamOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stream terms. `Hole` marks the argument position of a context.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Name(Arc<str>),
    /// The constant stream `[a]`.
    Lit(Rational),
    Op(StreamOp, Vec<Term>),
    Tail(Box<Term>),
    Hole,
}

impl Term {
    pub fn name(n: &str) -> Term {
        Term::Name(Arc::from(n))
    }

    pub fn op(op: StreamOp, args: Vec<Term>) -> Term {
        Term::Op(op, args)
    }

    pub fn tail(t: Term) -> Term {
        Term::Tail(Box::new(t))
    }

    pub fn has_hole(&self) -> bool {
        match self {
            Term::Hole => true,
            Term::Name(_) | Term::Lit(_) => false,
            Term::Op(_, args) => args.iter().any(Term::has_hole),
            Term::Tail(t) => t.has_hole(),
        }
    }

    pub fn hole_count(&self) -> usize {
        match self {
            Term::Hole => 1,
            Term::Name(_) | Term::Lit(_) => 0,
            Term::Op(_, args) => args.iter().map(Term::hole_count).sum(),
            Term::Tail(t) => t.hole_count(),
        }
    }

    /// Replaces every hole with `t`.
    pub fn fill(&self, t: &Term) -> Term {
        match self {
            Term::Hole => t.clone(),
            Term::Name(_) | Term::Lit(_) => self.clone(),
            Term::Op(op, args) => Term::Op(*op, args.iter().map(|a| a.fill(t)).collect()),
            Term::Tail(inner) => Term::tail(inner.fill(t)),
        }
    }

    /// Finds `t` with `self.fill(t) == term`.
    pub fn match_context(&self, term: &Term) -> Option<Term> {
        let mut found = None;
        if self.match_into(term, &mut found) {
            found
        } else {
            None
        }
    }

    fn match_into(&self, term: &Term, found: &mut Option<Term>) -> bool {
        match (self, term) {
            (Term::Hole, _) => match found {
                Some(prev) => prev == term,
                None => {
                    *found = Some(term.clone());
                    true
                }
            },
            (Term::Op(o1, a1), Term::Op(o2, a2)) => {
                o1 == o2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(p, t)| p.match_into(t, found))
            }
            (Term::Tail(p), Term::Tail(t)) => p.match_into(t, found),
            _ => self == term,
        }
    }

    pub fn names(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Term::Name(n) => out.push(n.clone()),
            Term::Lit(_) | Term::Hole => {}
            Term::Op(_, args) => args.iter().for_each(|a| a.names(out)),
            Term::Tail(t) => t.names(out),
        }
    }

    pub fn ops(&self, out: &mut Vec<StreamOp>) {
        match self {
            Term::Op(op, args) => {
                out.push(*op);
                args.iter().for_each(|a| a.ops(out));
            }
            Term::Tail(t) => t.ops(out),
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Name(n) => write!(f, "{n}"),
            Term::Lit(r) => write!(f, "(const {})", fmt_rational(r)),
            Term::Op(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Term::Tail(t) => write!(f, "(tail {t})"),
            Term::Hole => write!(f, "_"),
        }
    }
}

/// Head expressions of an SDE.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HeadExpr {
    Lit(Rational),
    /// `t_0`.
    Head(Term),
    Add(Box<HeadExpr>, Box<HeadExpr>),
    Sub(Box<HeadExpr>, Box<HeadExpr>),
    Mul(Box<HeadExpr>, Box<HeadExpr>),
    Neg(Box<HeadExpr>),
}

impl HeadExpr {
    fn terms<'a>(&'a self, out: &mut Vec<&'a Term>) {
        match self {
            HeadExpr::Lit(_) => {}
            HeadExpr::Head(t) => out.push(t),
            HeadExpr::Add(a, b) | HeadExpr::Sub(a, b) | HeadExpr::Mul(a, b) => {
                a.terms(out);
                b.terms(out);
            }
            HeadExpr::Neg(a) => a.terms(out),
        }
    }
}

impl fmt::Display for HeadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadExpr::Lit(r) => write!(f, "{}", fmt_rational(r)),
            HeadExpr::Head(t) => write!(f, "(head {t})"),
            HeadExpr::Add(a, b) => write!(f, "(+ {a} {b})"),
            HeadExpr::Sub(a, b) => write!(f, "(- {a} {b})"),
            HeadExpr::Mul(a, b) => write!(f, "(* {a} {b})"),
            HeadExpr::Neg(a) => write!(f, "(- {a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdeDef {
    pub name: Arc<str>,
    pub head: HeadExpr,
    pub tail: Term,
}

/// A closed system of stream definitions over declared operations.
///
/// Element values are memoised per `(name, index)`; the memo is shared and
/// filled idempotently, so a system can be evaluated from several threads.
pub struct SdeSystem {
    defs: BTreeMap<Arc<str>, SdeDef>,
    ops: BTreeMap<StreamOp, bool>,
    memo: Mutex<HashMap<Arc<str>, Vec<Rational>>>,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem").field("defs", &self.defs).field("ops", &self.ops).finish()
    }
}

type HoleFn<'a> = &'a mut dyn FnMut(usize) -> Result<Rational>;

#[derive(Default)]
struct Eval {
    active: HashSet<Arc<str>>,
}

impl Default for SdeSystem {
    fn default() -> Self {
        SdeSystem::new()
    }
}

impl SdeSystem {
    pub fn new() -> SdeSystem {
        SdeSystem { defs: BTreeMap::new(), ops: BTreeMap::new(), memo: Mutex::new(HashMap::new()) }
    }

    /// Declares a built-in operation. `causal` must agree with the operation.
    pub fn declare_op(&mut self, name: &str, causal: bool, arity: usize) -> Result<StreamOp> {
        let op = StreamOp::from_name(name).ok_or_else(|| Error::UndeclaredOp(name.to_string()))?;
        if op.arity() != arity {
            return Err(Error::Invalid(format!("operation {name} has arity {}, declared {arity}", op.arity())));
        }
        if causal && !op.is_causal() {
            return Err(Error::Invalid(format!("operation {name} is not causal")));
        }
        self.ops.insert(op, causal);
        Ok(op)
    }

    pub fn is_declared(&self, op: StreamOp) -> bool {
        self.ops.contains_key(&op)
    }

    pub fn define(&mut self, name: &str, head: HeadExpr, tail: Term) -> Result<()> {
        if self.defs.contains_key(name) {
            return Err(Error::Invalid(format!("stream {name} defined twice")));
        }
        let name: Arc<str> = Arc::from(name);
        self.defs.insert(name.clone(), SdeDef { name, head, tail });
        self.memo.lock().expect("memo lock").clear();
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&SdeDef> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &Arc<str>> {
        self.defs.keys()
    }

    pub fn defs(&self) -> impl Iterator<Item = &SdeDef> {
        self.defs.values()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Checks that every name is defined, every operation declared, and that
    /// the first few elements of each stream evaluate without cycles.
    pub fn validate(&self) -> Result<()> {
        for def in self.defs.values() {
            let mut terms = vec![&def.tail];
            def.head.terms(&mut terms);
            for t in terms {
                self.check_term(t)?;
                if t.has_hole() {
                    return Err(Error::Invalid(format!("definition of {} contains a hole", def.name)));
                }
            }
        }
        for name in self.defs.keys() {
            for k in 0..VALIDATION_PREFIX {
                self.nth(name, k)?;
            }
        }
        Ok(())
    }

    /// Every name defined and every operation declared, with matching arity.
    pub fn check_term(&self, t: &Term) -> Result<()> {
        match t {
            Term::Name(n) if !self.defs.contains_key(n) => Err(Error::UndefinedStream(n.to_string())),
            Term::Name(_) | Term::Lit(_) | Term::Hole => Ok(()),
            Term::Op(op, args) => {
                if !self.is_declared(*op) {
                    return Err(Error::UndeclaredOp(op.name().to_string()));
                }
                if args.len() != op.arity() {
                    return Err(Error::Invalid(format!("{op} expects {} arguments, got {}", op.arity(), args.len())));
                }
                args.iter().try_for_each(|a| self.check_term(a))
            }
            Term::Tail(inner) => self.check_term(inner),
        }
    }

    /// `s_n` for a named stream.
    pub fn nth(&self, name: &str, n: usize) -> Result<Rational> {
        self.elem(&Term::name(name), n)
    }

    /// `t_k` for a closed term.
    pub fn elem(&self, t: &Term, k: usize) -> Result<Rational> {
        let mut no_hole = |_| Err(Error::Invalid("term contains a hole".into()));
        self.eval(t, k, &mut no_hole, &mut Eval::default())
    }

    /// `t_k` where the hole reads from `hole`.
    pub fn elem_with_hole(&self, t: &Term, k: usize, hole: HoleFn<'_>) -> Result<Rational> {
        self.eval(t, k, hole, &mut Eval::default())
    }

    /// The first `n` elements of `t`.
    pub fn prefix(&self, t: &Term, n: usize) -> Result<Vec<Rational>> {
        (0..n).map(|k| self.elem(t, k)).collect()
    }

    fn eval(&self, t: &Term, k: usize, hole: HoleFn<'_>, ev: &mut Eval) -> Result<Rational> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.eval_step(t, k, hole, ev))
    }

    fn eval_step(&self, t: &Term, k: usize, hole: HoleFn<'_>, ev: &mut Eval) -> Result<Rational> {
        match t {
            Term::Lit(r) => Ok(r.clone()),
            Term::Hole => hole(k),
            Term::Tail(inner) => self.eval(inner, k + 1, hole, ev),
            Term::Op(op, args) => {
                if !self.is_declared(*op) {
                    return Err(Error::UndeclaredOp(op.name().to_string()));
                }
                if args.len() != op.arity() {
                    return Err(Error::Invalid(format!("{op} expects {} arguments", op.arity())));
                }
                op.elem(k, &mut |i, j| self.eval(&args[i], j, hole, ev))
            }
            Term::Name(n) => {
                if let Some(v) = self.memo.lock().expect("memo lock").get(n).and_then(|vs| vs.get(k)) {
                    return Ok(v.clone());
                }
                // Fill bottom-up so that recursion depth stays independent of `k`.
                let start = self.memo.lock().expect("memo lock").get(n).map_or(0, Vec::len);
                for j in start..=k {
                    self.named(n, j, ev)?;
                }
                Ok(self.memo.lock().expect("memo lock")[n][k].clone())
            }
        }
    }

    /// Computes element `k` of `name`, assuming elements `< k` are memoised.
    fn named(&self, name: &Arc<str>, k: usize, ev: &mut Eval) -> Result<()> {
        if self.memo.lock().expect("memo lock").get(name).map_or(0, Vec::len) > k {
            return Ok(());
        }
        let def = self.defs.get(name).ok_or_else(|| Error::UndefinedStream(name.to_string()))?;
        if ev.active.contains(name) {
            return Err(Error::Unproductive(format!("{name}_{k} depends on itself")));
        }
        ev.active.insert(name.clone());
        let mut no_hole = |_| Err(Error::Invalid("definition contains a hole".into()));
        let value = if k == 0 {
            self.head_value(&def.head, &mut no_hole, ev)
        } else {
            self.eval(&def.tail, k - 1, &mut no_hole, ev)
        };
        ev.active.remove(name);
        let value = value?;
        let mut memo = self.memo.lock().expect("memo lock");
        let vs = memo.entry(name.clone()).or_default();
        if vs.len() == k {
            vs.push(value);
        }
        Ok(())
    }

    fn head_value(&self, h: &HeadExpr, hole: HoleFn<'_>, ev: &mut Eval) -> Result<Rational> {
        Ok(match h {
            HeadExpr::Lit(r) => r.clone(),
            HeadExpr::Head(t) => self.eval(t, 0, hole, ev)?,
            HeadExpr::Add(a, b) => self.head_value(a, hole, ev)? + self.head_value(b, hole, ev)?,
            HeadExpr::Sub(a, b) => self.head_value(a, hole, ev)? - self.head_value(b, hole, ev)?,
            HeadExpr::Mul(a, b) => self.head_value(a, hole, ev)? * self.head_value(b, hole, ev)?,
            HeadExpr::Neg(a) => -self.head_value(a, hole, ev)?,
        })
    }

    /// Syntactic tail: unfolds names by their definitions and pushes `tail`
    /// through operations. The result denotes the same stream as `(tail t)`.
    pub fn tail_of(&self, t: &Term) -> Result<Term> {
        self.tail_fuel(t, 256)
    }

    fn tail_fuel(&self, t: &Term, fuel: usize) -> Result<Term> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.tail_step(t, fuel))
    }

    /// Fuel bounds unfoldings; structural descent into operands is free.
    fn tail_step(&self, t: &Term, fuel: usize) -> Result<Term> {
        if fuel == 0 {
            return Err(Error::Unproductive(format!("tail of {t} does not normalise")));
        }
        match t {
            Term::Name(n) => {
                let def = self.defs.get(n).ok_or_else(|| Error::UndefinedStream(n.to_string()))?;
                self.normalize_fuel(&def.tail, fuel - 1)
            }
            Term::Lit(_) => Ok(t.clone()),
            Term::Op(StreamOp::Odd, args) => {
                let tt = self.tail_fuel(&self.tail_fuel(&args[0], fuel - 1)?, fuel - 1)?;
                Ok(Term::Op(StreamOp::Odd, vec![tt]))
            }
            Term::Op(op, args) => {
                Ok(Term::Op(*op, args.iter().map(|a| self.tail_fuel(a, fuel)).collect::<Result<_>>()?))
            }
            Term::Hole => Ok(Term::tail(Term::Hole)),
            Term::Tail(inner) if inner.has_hole() && is_hole_tower(inner) => Ok(Term::tail(t.clone())),
            Term::Tail(inner) => {
                let n = self.normalize_fuel(inner, fuel - 1)?;
                let once = self.tail_fuel(&n, fuel - 1)?;
                self.tail_fuel(&once, fuel - 1)
            }
        }
    }

    /// Removes `tail` applications except directly over holes.
    pub fn normalize(&self, t: &Term) -> Result<Term> {
        self.normalize_fuel(t, 256)
    }

    fn normalize_fuel(&self, t: &Term, fuel: usize) -> Result<Term> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.normalize_step(t, fuel))
    }

    fn normalize_step(&self, t: &Term, fuel: usize) -> Result<Term> {
        if fuel == 0 {
            return Err(Error::Unproductive(format!("{t} does not normalise")));
        }
        match t {
            Term::Tail(inner) if is_hole_tower(inner) => Ok(t.clone()),
            Term::Tail(inner) => {
                let n = self.normalize_fuel(inner, fuel - 1)?;
                self.tail_fuel(&n, fuel - 1)
            }
            Term::Op(op, args) => {
                Ok(Term::Op(*op, args.iter().map(|a| self.normalize_fuel(a, fuel)).collect::<Result<_>>()?))
            }
            _ => Ok(t.clone()),
        }
    }

    /// Semi-decides causality of a context: for every `k < depth`, output
    /// element `k` reads the hole at indices `≤ k` only.
    pub fn causality_check(&self, ctx: &Term, depth: usize) -> Result<Option<usize>> {
        for k in 0..depth {
            let mut max_read = 0usize;
            let mut probe = |j: usize| {
                max_read = max_read.max(j);
                Ok(Rational::from_integer((j as i64 + 1).into()))
            };
            self.elem_with_hole(ctx, k, &mut probe)?;
            if max_read > k {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// Head of a context as an affine function `a + b·x` of the hole's head,
    /// when it is one.
    pub fn affine_head(&self, ctx: &Term) -> Result<Option<(Rational, Rational)>> {
        use num_traits::Zero;
        Ok(match ctx {
            Term::Hole => Some((Rational::zero(), num_traits::One::one())),
            _ if !ctx.has_hole() => Some((self.elem(ctx, 0)?, Rational::zero())),
            Term::Op(op, args) => {
                let parts: Option<Vec<(Rational, Rational)>> =
                    args.iter().map(|a| self.affine_head(a)).collect::<Result<Vec<_>>>()?.into_iter().collect();
                let Some(parts) = parts else { return Ok(None) };
                match op {
                    StreamOp::Oplus => Some((&parts[0].0 + &parts[1].0, &parts[0].1 + &parts[1].1)),
                    StreamOp::Ominus => Some((&parts[0].0 - &parts[1].0, &parts[0].1 - &parts[1].1)),
                    StreamOp::Neg => Some((-&parts[0].0, -&parts[0].1)),
                    StreamOp::Otimes => {
                        let ((a0, b0), (a1, b1)) = (&parts[0], &parts[1]);
                        if b0.is_zero() {
                            Some((a0 * a1, a0 * b1))
                        } else if b1.is_zero() {
                            Some((a0 * a1, b0 * a1))
                        } else {
                            None
                        }
                    }
                    StreamOp::Odd => None,
                }
            }
            Term::Tail(_) | Term::Name(_) | Term::Lit(_) => None,
        })
    }
}

fn is_hole_tower(t: &Term) -> bool {
    match t {
        Term::Hole => true,
        Term::Tail(inner) => is_hole_tower(inner),
        _ => false,
    }
}
