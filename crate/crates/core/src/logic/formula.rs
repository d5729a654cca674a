//! Formulas, element terms and sequents.

use std::collections::BTreeSet;
use std::fmt;

use crate::elem::{fmt_rational, Rational};
use crate::sde::{StreamOp, Term};
use crate::transformer::CmpOp;

/// Terms denoting carrier elements.
///
/// A symbol is resolved in order: variable of the sequent, stream name,
/// constant of a finite sort.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElemTerm {
    Sym(String),
    Num(Rational),
    /// The constant stream `(const r)`.
    Lit(Rational),
    Tail(Box<ElemTerm>),
    Op(StreamOp, Vec<ElemTerm>),
    Pair(Box<ElemTerm>, Box<ElemTerm>),
}

impl ElemTerm {
    pub fn sym(s: &str) -> ElemTerm {
        ElemTerm::Sym(s.to_string())
    }

    pub fn tail(e: ElemTerm) -> ElemTerm {
        ElemTerm::Tail(Box::new(e))
    }

    pub fn pair(a: ElemTerm, b: ElemTerm) -> ElemTerm {
        ElemTerm::Pair(Box::new(a), Box::new(b))
    }

    pub fn syms(&self, out: &mut BTreeSet<String>) {
        match self {
            ElemTerm::Sym(s) => {
                out.insert(s.clone());
            }
            ElemTerm::Num(_) | ElemTerm::Lit(_) => {}
            ElemTerm::Tail(e) => e.syms(out),
            ElemTerm::Op(_, args) => args.iter().for_each(|a| a.syms(out)),
            ElemTerm::Pair(a, b) => {
                a.syms(out);
                b.syms(out);
            }
        }
    }

    pub fn subst(&self, var: &str, by: &ElemTerm) -> ElemTerm {
        match self {
            ElemTerm::Sym(s) if s == var => by.clone(),
            ElemTerm::Sym(_) | ElemTerm::Num(_) | ElemTerm::Lit(_) => self.clone(),
            ElemTerm::Tail(e) => ElemTerm::tail(e.subst(var, by)),
            ElemTerm::Op(op, args) => ElemTerm::Op(*op, args.iter().map(|a| a.subst(var, by)).collect()),
            ElemTerm::Pair(a, b) => ElemTerm::pair(a.subst(var, by), b.subst(var, by)),
        }
    }

    /// The stream term this denotes, with symbols read as stream names.
    pub fn to_stream_term(&self) -> Option<Term> {
        Some(match self {
            ElemTerm::Sym(s) => Term::name(s),
            ElemTerm::Num(r) | ElemTerm::Lit(r) => Term::Lit(r.clone()),
            ElemTerm::Tail(e) => Term::tail(e.to_stream_term()?),
            ElemTerm::Op(op, args) => Term::op(*op, args.iter().map(ElemTerm::to_stream_term).collect::<Option<_>>()?),
            ElemTerm::Pair(..) => return None,
        })
    }

    pub fn from_stream_term(t: &Term) -> Option<ElemTerm> {
        Some(match t {
            Term::Name(n) => ElemTerm::Sym(n.to_string()),
            Term::Lit(r) => ElemTerm::Lit(r.clone()),
            Term::Tail(e) => ElemTerm::tail(ElemTerm::from_stream_term(e)?),
            Term::Op(op, args) => {
                ElemTerm::Op(*op, args.iter().map(ElemTerm::from_stream_term).collect::<Option<_>>()?)
            }
            Term::Hole => return None,
        })
    }

    /// Rewrites the first subterm (pre-order) on which `f` fires.
    pub fn rewrite_first(&self, f: &mut dyn FnMut(&ElemTerm) -> Option<ElemTerm>) -> Option<ElemTerm> {
        if let Some(r) = f(self) {
            return Some(r);
        }
        match self {
            ElemTerm::Sym(_) | ElemTerm::Num(_) | ElemTerm::Lit(_) => None,
            ElemTerm::Tail(e) => e.rewrite_first(f).map(ElemTerm::tail),
            ElemTerm::Op(op, args) => {
                for (i, a) in args.iter().enumerate() {
                    if let Some(r) = a.rewrite_first(f) {
                        let mut args = args.clone();
                        args[i] = r;
                        return Some(ElemTerm::Op(*op, args));
                    }
                }
                None
            }
            ElemTerm::Pair(a, b) => match a.rewrite_first(f) {
                Some(r) => Some(ElemTerm::pair(r, (**b).clone())),
                None => b.rewrite_first(f).map(|r| ElemTerm::pair((**a).clone(), r)),
            },
        }
    }
}

impl fmt::Display for ElemTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemTerm::Sym(s) => f.write_str(s),
            ElemTerm::Num(r) => f.write_str(&fmt_rational(r)),
            ElemTerm::Lit(r) => write!(f, "(const {})", fmt_rational(r)),
            ElemTerm::Tail(e) => write!(f, "(tail {e})"),
            ElemTerm::Op(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
            ElemTerm::Pair(a, b) => write!(f, "(pair {a} {b})"),
        }
    }
}

/// Rational-valued observations of elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NumExpr {
    Lit(Rational),
    /// The output of an element: a stream's head or an automaton state's label.
    Head(ElemTerm),
    /// `e_k` for a stream.
    Nth(ElemTerm, usize),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Mul(Box<NumExpr>, Box<NumExpr>),
    Neg(Box<NumExpr>),
    Min(Box<NumExpr>, Box<NumExpr>),
    Max(Box<NumExpr>, Box<NumExpr>),
}

impl NumExpr {
    fn map_terms(&self, f: &mut dyn FnMut(&ElemTerm) -> ElemTerm) -> NumExpr {
        let bin = |a: &NumExpr, b: &NumExpr, f: &mut dyn FnMut(&ElemTerm) -> ElemTerm| {
            (Box::new(a.map_terms(f)), Box::new(b.map_terms(f)))
        };
        match self {
            NumExpr::Lit(_) => self.clone(),
            NumExpr::Head(e) => NumExpr::Head(f(e)),
            NumExpr::Nth(e, k) => NumExpr::Nth(f(e), *k),
            NumExpr::Add(a, b) => {
                let (a, b) = bin(a, b, f);
                NumExpr::Add(a, b)
            }
            NumExpr::Sub(a, b) => {
                let (a, b) = bin(a, b, f);
                NumExpr::Sub(a, b)
            }
            NumExpr::Mul(a, b) => {
                let (a, b) = bin(a, b, f);
                NumExpr::Mul(a, b)
            }
            NumExpr::Min(a, b) => {
                let (a, b) = bin(a, b, f);
                NumExpr::Min(a, b)
            }
            NumExpr::Max(a, b) => {
                let (a, b) = bin(a, b, f);
                NumExpr::Max(a, b)
            }
            NumExpr::Neg(a) => NumExpr::Neg(Box::new(a.map_terms(f))),
        }
    }

    fn terms<'a>(&'a self, out: &mut Vec<&'a ElemTerm>) {
        match self {
            NumExpr::Lit(_) => {}
            NumExpr::Head(e) | NumExpr::Nth(e, _) => out.push(e),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) | NumExpr::Min(a, b) | NumExpr::Max(a, b) => {
                a.terms(out);
                b.terms(out);
            }
            NumExpr::Neg(a) => a.terms(out),
        }
    }
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Lit(r) => f.write_str(&fmt_rational(r)),
            NumExpr::Head(e) => write!(f, "(head {e})"),
            NumExpr::Nth(e, k) => write!(f, "(nth {e} {k})"),
            NumExpr::Add(a, b) => write!(f, "(+ {a} {b})"),
            NumExpr::Sub(a, b) => write!(f, "(- {a} {b})"),
            NumExpr::Mul(a, b) => write!(f, "(* {a} {b})"),
            NumExpr::Neg(a) => write!(f, "(- {a})"),
            NumExpr::Min(a, b) => write!(f, "(min {a} {b})"),
            NumExpr::Max(a, b) => write!(f, "(max {a} {b})"),
        }
    }
}

/// Decidable base facts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Fact {
    Bool(bool),
    Cmp(CmpOp, NumExpr, NumExpr),
    Eq(ElemTerm, ElemTerm),
    Not(Box<Fact>),
    And(Vec<Fact>),
    Or(Vec<Fact>),
}

impl Fact {
    pub fn map_terms(&self, f: &mut dyn FnMut(&ElemTerm) -> ElemTerm) -> Fact {
        match self {
            Fact::Bool(_) => self.clone(),
            Fact::Cmp(op, a, b) => Fact::Cmp(*op, a.map_terms(f), b.map_terms(f)),
            Fact::Eq(a, b) => Fact::Eq(f(a), f(b)),
            Fact::Not(a) => Fact::Not(Box::new(a.map_terms(f))),
            Fact::And(v) => Fact::And(v.iter().map(|x| x.map_terms(f)).collect()),
            Fact::Or(v) => Fact::Or(v.iter().map(|x| x.map_terms(f)).collect()),
        }
    }

    pub fn terms<'a>(&'a self, out: &mut Vec<&'a ElemTerm>) {
        match self {
            Fact::Bool(_) => {}
            Fact::Cmp(_, a, b) => {
                a.terms(out);
                b.terms(out);
            }
            Fact::Eq(a, b) => {
                out.push(a);
                out.push(b);
            }
            Fact::Not(a) => a.terms(out),
            Fact::And(v) | Fact::Or(v) => v.iter().for_each(|x| x.terms(out)),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, v: &[Fact]| {
            write!(f, "({head}")?;
            for x in v {
                write!(f, " {x}")?;
            }
            f.write_str(")")
        };
        match self {
            Fact::Bool(b) => write!(f, "{b}"),
            Fact::Cmp(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
            Fact::Eq(a, b) => write!(f, "(eq {a} {b})"),
            Fact::Not(a) => write!(f, "(not {a})"),
            Fact::And(v) => list(f, "and", v),
            Fact::Or(v) => list(f, "or", v),
        }
    }
}

/// Chain expressions: named chains, `▷`, `Φ̂` and `T̂`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ChainExpr {
    Named(String),
    Later(Box<ChainExpr>),
    /// The transformer of a final chain applied index-wise.
    Phi(String, Box<ChainExpr>),
    /// A technique applied index-wise.
    Tech(String, Box<ChainExpr>),
}

impl ChainExpr {
    pub fn named(n: &str) -> ChainExpr {
        ChainExpr::Named(n.to_string())
    }

    pub fn later(c: ChainExpr) -> ChainExpr {
        ChainExpr::Later(Box::new(c))
    }

    pub fn phi(n: &str, c: ChainExpr) -> ChainExpr {
        ChainExpr::Phi(n.to_string(), Box::new(c))
    }

    /// Rewrites the first node (pre-order) on which `f` fires.
    pub fn rewrite_first(&self, f: &mut dyn FnMut(&ChainExpr) -> Option<ChainExpr>) -> Option<ChainExpr> {
        if let Some(r) = f(self) {
            return Some(r);
        }
        match self {
            ChainExpr::Named(_) => None,
            ChainExpr::Later(c) => c.rewrite_first(f).map(ChainExpr::later),
            ChainExpr::Phi(n, c) => c.rewrite_first(f).map(|c| ChainExpr::Phi(n.clone(), Box::new(c))),
            ChainExpr::Tech(n, c) => c.rewrite_first(f).map(|c| ChainExpr::Tech(n.clone(), Box::new(c))),
        }
    }

    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            ChainExpr::Named(n) => {
                out.insert(n.clone());
            }
            ChainExpr::Later(c) => c.names(out),
            ChainExpr::Phi(n, c) => {
                out.insert(n.clone());
                c.names(out);
            }
            ChainExpr::Tech(_, c) => c.names(out),
        }
    }
}

impl fmt::Display for ChainExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainExpr::Named(n) => f.write_str(n),
            ChainExpr::Later(c) => write!(f, "(later {c})"),
            ChainExpr::Phi(n, c) => write!(f, "(phi {n} {c})"),
            ChainExpr::Tech(n, c) => write!(f, "(upto {n} {c})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Top,
    Atom(Fact),
    Mem(ElemTerm, ChainExpr),
    Later(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Impl(Box<Formula>, Box<Formula>),
    /// Variable, finite sort, body.
    Forall(String, String, Box<Formula>),
    Exists(String, String, Box<Formula>),
}

impl Formula {
    pub fn later(f: Formula) -> Formula {
        Formula::Later(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Impl(Box::new(a), Box::new(b))
    }

    pub fn forall(x: &str, sort: &str, body: Formula) -> Formula {
        Formula::Forall(x.to_string(), sort.to_string(), Box::new(body))
    }

    pub fn exists(x: &str, sort: &str, body: Formula) -> Formula {
        Formula::Exists(x.to_string(), sort.to_string(), Box::new(body))
    }

    pub fn mem(e: ElemTerm, c: ChainExpr) -> Formula {
        Formula::Mem(e, c)
    }

    /// Right-nested conjunction; `Top` when empty.
    pub fn conj(mut parts: Vec<Formula>) -> Formula {
        let Some(mut acc) = parts.pop() else { return Formula::Top };
        while let Some(p) = parts.pop() {
            acc = Formula::and(p, acc);
        }
        acc
    }

    /// Symbols occurring free.
    pub fn free_syms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Top => {}
            Formula::Atom(fact) => {
                let mut terms = Vec::new();
                fact.terms(&mut terms);
                terms.into_iter().for_each(|t| t.syms(out));
            }
            Formula::Mem(e, _) => e.syms(out),
            Formula::Later(a) => a.free_syms(out),
            Formula::And(a, b) | Formula::Impl(a, b) => {
                a.free_syms(out);
                b.free_syms(out);
            }
            Formula::Forall(x, _, body) | Formula::Exists(x, _, body) => {
                let mut inner = BTreeSet::new();
                body.free_syms(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
        }
    }

    /// Symbols bound anywhere inside.
    pub fn bound_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Top | Formula::Atom(_) | Formula::Mem(..) => {}
            Formula::Later(a) => a.bound_vars(out),
            Formula::And(a, b) | Formula::Impl(a, b) => {
                a.bound_vars(out);
                b.bound_vars(out);
            }
            Formula::Forall(x, _, body) | Formula::Exists(x, _, body) => {
                out.insert(x.clone());
                body.bound_vars(out);
            }
        }
    }

    pub fn chain_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Top | Formula::Atom(_) => {}
            Formula::Mem(_, c) => c.names(out),
            Formula::Later(a) => a.chain_names(out),
            Formula::And(a, b) | Formula::Impl(a, b) => {
                a.chain_names(out);
                b.chain_names(out);
            }
            Formula::Forall(_, _, body) | Formula::Exists(_, _, body) => body.chain_names(out),
        }
    }

    /// Capture-avoiding substitution of `by` for the variable `var`.
    pub fn subst(&self, var: &str, by: &ElemTerm) -> Formula {
        let mut avoid = BTreeSet::new();
        by.syms(&mut avoid);
        self.subst_avoiding(var, by, &avoid)
    }

    fn subst_avoiding(&self, var: &str, by: &ElemTerm, avoid: &BTreeSet<String>) -> Formula {
        match self {
            Formula::Top => Formula::Top,
            Formula::Atom(fact) => Formula::Atom(fact.map_terms(&mut |t| t.subst(var, by))),
            Formula::Mem(e, c) => Formula::Mem(e.subst(var, by), c.clone()),
            Formula::Later(a) => Formula::later(a.subst_avoiding(var, by, avoid)),
            Formula::And(a, b) => Formula::and(a.subst_avoiding(var, by, avoid), b.subst_avoiding(var, by, avoid)),
            Formula::Impl(a, b) => {
                Formula::implies(a.subst_avoiding(var, by, avoid), b.subst_avoiding(var, by, avoid))
            }
            Formula::Forall(x, s, body) | Formula::Exists(x, s, body) => {
                let rebuild = |x: &str, body: Formula| match self {
                    Formula::Forall(..) => Formula::forall(x, s, body),
                    _ => Formula::exists(x, s, body),
                };
                if x == var {
                    return self.clone();
                }
                if avoid.contains(x) {
                    let mut used = avoid.clone();
                    body.free_syms(&mut used);
                    body.bound_vars(&mut used);
                    used.insert(var.to_string());
                    let fresh = fresh_name(x, &used);
                    let renamed = body.subst(x, &ElemTerm::Sym(fresh.clone()));
                    return rebuild(&fresh, renamed.subst_avoiding(var, by, avoid));
                }
                rebuild(x, body.subst_avoiding(var, by, avoid))
            }
        }
    }

    /// Equality up to renaming of bound variables.
    pub fn alpha_eq(&self, other: &Formula) -> bool {
        alpha(self, other, &mut Vec::new())
    }

    /// Whether the formula mentions no chain, so that it denotes a constant chain.
    pub fn is_static(&self) -> bool {
        match self {
            Formula::Top | Formula::Atom(_) => true,
            Formula::Mem(..) | Formula::Later(_) => false,
            Formula::And(a, b) | Formula::Impl(a, b) => a.is_static() && b.is_static(),
            Formula::Forall(_, _, body) | Formula::Exists(_, _, body) => body.is_static(),
        }
    }

    /// Rewrites the first subformula (pre-order) on which `f` fires.
    pub fn rewrite_first(&self, f: &mut dyn FnMut(&Formula) -> Option<Formula>) -> Option<Formula> {
        if let Some(r) = f(self) {
            return Some(r);
        }
        match self {
            Formula::Top | Formula::Atom(_) | Formula::Mem(..) => None,
            Formula::Later(a) => a.rewrite_first(f).map(Formula::later),
            Formula::And(a, b) => match a.rewrite_first(f) {
                Some(r) => Some(Formula::and(r, (**b).clone())),
                None => b.rewrite_first(f).map(|r| Formula::and((**a).clone(), r)),
            },
            Formula::Impl(a, b) => match a.rewrite_first(f) {
                Some(r) => Some(Formula::implies(r, (**b).clone())),
                None => b.rewrite_first(f).map(|r| Formula::implies((**a).clone(), r)),
            },
            Formula::Forall(x, s, body) => body.rewrite_first(f).map(|r| Formula::forall(x, s, r)),
            Formula::Exists(x, s, body) => body.rewrite_first(f).map(|r| Formula::exists(x, s, r)),
        }
    }

    /// Rewrites the first element term (pre-order, left to right) on which `f` fires.
    pub fn rewrite_first_term(&self, f: &mut dyn FnMut(&ElemTerm) -> Option<ElemTerm>) -> Option<Formula> {
        self.rewrite_first(&mut |g| match g {
            Formula::Mem(e, c) => e.rewrite_first(f).map(|e| Formula::Mem(e, c.clone())),
            Formula::Atom(fact) => {
                let mut done = false;
                let fact = fact.map_terms(&mut |t| {
                    if done {
                        return t.clone();
                    }
                    match t.rewrite_first(f) {
                        Some(r) => {
                            done = true;
                            r
                        }
                        None => t.clone(),
                    }
                });
                done.then_some(Formula::Atom(fact))
            }
            _ => None,
        })
    }
}

fn alpha(a: &Formula, b: &Formula, binders: &mut Vec<(String, String)>) -> bool {
    let term_eq = |x: &ElemTerm, y: &ElemTerm, binders: &[(String, String)]| {
        let mut xs = x.clone();
        let mut ys = y.clone();
        for (i, (l, r)) in binders.iter().enumerate().rev() {
            let marker = ElemTerm::Sym(format!("#{i}"));
            xs = xs.subst(l, &marker);
            ys = ys.subst(r, &marker);
        }
        xs == ys
    };
    match (a, b) {
        (Formula::Top, Formula::Top) => true,
        (Formula::Atom(x), Formula::Atom(y)) => {
            let (mut tx, mut ty) = (Vec::new(), Vec::new());
            x.terms(&mut tx);
            y.terms(&mut ty);
            let shape = |f: &Fact| f.map_terms(&mut |_| ElemTerm::Num(Rational::from_integer(0.into())));
            shape(x) == shape(y) && tx.len() == ty.len() && tx.iter().zip(&ty).all(|(p, q)| term_eq(p, q, binders))
        }
        (Formula::Mem(e1, c1), Formula::Mem(e2, c2)) => c1 == c2 && term_eq(e1, e2, binders),
        (Formula::Later(x), Formula::Later(y)) => alpha(x, y, binders),
        (Formula::And(a1, b1), Formula::And(a2, b2)) | (Formula::Impl(a1, b1), Formula::Impl(a2, b2)) => {
            alpha(a1, a2, binders) && alpha(b1, b2, binders)
        }
        (Formula::Forall(x1, s1, f1), Formula::Forall(x2, s2, f2))
        | (Formula::Exists(x1, s1, f1), Formula::Exists(x2, s2, f2)) => {
            if s1 != s2 {
                return false;
            }
            binders.push((x1.clone(), x2.clone()));
            let ok = alpha(f1, f2, binders);
            binders.pop();
            ok
        }
        _ => false,
    }
}

pub fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    (1..).map(|i| format!("{base}{i}")).find(|n| !used.contains(n)).expect("unbounded supply")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Top => f.write_str("top"),
            Formula::Atom(fact @ (Fact::And(_) | Fact::Bool(_))) => write!(f, "(fact {fact})"),
            Formula::Atom(fact) => write!(f, "{fact}"),
            Formula::Mem(e, c) => write!(f, "(in {e} {c})"),
            Formula::Later(a) => write!(f, "(later {a})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Impl(a, b) => write!(f, "(impl {a} {b})"),
            Formula::Forall(x, s, body) => write!(f, "(forall ({x} {s}) {body})"),
            Formula::Exists(x, s, body) => write!(f, "(exists ({x} {s}) {body})"),
        }
    }
}

/// `x₁:S₁, …; h₁: φ₁, … ⊢ ψ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequent {
    /// Variables and their finite sorts, outermost first.
    pub env: Vec<(String, String)>,
    pub hyps: Vec<(String, Formula)>,
    pub goal: Formula,
}

impl Sequent {
    pub fn goal(goal: Formula) -> Sequent {
        Sequent { env: Vec::new(), hyps: Vec::new(), goal }
    }

    pub fn with_goal(&self, goal: Formula) -> Sequent {
        Sequent { env: self.env.clone(), hyps: self.hyps.clone(), goal }
    }

    pub fn hyp(&self, name: &str) -> Option<&Formula> {
        self.hyps.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn var_sort(&self, name: &str) -> Option<&str> {
        self.env.iter().rev().find(|(n, _)| n == name).map(|(_, s)| s.as_str())
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.env.is_empty() {
            let vars: Vec<String> = self.env.iter().map(|(x, s)| format!("{x}:{s}")).collect();
            write!(f, "{}; ", vars.join(", "))?;
        }
        let hyps: Vec<String> = self.hyps.iter().map(|(n, h)| format!("{n}: {h}")).collect();
        if !hyps.is_empty() {
            write!(f, "{} ", hyps.join(", "))?;
        }
        write!(f, "|- {}", self.goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem(x: &str) -> Formula {
        Formula::mem(ElemTerm::sym(x), ChainExpr::named("P"))
    }

    #[test]
    fn substitution_avoids_capture() {
        let f = Formula::forall("y", "S", Formula::and(mem("x"), mem("y")));
        let g = f.subst("x", &ElemTerm::sym("y"));
        let Formula::Forall(bound, _, body) = &g else { panic!() };
        assert_ne!(bound, "y");
        assert_eq!(**body, Formula::and(mem("y"), mem(bound)));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Formula::forall("x", "S", mem("x"));
        let b = Formula::forall("z", "S", mem("z"));
        let c = Formula::forall("z", "T", mem("z"));
        assert!(a.alpha_eq(&b));
        assert!(!a.alpha_eq(&c));
        assert!(!a.alpha_eq(&Formula::forall("z", "S", mem("x"))));
    }

    #[test]
    fn rewrite_first_is_preorder() {
        let f = Formula::and(mem("a"), mem("b"));
        let g = f.rewrite_first_term(&mut |t| (t == &ElemTerm::sym("b")).then(|| ElemTerm::sym("c"))).unwrap();
        assert_eq!(g, Formula::and(mem("a"), mem("c")));
    }

    #[test]
    fn conj_nests_to_the_right() {
        assert_eq!(Formula::conj(vec![]), Formula::Top);
        let f = Formula::conj(vec![mem("a"), mem("b"), mem("c")]);
        assert_eq!(f, Formula::and(mem("a"), Formula::and(mem("b"), mem("c"))));
    }
}
