//! Descending chains of predicates indexed by the natural numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::elem::Elem;
use crate::fibre::{self, BaseMap, Carrier, Degree, Fibre, Predicate};
use crate::error::{Error, Result};

/// Default bound for [`chain_limit`].
pub const DEFAULT_LIMIT_BOUND: usize = 4096;

pub type StepFn = Arc<dyn Fn(&Predicate) -> Result<Predicate> + Send + Sync>;
pub type IndexFn = Arc<dyn Fn(usize) -> Result<Predicate> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantifier {
    Prod,
    Coprod,
}

#[derive(Clone)]
enum ChainKind {
    Constant(Predicate),
    /// Beyond its length the last entry repeats.
    Explicit(Vec<Predicate>),
    Later(Chain),
    Product(Chain, Chain),
    Exponential(Chain, Chain),
    Quantified(BaseMap, Chain, Quantifier),
    Reindexed(BaseMap, Chain),
    /// `at(0) = ⊤`, `at(n+1) = step(at(n))`.
    Iterate(StepFn),
    /// Index-wise image under a predicate map.
    Pointwise(Chain, StepFn),
    Generated(IndexFn),
}

struct ChainNode {
    carrier: Carrier,
    fibre: Fibre,
    kind: ChainKind,
    memo: Mutex<BTreeMap<usize, Predicate>>,
    declared_depth: usize,
    label: String,
}

/// A descending chain, evaluated lazily and memoised by index.
#[derive(Clone)]
pub struct Chain(Arc<ChainNode>);

impl Chain {
    fn build(carrier: &Carrier, fibre: Fibre, kind: ChainKind, label: String) -> Chain {
        Chain(Arc::new(ChainNode {
            carrier: carrier.clone(),
            fibre,
            kind,
            memo: Mutex::new(BTreeMap::new()),
            declared_depth: 8,
            label,
        }))
    }

    pub fn constant(p: &Predicate) -> Chain {
        Chain::build(p.carrier(), p.fibre(), ChainKind::Constant(p.clone()), format!("K({p})"))
    }

    pub fn top(carrier: &Carrier, fibre: Fibre) -> Chain {
        let mut c = Chain::constant(&Predicate::top(carrier, fibre));
        Arc::get_mut(&mut c.0).expect("fresh chain").label = "top".into();
        c
    }

    /// A chain given by its first entries. Antitonicity is not enforced here;
    /// certificates report violations.
    pub fn explicit(entries: Vec<Predicate>) -> Result<Chain> {
        let first = entries.first().ok_or_else(|| Error::Invalid("explicit chain needs an entry".into()))?;
        for p in &entries {
            if p.carrier() != first.carrier() {
                return Err(Error::CarrierMismatch { left: first.carrier().to_string(), right: p.carrier().to_string() });
            }
            if p.fibre() != first.fibre() {
                return Err(Error::FibreMismatch(format!("{} vs {}", first.fibre(), p.fibre())));
            }
        }
        let label = format!("[{}]", entries.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" > "));
        let (carrier, fibre) = (first.carrier().clone(), first.fibre());
        Ok(Chain::build(&carrier, fibre, ChainKind::Explicit(entries), label))
    }

    pub fn generated<F>(carrier: &Carrier, fibre: Fibre, label: &str, f: F) -> Chain
    where
        F: Fn(usize) -> Result<Predicate> + Send + Sync + 'static,
    {
        Chain::build(carrier, fibre, ChainKind::Generated(Arc::new(f)), label.to_string())
    }

    /// The final chain of a monotone step: `⊤, step(⊤), step²(⊤), …`.
    pub fn iterate<F>(carrier: &Carrier, fibre: Fibre, label: &str, step: F) -> Chain
    where
        F: Fn(&Predicate) -> Result<Predicate> + Send + Sync + 'static,
    {
        Chain::build(carrier, fibre, ChainKind::Iterate(Arc::new(step)), label.to_string())
    }

    /// Applies `f` at every index; `f` must preserve the carrier.
    pub fn pointwise<F>(s: &Chain, label: &str, f: F) -> Chain
    where
        F: Fn(&Predicate) -> Result<Predicate> + Send + Sync + 'static,
    {
        Chain::build(&s.0.carrier, s.0.fibre, ChainKind::Pointwise(s.clone(), Arc::new(f)), label.to_string())
    }

    pub fn with_declared_depth(self, depth: usize) -> Chain {
        let node = &self.0;
        Chain(Arc::new(ChainNode {
            carrier: node.carrier.clone(),
            fibre: node.fibre,
            kind: node.kind.clone(),
            memo: Mutex::new(node.memo.lock().expect("memo lock").clone()),
            declared_depth: depth,
            label: node.label.clone(),
        }))
    }

    pub fn with_label(self, label: &str) -> Chain {
        let node = &self.0;
        Chain(Arc::new(ChainNode {
            carrier: node.carrier.clone(),
            fibre: node.fibre,
            kind: node.kind.clone(),
            memo: Mutex::new(node.memo.lock().expect("memo lock").clone()),
            declared_depth: node.declared_depth,
            label: label.to_string(),
        }))
    }

    pub fn carrier(&self) -> &Carrier {
        &self.0.carrier
    }

    pub fn fibre(&self) -> Fibre {
        self.0.fibre
    }

    pub fn declared_depth(&self) -> usize {
        self.0.declared_depth
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    pub fn same(&self, other: &Chain) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// The predicate at index `n`.
    pub fn at(&self, n: usize) -> Result<Predicate> {
        if let Some(p) = self.0.memo.lock().expect("memo lock").get(&n) {
            return Ok(p.clone());
        }
        if matches!(self.0.kind, ChainKind::Iterate(_) | ChainKind::Exponential(..)) {
            // Fill from the largest memoised index below `n`, iteratively.
            let start = self.0.memo.lock().expect("memo lock").range(..n).next_back().map_or(0, |(k, _)| k + 1);
            for i in start..n {
                self.fill(i)?;
            }
        }
        self.fill(n)
    }

    fn fill(&self, n: usize) -> Result<Predicate> {
        if let Some(p) = self.0.memo.lock().expect("memo lock").get(&n) {
            return Ok(p.clone());
        }
        let p = self.compute(n)?;
        Ok(self.0.memo.lock().expect("memo lock").entry(n).or_insert(p).clone())
    }

    fn compute(&self, n: usize) -> Result<Predicate> {
        let node = &self.0;
        match &node.kind {
            ChainKind::Constant(p) => Ok(p.clone()),
            ChainKind::Explicit(entries) => Ok(entries[n.min(entries.len() - 1)].clone()),
            ChainKind::Later(s) => {
                if n == 0 {
                    Ok(Predicate::top(&node.carrier, node.fibre))
                } else {
                    s.at(n - 1)
                }
            }
            ChainKind::Product(s, t) => fibre::meet(&s.at(n)?, &t.at(n)?),
            ChainKind::Exponential(s, t) => {
                let here = fibre::heyting_impl(&s.at(n)?, &t.at(n)?)?;
                if n == 0 {
                    Ok(here)
                } else {
                    fibre::meet(&self.at(n - 1)?, &here)
                }
            }
            ChainKind::Quantified(f, s, Quantifier::Prod) => fibre::prod_along(f, &s.at(n)?),
            ChainKind::Quantified(f, s, Quantifier::Coprod) => fibre::coprod_along(f, &s.at(n)?),
            ChainKind::Reindexed(f, s) => fibre::reindex(f, &s.at(n)?),
            ChainKind::Iterate(step) => {
                if n == 0 {
                    Ok(Predicate::top(&node.carrier, node.fibre))
                } else {
                    let p = step(&self.at(n - 1)?)?;
                    check_result(&node.carrier, node.fibre, &p)?;
                    Ok(p)
                }
            }
            ChainKind::Pointwise(s, f) => {
                let p = f(&s.at(n)?)?;
                check_result(&node.carrier, node.fibre, &p)?;
                Ok(p)
            }
            ChainKind::Generated(f) => {
                let p = f(n)?;
                check_result(&node.carrier, node.fibre, &p)?;
                Ok(p)
            }
        }
    }
}

fn check_result(carrier: &Carrier, fibre: Fibre, p: &Predicate) -> Result<()> {
    if p.carrier() != carrier {
        return Err(Error::CarrierMismatch { left: carrier.to_string(), right: p.carrier().to_string() });
    }
    if p.fibre() != fibre {
        return Err(Error::FibreMismatch(format!("{fibre} vs {}", p.fibre())));
    }
    Ok(())
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chain({} over {})", self.0.label, self.0.carrier)
    }
}

fn same_base(s: &Chain, t: &Chain) -> Result<()> {
    if s.carrier() != t.carrier() {
        return Err(Error::CarrierMismatch { left: s.carrier().to_string(), right: t.carrier().to_string() });
    }
    if s.fibre() != t.fibre() {
        return Err(Error::FibreMismatch(format!("{} vs {}", s.fibre(), t.fibre())));
    }
    Ok(())
}

/// `▷s`: `⊤` at index 0, then `s` shifted by one.
pub fn later(s: &Chain) -> Chain {
    let c = Chain::build(s.carrier(), s.fibre(), ChainKind::Later(s.clone()), format!("later {}", s.label()));
    c.with_declared_depth(s.declared_depth() + 1)
}

/// Index-wise meet.
pub fn product(s: &Chain, t: &Chain) -> Result<Chain> {
    same_base(s, t)?;
    let label = format!("({} and {})", s.label(), t.label());
    Ok(Chain::build(s.carrier(), s.fibre(), ChainKind::Product(s.clone(), t.clone()), label))
}

/// `t^s` with `(t^s)_n = ⋀_{m≤n} (s_m ⇒ t_m)`.
pub fn exponential(s: &Chain, t: &Chain) -> Result<Chain> {
    same_base(s, t)?;
    let label = format!("({} => {})", s.label(), t.label());
    Ok(Chain::build(s.carrier(), s.fibre(), ChainKind::Exponential(s.clone(), t.clone()), label))
}

pub fn reindex_chain(f: &BaseMap, s: &Chain) -> Result<Chain> {
    if f.target() != s.carrier() {
        return Err(Error::CarrierMismatch { left: f.target().to_string(), right: s.carrier().to_string() });
    }
    let label = format!("{}*{}", f.name(), s.label());
    Ok(Chain::build(f.source(), s.fibre(), ChainKind::Reindexed(f.clone(), s.clone()), label))
}

/// Products or coproducts along `f`, applied index-wise.
pub fn quantifier_lift(f: &BaseMap, s: &Chain, which: Quantifier) -> Result<Chain> {
    if f.source() != s.carrier() {
        return Err(Error::CarrierMismatch { left: f.source().to_string(), right: s.carrier().to_string() });
    }
    let label = match which {
        Quantifier::Prod => format!("prod_{} {}", f.name(), s.label()),
        Quantifier::Coprod => format!("coprod_{} {}", f.name(), s.label()),
    };
    Ok(Chain::build(f.target(), s.fibre(), ChainKind::Quantified(f.clone(), s.clone(), which), label))
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub index: usize,
    pub element: Option<Elem>,
    pub note: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "index {}", self.index)?;
        if let Some(e) = &self.element {
            write!(f, ", element {e}")?;
        }
        if !self.note.is_empty() {
            write!(f, ": {}", self.note)?;
        }
        Ok(())
    }
}

/// Evidence that `source ⊑ target` at every index up to `checked_depth`.
#[derive(Clone, Debug)]
pub struct ChainMorphismCert {
    pub source: Chain,
    pub target: Chain,
    pub checked_depth: usize,
    pub ok: bool,
    pub first_failure: Option<Failure>,
    /// Set when the certificate rests on a sampled compatibility check.
    pub sampled: bool,
}

impl ChainMorphismCert {
    fn new(source: &Chain, target: &Chain, depth: usize, failure: Option<Failure>) -> ChainMorphismCert {
        ChainMorphismCert {
            source: source.clone(),
            target: target.clone(),
            checked_depth: depth,
            ok: failure.is_none(),
            first_failure: failure,
            sampled: false,
        }
    }
}

/// First index `n ≤ depth` and element with `s_n ⊄ t_n`.
pub fn first_entailment_failure(s: &Chain, t: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<Option<Failure>> {
    same_base(s, t)?;
    for n in 0..=depth {
        if let Some(x) = fibre::first_violation(&s.at(n)?, &t.at(n)?, probes)? {
            return Ok(Some(Failure { index: n, element: Some(x), note: String::new() }));
        }
    }
    Ok(None)
}

/// Index-wise inclusion `s ⊑ t` up to `depth`.
pub fn entails(s: &Chain, t: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<ChainMorphismCert> {
    let failure = first_entailment_failure(s, t, depth, probes)?;
    Ok(ChainMorphismCert::new(s, t, depth, failure))
}

/// Index-wise equality up to `depth`.
pub fn chains_equal(s: &Chain, t: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<Option<Failure>> {
    same_base(s, t)?;
    for n in 0..=depth {
        if let Some(x) = fibre::first_difference(&s.at(n)?, &t.at(n)?, probes)? {
            return Ok(Some(Failure { index: n, element: Some(x), note: "chains differ".into() }));
        }
    }
    Ok(None)
}

/// First `n ≤ depth` with `s_n ⊄ s_{n-1}`.
pub fn antitone_violation(s: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<Option<Failure>> {
    for n in 1..=depth {
        if let Some(x) = fibre::first_violation(&s.at(n)?, &s.at(n - 1)?, probes)? {
            return Ok(Some(Failure { index: n, element: Some(x), note: "chain is not descending".into() }));
        }
    }
    Ok(None)
}

/// `next : s ⊑ ▷s`. Component `n+1` is the restriction `s_{n+1} ≤ s_n`, so a
/// failure pinpoints a non-descending input.
pub fn next(s: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<ChainMorphismCert> {
    entails(s, &later(s), depth, probes)
}

/// Checks `▷(s × t) = ▷s × ▷t` index-wise.
pub fn later_preserves_products_check(s: &Chain, t: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<bool> {
    let lhs = later(&product(s, t)?);
    let rhs = product(&later(s), &later(t))?;
    Ok(chains_equal(&lhs, &rhs, depth, probes)?.is_none())
}

/// `▷(t^s) ⊑ (▷t)^(▷s)`.
pub fn later_impl_distr(s: &Chain, t: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<ChainMorphismCert> {
    let lhs = later(&exponential(s, t)?);
    let rhs = exponential(&later(s), &later(t))?;
    entails(&lhs, &rhs, depth, probes)
}

/// The Löb map `s^{▷s} ⊑ s`, built index by index.
///
/// Writing `E = s^{▷s}`: at 0, `E_0 = ⊤ ⇒ s_0 = s_0`. At `n+1`, restriction
/// gives `E_{n+1} ≤ E_n`, the previous component gives `E_n ≤ s_n =
/// (▷s)_{n+1}`, pairing gives `E_{n+1} ≤ E_{n+1} ∧ (▷s)_{n+1}` and evaluation
/// gives `E_{n+1} ∧ (▷s)_{n+1} ≤ s_{n+1}`. Every step is checked.
pub fn loeb(s: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<ChainMorphismCert> {
    let ls = later(s);
    let e = exponential(&ls, s)?;
    if let Some(f) = antitone_violation(s, depth, probes)? {
        return Ok(ChainMorphismCert::new(&e, s, depth, Some(f)));
    }
    let fail = |n: usize, x: Elem, note: &str| Some(Failure { index: n, element: Some(x), note: note.into() });
    if let Some(x) = fibre::first_violation(&e.at(0)?, &s.at(0)?, probes)? {
        return Ok(ChainMorphismCert::new(&e, s, depth, fail(0, x, "lob_0")));
    }
    for n in 0..depth {
        let (e_next, e_n) = (e.at(n + 1)?, e.at(n)?);
        if let Some(x) = fibre::first_violation(&e_next, &e_n, probes)? {
            return Ok(ChainMorphismCert::new(&e, s, depth, fail(n + 1, x, "restriction")));
        }
        // E_n ≤ s_n holds by the previous step; compose with restriction.
        let prev = fibre::meet(&e_next, &ls.at(n + 1)?)?;
        if let Some(x) = fibre::first_violation(&e_next, &prev, probes)? {
            return Ok(ChainMorphismCert::new(&e, s, depth, fail(n + 1, x, "pairing")));
        }
        if let Some(x) = fibre::first_violation(&prev, &s.at(n + 1)?, probes)? {
            return Ok(ChainMorphismCert::new(&e, s, depth, fail(n + 1, x, "evaluation")));
        }
    }
    Ok(ChainMorphismCert::new(&e, s, depth, None))
}

/// The Löb rule at the chain level: if `⊤ ⊑ s^{▷s}` up to `depth` then
/// `⊤ ⊑ s` up to `depth`. Returns false only on a counterexample.
pub fn loeb_rule(s: &Chain, depth: usize, probes: Option<&[Elem]>) -> Result<bool> {
    let top = Chain::top(s.carrier(), s.fibre());
    let ls = later(s);
    let e = exponential(&ls, s)?;
    if first_entailment_failure(&top, &e, depth, probes)?.is_some() {
        return Ok(true);
    }
    // Induction on the index: ⊤ ≤ (▷s)_n from the previous step, then
    // evaluation against ⊤ ≤ ((▷s)_n ⇒ s_n).
    for n in 0..=depth {
        let guard = ls.at(n)?;
        let step = fibre::meet(&guard, &fibre::heyting_impl(&guard, &s.at(n)?)?)?;
        if !fibre::leq(&top.at(n)?, &step, probes)? || !fibre::leq(&step, &s.at(n)?, probes)? {
            return Ok(false);
        }
    }
    Ok(first_entailment_failure(&top, s, depth, probes)?.is_none())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantifierDistrReport {
    /// `▷∘∏_f = ∏_f∘▷` index-wise.
    pub products_commute: bool,
    /// `∐_f∘▷ ⊑ ▷∘∐_f`.
    pub coproduct_iota: bool,
    /// `ι ∘ ι^g = id` when a section is declared.
    pub section: Option<bool>,
    pub failure: Option<Failure>,
}

/// Distribution of `▷` over quantifiers along `f`.
pub fn later_quantifier_distr(
    f: &BaseMap,
    s: &Chain,
    depth: usize,
    probes: Option<&[Elem]>,
) -> Result<QuantifierDistrReport> {
    let later_prod = later(&quantifier_lift(f, s, Quantifier::Prod)?);
    let prod_later = quantifier_lift(f, &later(s), Quantifier::Prod)?;
    let prod_fail = chains_equal(&later_prod, &prod_later, depth, probes)?;

    let coprod_later = quantifier_lift(f, &later(s), Quantifier::Coprod)?;
    let later_coprod = later(&quantifier_lift(f, s, Quantifier::Coprod)?);
    let iota_fail = first_entailment_failure(&coprod_later, &later_coprod, depth, probes)?;

    let mut section = None;
    let mut section_fail = None;
    if f.has_section() {
        // ι^g at index 0 sends y to the unit at g(y) in ⊤_X; above 0 both
        // sides are ∐_f s_n and ι^g is the identity.
        let mut ok = true;
        let top0 = coprod_later.at(0)?;
        for y in Predicate::domain(f.target(), probes)?.iter() {
            let gy = f.apply_section(y)?.expect("section declared");
            let unit = later(s).at(0)?.degree(&gy)?;
            if f.apply(&gy)? != *y || !unit.le(&top0.degree(y)?) || !Degree::top(s.fibre()).le(&unit) {
                ok = false;
                section_fail = Some(Failure { index: 0, element: Some(y.clone()), note: "section at index 0".into() });
                break;
            }
        }
        if ok {
            if let Some(fail) = chains_equal(&later_coprod, &coprod_later, depth, probes)? {
                ok = false;
                section_fail = Some(fail);
            }
        }
        section = Some(ok);
    }
    Ok(QuantifierDistrReport {
        products_commute: prod_fail.is_none(),
        coproduct_iota: iota_fail.is_none(),
        section,
        failure: prod_fail.or(iota_fail).or(section_fail),
    })
}

/// Iterates until `at(n) = at(n+1)` for `window` consecutive indices and
/// returns the stable predicate.
pub fn chain_limit(s: &Chain, window: usize, bound: usize) -> Result<Predicate> {
    if !s.carrier().is_enumerable() {
        return Err(Error::NotEnumerable(s.carrier().to_string()));
    }
    let window = window.max(1);
    let mut run = 0;
    for n in 0..bound {
        if fibre::equal(&s.at(n)?, &s.at(n + 1)?, None)? {
            run += 1;
            if run >= window {
                return s.at(n + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    Err(Error::NotStabilized(bound))
}

/// The index at which [`chain_limit`] stabilised.
pub fn stabilization_index(s: &Chain, bound: usize) -> Result<usize> {
    for n in 0..bound {
        if fibre::equal(&s.at(n)?, &s.at(n + 1)?, None)? {
            return Ok(n);
        }
    }
    Err(Error::NotStabilized(bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::int;

    fn x12() -> Carrier {
        Carrier::finite([1, 2].map(|i| Elem::Num(int(i))))
    }

    fn set(c: &Carrier, xs: &[i64]) -> Predicate {
        Predicate::subset(c, xs.iter().map(|&i| Elem::Num(int(i)))).unwrap()
    }

    fn chain(c: &Carrier, entries: &[&[i64]]) -> Chain {
        Chain::explicit(entries.iter().map(|e| set(c, e)).collect()).unwrap()
    }

    #[test]
    fn later_clauses() {
        let c = x12();
        let s = chain(&c, &[&[1, 2], &[1], &[]]);
        let l = later(&s);
        assert!(fibre::equal(&l.at(0).unwrap(), &Predicate::top(&c, Fibre::Pred), None).unwrap());
        for n in 0..4 {
            assert!(fibre::equal(&l.at(n + 1).unwrap(), &s.at(n).unwrap(), None).unwrap());
        }
        let top = Chain::top(&c, Fibre::Pred);
        assert!(chains_equal(&later(&top), &top, 5, None).unwrap().is_none());
    }

    #[test]
    fn next_detects_non_descending() {
        let c = x12();
        assert!(next(&chain(&c, &[&[1, 2], &[1]]), 4, None).unwrap().ok);
        let bad = chain(&c, &[&[], &[1, 2]]);
        let cert = next(&bad, 4, None).unwrap();
        assert!(!cert.ok);
        assert_eq!(cert.first_failure.unwrap().index, 1);
        assert!(!loeb(&bad, 4, None).unwrap().ok);
    }

    #[test]
    fn exponential_example() {
        let c = x12();
        let s = chain(&c, &[&[1, 2], &[1]]);
        let t = chain(&c, &[&[1, 2], &[2]]);
        let e = exponential(&s, &t).unwrap();
        assert!(fibre::equal(&e.at(1).unwrap(), &set(&c, &[2]), None).unwrap());
        assert!(fibre::equal(&e.at(0).unwrap(), &fibre::heyting_impl(&s.at(0).unwrap(), &t.at(0).unwrap()).unwrap(), None).unwrap());
        let top = Chain::top(&c, Fibre::Pred);
        assert!(chains_equal(&exponential(&s, &top).unwrap(), &top, 4, None).unwrap().is_none());
    }

    #[test]
    fn limits() {
        let c = Carrier::finite((0..5).map(|i| Elem::Num(int(i))));
        let k = 5usize;
        let s = Chain::generated(&c, Fibre::Pred, "shrink", move |n| {
            Predicate::subset(&Carrier::finite((0..5).map(|i| Elem::Num(int(i)))), (0..k.saturating_sub(n) as i64).map(|i| Elem::Num(int(i))))
        });
        let lim = chain_limit(&s, 1, 64).unwrap();
        assert!(lim.members().unwrap().is_empty());
        assert!(stabilization_index(&s, 64).unwrap() <= k);
        let flip = Chain::generated(&c, Fibre::Pred, "flip", move |n| {
            let c = Carrier::finite((0..5).map(|i| Elem::Num(int(i))));
            Ok(if n % 2 == 0 { Predicate::top(&c, Fibre::Pred) } else { Predicate::bottom(&c, Fibre::Pred) })
        });
        assert_eq!(chain_limit(&flip, 1, 10).unwrap_err(), Error::NotStabilized(10));
        let k = Chain::constant(&set(&x12(), &[1]));
        assert!(fibre::equal(&chain_limit(&k, 3, 10).unwrap(), &set(&x12(), &[1]), None).unwrap());
    }

    #[test]
    fn quantifier_distribution() {
        let ab = Carrier::atoms(&["a", "b"]);
        let c = Carrier::atoms(&["c"]);
        let f = BaseMap::new("!", &ab, &c, |_| Ok(Elem::atom("c"))).with_section(|_| Ok(Elem::atom("a"))).unwrap();
        let s = Chain::explicit(vec![
            Predicate::top(&ab, Fibre::Pred),
            Predicate::subset(&ab, [Elem::atom("a")]).unwrap(),
            Predicate::bottom(&ab, Fibre::Pred),
        ])
        .unwrap();
        let r = later_quantifier_distr(&f, &s, 4, None).unwrap();
        assert!(r.products_commute && r.coproduct_iota);
        assert_eq!(r.section, Some(true));
    }
}
