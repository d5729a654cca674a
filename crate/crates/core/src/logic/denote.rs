//! Denotations: formulas as chains over the carrier of variable assignments.

use std::collections::{BTreeMap, BTreeSet};

use super::formula::{ChainExpr, ElemTerm, Fact, Formula, NumExpr, Sequent};
use crate::chain::{self, Chain, Quantifier};
use crate::elem::{Elem, Rational};
use crate::error::invalid;
use crate::fibre::{BaseMap, Carrier, Degree, Fibre, Predicate};
use crate::sde::Term;
use crate::syntax::system::System;
use crate::transformer::{map_transformer, CoalgebraKind};
use crate::Result;

/// The carrier of assignments to `env`: tuples, one component per variable.
pub fn context_carrier(sys: &System, env: &[(String, String)]) -> Result<Carrier> {
    let parts = env
        .iter()
        .map(|(x, s)| sys.sort(s).cloned().ok_or_else(|| invalid(format!("variable {x}: unknown finite sort {s}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Carrier::product(parts))
}

fn lookup<'a>(env: &[(String, String)], row: &'a [Elem], name: &str) -> Option<&'a Elem> {
    env.iter().rposition(|(x, _)| x == name).map(|i| &row[i])
}

/// `⟦e⟧ρ`. Stream elements are kept in normal form.
pub fn eval_elem(sys: &System, env: &[(String, String)], row: &[Elem], e: &ElemTerm) -> Result<Elem> {
    Ok(match e {
        ElemTerm::Sym(s) => match lookup(env, row, s) {
            Some(v) => v.clone(),
            None if sys.is_stream(s) => Elem::stream(Term::name(s)),
            None => Elem::atom(s),
        },
        ElemTerm::Num(r) => Elem::Num(r.clone()),
        ElemTerm::Lit(r) => Elem::stream(Term::Lit(r.clone())),
        ElemTerm::Tail(inner) => {
            let v = eval_elem(sys, env, row, inner)?;
            observe(sys, &v)?.1
        }
        ElemTerm::Op(op, args) => {
            if !sys.sde().is_declared(*op) {
                return Err(crate::Error::UndeclaredOp(op.name().to_string()));
            }
            let terms = args
                .iter()
                .map(|a| match eval_elem(sys, env, row, a)? {
                    Elem::Stream(t) => Ok((*t).clone()),
                    Elem::Num(r) => Ok(Term::Lit(r)),
                    other => Err(invalid(format!("{other} is not a stream"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Elem::stream(Term::op(*op, terms))
        }
        ElemTerm::Pair(a, b) => Elem::pair(eval_elem(sys, env, row, a)?, eval_elem(sys, env, row, b)?),
    })
}

/// Output and successor of an element: a stream's head and tail, or an
/// automaton state's label and next state. States must belong to exactly one
/// automaton of the system.
pub fn observe(sys: &System, x: &Elem) -> Result<(Rational, Elem)> {
    if let Some(t) = x.as_term() {
        return Ok((sys.sde().elem(t, 0)?, Elem::stream(sys.sde().tail_of(t)?)));
    }
    let owners: Vec<_> = sys
        .coalgebras()
        .values()
        .filter(|c| matches!(c.kind(), CoalgebraKind::Table(_)) && c.functor().is_stream_shaped())
        .filter(|c| c.carrier().contains(x))
        .collect();
    let [c] = owners.as_slice() else {
        return Err(invalid(format!("{x} is not a state of exactly one automaton")));
    };
    let v = c.step(x)?;
    let (out, next) = v.as_pair().ok_or_else(|| invalid(format!("{x} has no output")))?;
    let out = out.as_num().ok_or_else(|| invalid(format!("output of {x} is not numeric")))?;
    Ok((out.clone(), next.clone()))
}

pub fn eval_num(sys: &System, env: &[(String, String)], row: &[Elem], n: &NumExpr) -> Result<Rational> {
    let ev = |m: &NumExpr| eval_num(sys, env, row, m);
    Ok(match n {
        NumExpr::Lit(r) => r.clone(),
        NumExpr::Head(e) => observe(sys, &eval_elem(sys, env, row, e)?)?.0,
        NumExpr::Nth(e, k) => {
            let mut x = eval_elem(sys, env, row, e)?;
            if let Some(t) = x.as_term() {
                return sys.sde().elem(t, *k);
            }
            for _ in 0..*k {
                x = observe(sys, &x)?.1;
            }
            observe(sys, &x)?.0
        }
        NumExpr::Add(a, b) => ev(a)? + ev(b)?,
        NumExpr::Sub(a, b) => ev(a)? - ev(b)?,
        NumExpr::Mul(a, b) => ev(a)? * ev(b)?,
        NumExpr::Neg(a) => -ev(a)?,
        NumExpr::Min(a, b) => ev(a)?.min(ev(b)?),
        NumExpr::Max(a, b) => ev(a)?.max(ev(b)?),
    })
}

pub fn eval_fact(sys: &System, env: &[(String, String)], row: &[Elem], f: &Fact) -> Result<bool> {
    Ok(match f {
        Fact::Bool(b) => *b,
        Fact::Cmp(op, a, b) => op.eval(&eval_num(sys, env, row, a)?, &eval_num(sys, env, row, b)?),
        Fact::Eq(a, b) => eval_elem(sys, env, row, a)? == eval_elem(sys, env, row, b)?,
        Fact::Not(a) => !eval_fact(sys, env, row, a)?,
        Fact::And(v) => {
            for x in v {
                if !eval_fact(sys, env, row, x)? {
                    return Ok(false);
                }
            }
            true
        }
        Fact::Or(v) => {
            for x in v {
                if eval_fact(sys, env, row, x)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// The chain named by a chain expression.
pub fn denote_chain(sys: &System, ce: &ChainExpr) -> Result<Chain> {
    match ce {
        ChainExpr::Named(n) => sys.chain(n).ok_or_else(|| invalid(format!("unknown chain {n}"))),
        ChainExpr::Later(c) => Ok(chain::later(&denote_chain(sys, c)?)),
        ChainExpr::Phi(n, c) => {
            let phi = sys.transformer(n).ok_or_else(|| invalid(format!("{n} is not the final chain of a transformer")))?;
            let inner = denote_chain(sys, c)?;
            if inner.carrier() != phi.carrier() {
                return Err(crate::Error::CarrierMismatch {
                    left: phi.carrier().to_string(),
                    right: inner.carrier().to_string(),
                });
            }
            Ok(map_transformer(phi, &inner))
        }
        ChainExpr::Tech(n, c) => {
            let t = sys.technique(n).ok_or_else(|| invalid(format!("unknown technique {n}")))?.technique.clone();
            let inner = denote_chain(sys, c)?;
            Ok(Chain::pointwise(&inner, &format!("{n}^ {}", inner.label()), move |p| t.apply_diag(p)))
        }
    }
}

/// The common fibre of the chains a sequent mentions (`Pred` if none).
pub fn sequent_fibre(sys: &System, seq: &Sequent) -> Result<Fibre> {
    let mut names = BTreeSet::new();
    seq.goal.chain_names(&mut names);
    for (_, h) in &seq.hyps {
        h.chain_names(&mut names);
    }
    let mut fibre = None;
    for n in names {
        let f = sys.chain(&n).ok_or_else(|| invalid(format!("unknown chain {n}")))?.fibre();
        match fibre {
            None => fibre = Some(f),
            Some(g) if g != f => return Err(crate::Error::FibreMismatch(format!("sequent mixes {g} and {f}"))),
            Some(_) => {}
        }
    }
    Ok(fibre.unwrap_or(Fibre::Pred))
}

fn rows(carrier: &Carrier) -> Result<Vec<Elem>> {
    Ok(carrier.elements()?.to_vec())
}

/// `⟦f⟧` as a chain over the assignments to `env`.
pub fn denote(sys: &System, env: &[(String, String)], f: &Formula, fibre: Fibre) -> Result<Chain> {
    let gamma = context_carrier(sys, env)?;
    match f {
        Formula::Top => Ok(Chain::top(&gamma, fibre)),
        Formula::Atom(fact) => {
            let mut table = BTreeMap::new();
            for row in rows(&gamma)? {
                let holds = eval_fact(sys, env, row.as_tuple().unwrap_or_default(), fact)?;
                table.insert(row, if holds { Degree::top(fibre) } else { Degree::bottom(fibre) });
            }
            let p = Predicate::tabulate(&gamma, fibre, move |x| {
                table.get(x).cloned().ok_or_else(|| invalid(format!("{x} is not an assignment")))
            })?;
            Ok(Chain::constant(&p))
        }
        Formula::Mem(e, ce) => {
            let target = denote_chain(sys, ce)?;
            let mut table = Vec::new();
            for row in rows(&gamma)? {
                let v = eval_elem(sys, env, row.as_tuple().unwrap_or_default(), e)?;
                table.push((row, v));
            }
            let map = BaseMap::table(&e.to_string(), &gamma, target.carrier(), table)?;
            chain::reindex_chain(&map, &target)
        }
        Formula::Later(a) => Ok(chain::later(&denote(sys, env, a, fibre)?)),
        Formula::And(a, b) => chain::product(&denote(sys, env, a, fibre)?, &denote(sys, env, b, fibre)?),
        Formula::Impl(a, b) => chain::exponential(&denote(sys, env, a, fibre)?, &denote(sys, env, b, fibre)?),
        Formula::Forall(x, s, body) | Formula::Exists(x, s, body) => {
            if sys.sort(s).is_none() {
                return Err(invalid(format!("quantifier over {s}: only finite sorts can be quantified")));
            }
            let mut inner_env = env.to_vec();
            inner_env.push((x.clone(), s.clone()));
            let inner = denote(sys, &inner_env, body, fibre)?;
            let n = env.len();
            let proj = BaseMap::new(&format!("pi_{x}"), inner.carrier(), &gamma, move |row| {
                let items = row.as_tuple().ok_or_else(|| invalid(format!("{row} is not an assignment")))?;
                Ok(Elem::tuple(items[..n].iter().cloned()))
            });
            let which = if matches!(f, Formula::Forall(..)) { Quantifier::Prod } else { Quantifier::Coprod };
            chain::quantifier_lift(&proj, &inner, which)
        }
    }
}

/// Renders an assignment for reports.
pub fn show_assignment(env: &[(String, String)], row: &Elem) -> String {
    match row.as_tuple() {
        Some(items) if !env.is_empty() => {
            env.iter().zip(items).map(|((x, _), v)| format!("{x}={v}")).collect::<Vec<_>>().join(", ")
        }
        _ => "<>".to_string(),
    }
}

/// Checks `⋀ hyps ⊑ goal` at every index `≤ depth`; returns the first failing
/// index and assignment.
pub fn semantic_validate(sys: &System, seq: &Sequent, depth: usize) -> Result<Option<(usize, String)>> {
    let fibre = sequent_fibre(sys, seq)?;
    let gamma = context_carrier(sys, &seq.env)?;
    let mut lhs = Chain::top(&gamma, fibre);
    for (_, h) in &seq.hyps {
        lhs = chain::product(&lhs, &denote(sys, &seq.env, h, fibre)?)?;
    }
    let rhs = denote(sys, &seq.env, &seq.goal, fibre)?;
    Ok(chain::first_entailment_failure(&lhs, &rhs, depth, None)?.map(|fail| {
        let witness = fail.element.as_ref().map(|e| show_assignment(&seq.env, e)).unwrap_or_default();
        (fail.index, witness)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::proof::parse_formula;
    use crate::syntax::{parse_sexps, system::parse_system};

    const SYS: &str = "(sde one (head 1) (tail one))\n(sde s (head 1) (tail (oplus one s)))\n\
        (sde t (head 1) (tail u))\n(sde u (head -1) (tail one))\n\
        (lifting gt0 (and (> head 0) rec))\n(coalgebra S stream)\n(chain PHI (transformer gt0 S))";

    fn formula(text: &str) -> Formula {
        parse_formula(&parse_sexps(text).unwrap()[0]).unwrap()
    }

    fn validate(goal: &str, hyps: &[&str], depth: usize) -> Option<(usize, String)> {
        let sys = parse_system(SYS).unwrap();
        let seq = Sequent {
            env: Vec::new(),
            hyps: hyps.iter().enumerate().map(|(i, h)| (format!("h{i}"), formula(h))).collect(),
            goal: formula(goal),
        };
        semantic_validate(&sys, &seq, depth).unwrap()
    }

    #[test]
    fn top_and_later_top() {
        assert_eq!(validate("top", &[], 8), None);
        assert_eq!(validate("(later top)", &[], 8), None);
    }

    #[test]
    fn hypothesis_entails_itself() {
        assert_eq!(validate("(later (in t PHI))", &["(later (in t PHI))"], 8), None);
    }

    #[test]
    fn running_stream_is_positive() {
        assert_eq!(validate("(in s PHI)", &[], 64), None);
    }

    #[test]
    fn negative_second_element_fails_at_two() {
        assert_eq!(validate("(in t PHI)", &[], 8), Some((2, "<>".into())));
    }

    #[test]
    fn membership_matches_the_final_chain() {
        let sys = parse_system(SYS).unwrap();
        let f = formula("(in t PHI)");
        let d = denote(&sys, &[], &f, Fibre::Pred).unwrap();
        let ch = sys.chain("PHI").unwrap();
        let t = Elem::stream(Term::name("t"));
        for n in 0..6 {
            let unit = Elem::tuple([]);
            assert_eq!(d.at(n).unwrap().holds(&unit).unwrap(), ch.at(n).unwrap().holds(&t).unwrap());
        }
    }

    #[test]
    fn facts_on_streams() {
        assert_eq!(validate("(and (= (nth s 5) 6) (> (head (tail u)) 0))", &[], 2), None);
        assert!(validate("(> (head u) 0)", &[], 0).is_some());
    }
}
