//! Rule applications: each rule maps a sequent to its premises.

use std::collections::BTreeSet;

use super::denote::{context_carrier, denote, eval_elem, sequent_fibre};
use super::formula::{ChainExpr, ElemTerm, Fact, Formula, NumExpr, Sequent};
use super::script::Rule;
use crate::error::invalid;
use crate::fibre::Fibre;
use crate::syntax::system::{System, TechniqueForm};
use crate::transformer::{stream_probes, LiftExpr, LiftMode};
use crate::upto::{CompatOptions, CompatStatus};
use crate::Result;

/// Settings shared by all rule applications of one check.
#[derive(Clone, Debug, Default)]
pub struct RuleOptions {
    /// Accept techniques whose compatibility was only sampled.
    pub allow_sampled: bool,
    pub compat: CompatOptions,
}

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(invalid(msg))
}

fn fresh_hyp(seq: &Sequent, name: &str) -> Result<()> {
    if seq.hyp(name).is_some() {
        return fail(format!("hypothesis name {name} is already in use"));
    }
    Ok(())
}

/// Checks that the sequent denotes: chains resolve, terms are well-sorted,
/// and no variable shadows a stream.
pub fn well_formed(sys: &System, seq: &Sequent) -> Result<()> {
    let mut binders: BTreeSet<String> = seq.env.iter().map(|(x, _)| x.clone()).collect();
    seq.goal.bound_vars(&mut binders);
    for (_, h) in &seq.hyps {
        h.bound_vars(&mut binders);
    }
    if let Some(x) = binders.iter().find(|x| sys.is_stream(x)) {
        return fail(format!("variable {x} shadows a stream"));
    }
    let names: BTreeSet<&String> = seq.hyps.iter().map(|(n, _)| n).collect();
    if names.len() != seq.hyps.len() {
        return fail("hypothesis names are not distinct");
    }
    let fibre = sequent_fibre(sys, seq)?;
    denote(sys, &seq.env, &seq.goal, fibre)?;
    for (_, h) in &seq.hyps {
        denote(sys, &seq.env, h, fibre)?;
    }
    Ok(())
}

/// The premises of `rule` applied to `seq`, in script order.
pub fn apply_rule(sys: &System, seq: &Sequent, rule: &Rule, opts: &RuleOptions) -> Result<Vec<Sequent>> {
    let goal = &seq.goal;
    let shape = |expected: &str| fail(format!("{} expects a goal of the form {expected}, got {goal}", rule.name()));
    match rule {
        Rule::Lob(name) => {
            fresh_hyp(seq, name)?;
            let mut next = seq.clone();
            next.hyps.push((name.clone(), Formula::later(goal.clone())));
            Ok(vec![next])
        }
        Rule::Step => {
            let finals = |n: &str| sys.transformer(n).is_some();
            let rewritten = goal.rewrite_first(&mut |f| {
                let Formula::Mem(e, ce) = f else { return None };
                ce.rewrite_first(&mut |c| match c {
                    ChainExpr::Later(inner) => match &**inner {
                        ChainExpr::Phi(n, x) if **x == ChainExpr::Named(n.clone()) && finals(n) => {
                            Some(ChainExpr::Named(n.clone()))
                        }
                        _ => None,
                    },
                    ChainExpr::Named(n) if finals(n) => {
                        Some(ChainExpr::later(ChainExpr::phi(n, ChainExpr::Named(n.clone()))))
                    }
                    _ => None,
                })
                .map(|c| Formula::Mem(e.clone(), c))
            });
            match rewritten {
                Some(g) => Ok(vec![seq.with_goal(g)]),
                None => shape("x in CH or x in (later (phi CH CH)) for a final chain CH"),
            }
        }
        Rule::Next => match goal {
            Formula::Later(a) => Ok(vec![seq.with_goal((**a).clone())]),
            _ => shape("(later A)"),
        },
        Rule::LaterFunctor => {
            let rewritten = goal.rewrite_first(&mut |f| match f {
                Formula::Mem(e, ChainExpr::Later(c)) => Some(Formula::later(Formula::Mem(e.clone(), (**c).clone()))),
                Formula::Later(inner) => match &**inner {
                    Formula::Mem(e, c) => Some(Formula::Mem(e.clone(), ChainExpr::later(c.clone()))),
                    _ => None,
                },
                _ => None,
            });
            match rewritten {
                Some(g) => Ok(vec![seq.with_goal(g)]),
                None => shape("containing (in x (later C)) or (later (in x C))"),
            }
        }
        Rule::LaterAnd => {
            let Formula::Later(inner) = goal else { return shape("(later (and A B))") };
            let parts = match &**inner {
                Formula::And(a, b) => vec![(**a).clone(), (**b).clone()],
                Formula::Mem(e, ChainExpr::Phi(n, c)) => unfold_mem(sys, e, n, c)?,
                _ => return shape("(later (and A B)) or (later (in x (phi CH C)))"),
            };
            if parts.len() < 2 {
                return fail(format!("later-and: {inner} has a single conjunct"));
            }
            let rest = Formula::conj(parts[1..].to_vec());
            Ok(vec![seq.with_goal(Formula::later(parts[0].clone())), seq.with_goal(Formula::later(rest))])
        }
        Rule::LaterImpl => match goal {
            Formula::Impl(a, b) => match (&**a, &**b) {
                (Formula::Later(a), Formula::Later(b)) => {
                    Ok(vec![seq.with_goal(Formula::later(Formula::implies((**a).clone(), (**b).clone())))])
                }
                _ => shape("(impl (later A) (later B))"),
            },
            _ => shape("(impl (later A) (later B))"),
        },
        Rule::LaterMono => {
            let Formula::Later(a) = goal else { return shape("(later A)") };
            let hyps = seq
                .hyps
                .iter()
                .filter_map(|(n, h)| match h {
                    Formula::Later(h) => Some((n.clone(), (**h).clone())),
                    _ => None,
                })
                .collect();
            Ok(vec![Sequent { env: seq.env.clone(), hyps, goal: (**a).clone() }])
        }
        Rule::LaterForall => match goal {
            Formula::Later(inner) => match &**inner {
                Formula::Forall(x, s, body) => {
                    Ok(vec![seq.with_goal(Formula::forall(x, s, Formula::later((**body).clone())))])
                }
                _ => shape("(later (forall …)) or (forall … (later A))"),
            },
            Formula::Forall(x, s, body) => match &**body {
                Formula::Later(a) => Ok(vec![seq.with_goal(Formula::later(Formula::forall(x, s, (**a).clone())))]),
                _ => shape("(later (forall …)) or (forall … (later A))"),
            },
            _ => shape("(later (forall …)) or (forall … (later A))"),
        },
        Rule::LaterExists => match goal {
            Formula::Later(inner) => match &**inner {
                Formula::Exists(x, s, body) => {
                    Ok(vec![seq.with_goal(Formula::exists(x, s, Formula::later((**body).clone())))])
                }
                _ => shape("(later (exists …)) or (exists … (later A))"),
            },
            Formula::Exists(x, s, body) => match &**body {
                Formula::Later(a) => {
                    let carrier = sys.sort(s).ok_or_else(|| invalid(format!("unknown sort {s}")))?;
                    if carrier.is_empty() {
                        return fail(format!("later-exists: sort {s} is empty, so the projection has no section"));
                    }
                    Ok(vec![seq.with_goal(Formula::later(Formula::exists(x, s, (**a).clone())))])
                }
                _ => shape("(later (exists …)) or (exists … (later A))"),
            },
            _ => shape("(later (exists …)) or (exists … (later A))"),
        },
        Rule::Upto(name, via) => upto(sys, seq, name, via.as_ref(), opts),
        Rule::Rewrite(name) => {
            let def = sys.sde().get(name).ok_or_else(|| invalid(format!("rewrite: {name} is not a stream")))?;
            let body = ElemTerm::from_stream_term(&def.tail).expect("definitions have no holes");
            let target = ElemTerm::tail(ElemTerm::sym(name));
            match goal.rewrite_first_term(&mut |t| (*t == target).then(|| body.clone())) {
                Some(g) => Ok(vec![seq.with_goal(g)]),
                None => fail(format!("rewrite: the goal has no occurrence of {target}")),
            }
        }
        Rule::Unfold => {
            let mut error = None;
            let rewritten = goal.rewrite_first(&mut |f| match f {
                Formula::Mem(e, ChainExpr::Phi(n, c)) => match unfold_mem(sys, e, n, c) {
                    Ok(parts) => Some(Formula::conj(parts)),
                    Err(err) => {
                        error.get_or_insert(err);
                        None
                    }
                },
                _ => None,
            });
            match (rewritten, error) {
                (Some(g), _) => Ok(vec![seq.with_goal(g)]),
                (None, Some(err)) => Err(err),
                (None, None) => shape("containing (in x (phi CH C))"),
            }
        }
        Rule::Atom => {
            if !goal.is_static() {
                return shape("built from facts only");
            }
            let fibre = sequent_fibre(sys, seq)?;
            let d = denote(sys, &seq.env, goal, fibre)?;
            let p = d.at(0)?;
            for row in context_carrier(sys, &seq.env)?.elements()?.iter() {
                if !p.holds(row)? {
                    let at = super::denote::show_assignment(&seq.env, row);
                    return fail(format!("atom: {goal} is false at {at}"));
                }
            }
            Ok(Vec::new())
        }
        Rule::Axiom(h) => {
            let hyp = seq.hyp(h).ok_or_else(|| invalid(format!("axiom: no hypothesis {h}")))?;
            if hyp.alpha_eq(goal) {
                Ok(Vec::new())
            } else {
                fail(format!("axiom: hypothesis {h} is {hyp}, not the goal {goal}"))
            }
        }
        Rule::AxiomTop => match goal {
            Formula::Top => Ok(Vec::new()),
            _ => shape("top"),
        },
        Rule::AndI => match goal {
            Formula::And(a, b) => Ok(vec![seq.with_goal((**a).clone()), seq.with_goal((**b).clone())]),
            _ => shape("(and A B)"),
        },
        Rule::AndE(h, l, r) => {
            let Some(Formula::And(a, b)) = seq.hyp(h) else {
                return fail(format!("and-e: hypothesis {h} is not a conjunction"));
            };
            if l == r {
                return fail("and-e: the two names must differ");
            }
            let mut next = seq.clone();
            next.hyps.retain(|(n, _)| n != h);
            fresh_hyp(&next, l)?;
            fresh_hyp(&next, r)?;
            next.hyps.push((l.clone(), (**a).clone()));
            next.hyps.push((r.clone(), (**b).clone()));
            Ok(vec![next])
        }
        Rule::ImplI(name) => {
            let Formula::Impl(a, b) = goal else { return shape("(impl A B)") };
            fresh_hyp(seq, name)?;
            let mut next = seq.with_goal((**b).clone());
            next.hyps.push((name.clone(), (**a).clone()));
            Ok(vec![next])
        }
        Rule::ImplE(h) => {
            let Some(Formula::Impl(a, b)) = seq.hyp(h) else {
                return fail(format!("impl-e: hypothesis {h} is not an implication"));
            };
            if !b.alpha_eq(goal) {
                return fail(format!("impl-e: conclusion of {h} is {b}, not the goal {goal}"));
            }
            Ok(vec![seq.with_goal((**a).clone())])
        }
        Rule::ForallI(v) => {
            let Formula::Forall(x, s, body) = goal else { return shape("(forall (x S) A)") };
            let mut used = BTreeSet::new();
            seq.goal.free_syms(&mut used);
            for (_, h) in &seq.hyps {
                h.free_syms(&mut used);
            }
            if seq.var_sort(v).is_some() || used.contains(v) || sys.is_stream(v) {
                return fail(format!("forall-i: {v} is not fresh"));
            }
            let mut next = seq.with_goal(body.subst(x, &ElemTerm::sym(v)));
            next.env.push((v.clone(), s.clone()));
            Ok(vec![next])
        }
        Rule::ForallE(h, t, name) => {
            let Some(Formula::Forall(x, s, body)) = seq.hyp(h) else {
                return fail(format!("forall-e: hypothesis {h} is not universal"));
            };
            check_sort(sys, seq, t, s)?;
            fresh_hyp(seq, name)?;
            let mut next = seq.clone();
            next.hyps.push((name.clone(), body.subst(x, t)));
            Ok(vec![next])
        }
        Rule::ExistsI(t) => {
            let Formula::Exists(x, s, body) = goal else { return shape("(exists (x S) A)") };
            check_sort(sys, seq, t, s)?;
            Ok(vec![seq.with_goal(body.subst(x, t))])
        }
        Rule::Weaken(h) => {
            if seq.hyp(h).is_none() {
                return fail(format!("weaken: no hypothesis {h}"));
            }
            let mut next = seq.clone();
            next.hyps.retain(|(n, _)| n != h);
            Ok(vec![next])
        }
        Rule::Open => Ok(Vec::new()),
    }
}

/// `t` denotes an element of sort `s` under every assignment.
fn check_sort(sys: &System, seq: &Sequent, t: &ElemTerm, s: &str) -> Result<()> {
    let carrier = sys.sort(s).ok_or_else(|| invalid(format!("unknown sort {s}")))?;
    for row in context_carrier(sys, &seq.env)?.elements()?.iter() {
        let v = eval_elem(sys, &seq.env, row.as_tuple().unwrap_or_default(), t)?;
        if !carrier.contains(&v) {
            return fail(format!("{t} = {v} is not in sort {s}"));
        }
    }
    Ok(())
}

/// `x ∈ Φ̂(C)` spelled out through the lifting: one formula per conjunct,
/// with `rec` read as `tail x ∈ C`.
fn unfold_mem(sys: &System, e: &ElemTerm, chain: &str, c: &ChainExpr) -> Result<Vec<Formula>> {
    let phi = sys.transformer(chain).ok_or_else(|| invalid(format!("{chain} is not a final chain")))?;
    let lifting = phi.lifting();
    let body = match (lifting.body(), lifting.mode, lifting.fibre) {
        (Some(b), LiftMode::Predicate, Fibre::Pred) => b,
        _ => return fail(format!("lifting {} cannot be spelled out as a formula", lifting.name)),
    };
    body.conjuncts()
        .into_iter()
        .map(|part| match part {
            LiftExpr::Rec => Ok(Formula::Mem(ElemTerm::tail(e.clone()), c.clone())),
            _ if !part.mentions_rec() => Ok(Formula::Atom(lift_fact(part, e)?)),
            _ => fail(format!("conjunct {part} of {} mixes rec with other tests", lifting.name)),
        })
        .collect()
}

fn lift_fact(x: &LiftExpr, e: &ElemTerm) -> Result<Fact> {
    Ok(match x {
        LiftExpr::Bool(b) => Fact::Bool(*b),
        LiftExpr::Cmp(op, a, b) => Fact::Cmp(*op, lift_num(a, e)?, lift_num(b, e)?),
        LiftExpr::And(v) => Fact::And(v.iter().map(|y| lift_fact(y, e)).collect::<Result<_>>()?),
        LiftExpr::Or(v) => Fact::Or(v.iter().map(|y| lift_fact(y, e)).collect::<Result<_>>()?),
        LiftExpr::Not(a) => Fact::Not(Box::new(lift_fact(a, e)?)),
        _ => return fail(format!("{x} is not a test")),
    })
}

fn lift_num(x: &LiftExpr, e: &ElemTerm) -> Result<NumExpr> {
    let b = |y: &LiftExpr| lift_num(y, e).map(Box::new);
    Ok(match x {
        LiftExpr::Head => NumExpr::Head(e.clone()),
        LiftExpr::Num(r) => NumExpr::Lit(r.clone()),
        LiftExpr::Add(p, q) => NumExpr::Add(b(p)?, b(q)?),
        LiftExpr::Sub(p, q) => NumExpr::Sub(b(p)?, b(q)?),
        LiftExpr::Mul(p, q) => NumExpr::Mul(b(p)?, b(q)?),
        LiftExpr::Min(p, q) => NumExpr::Min(b(p)?, b(q)?),
        LiftExpr::Max(p, q) => NumExpr::Max(b(p)?, b(q)?),
        LiftExpr::Neg(p) => NumExpr::Neg(b(p)?),
        _ => return fail(format!("{x} is not numeric")),
    })
}

fn upto(sys: &System, seq: &Sequent, name: &str, via: Option<&ElemTerm>, opts: &RuleOptions) -> Result<Vec<Sequent>> {
    let def = sys.technique(name).ok_or_else(|| invalid(format!("unknown technique {name}")))?;
    let mut laters = 0;
    let mut inner = &seq.goal;
    while let Formula::Later(a) = inner {
        laters += 1;
        inner = a;
    }
    let Formula::Mem(e, ChainExpr::Named(ch)) = inner else {
        return fail(format!("upto expects a goal (later … (in x CH)), got {}", seq.goal));
    };
    let phi = sys.transformer(ch).ok_or_else(|| invalid(format!("upto: {ch} is not a final chain")))?;
    if let Some(declared) = &def.chain {
        if declared != ch {
            return fail(format!("upto: technique {name} is declared for {declared}, not {ch}"));
        }
    }
    let mut compat = opts.compat.clone();
    if compat.probes.is_none() && !phi.carrier().is_enumerable() {
        compat.probes = Some(stream_probes(sys.sde(), 4)?);
    }
    let cert = sys.compat(name, ch, &compat)?;
    match &cert.status {
        CompatStatus::Sampled { .. } if opts.allow_sampled => {}
        CompatStatus::Sampled { samples } => {
            return fail(format!(
                "upto: compatibility of {name} with {ch} is only sampled ({samples} samples); pass --allow-sampled"
            ))
        }
        CompatStatus::Failed { witness } => {
            return fail(format!("upto: {name} is not compatible with {ch} (witness {witness})"));
        }
        _ => {}
    }
    let premise_elems: Vec<ElemTerm> = match def.form {
        TechniqueForm::Identity => vec![e.clone()],
        TechniqueForm::Context => {
            let ctx = def.technique.context_term().expect("context technique");
            let term = e.to_stream_term().ok_or_else(|| invalid(format!("upto: {e} is not a stream term")))?;
            let norm = sys.sde().normalize(&term)?;
            let arg = ctx
                .match_context(&norm)
                .ok_or_else(|| invalid(format!("upto: {norm} is not an instance of the context {ctx}")))?;
            vec![ElemTerm::from_stream_term(&arg).expect("closed term")]
        }
        TechniqueForm::Transitive => {
            let ElemTerm::Pair(a, c) = e else { return fail(format!("upto: {e} is not a pair")) };
            let b = via.ok_or_else(|| invalid(format!("upto: {name} needs (via TERM)")))?;
            vec![ElemTerm::pair((**a).clone(), b.clone()), ElemTerm::pair(b.clone(), (**c).clone())]
        }
        TechniqueForm::Converse => {
            let ElemTerm::Pair(a, b) = e else { return fail(format!("upto: {e} is not a pair")) };
            vec![ElemTerm::pair((**b).clone(), (**a).clone())]
        }
    };
    if via.is_some() && def.form != TechniqueForm::Transitive {
        return fail(format!("upto: {name} takes no via term"));
    }
    Ok(premise_elems
        .into_iter()
        .map(|x| {
            let mut f = Formula::Mem(x, ChainExpr::Named(ch.clone()));
            for _ in 0..laters {
                f = Formula::later(f);
            }
            seq.with_goal(f)
        })
        .collect())
}
