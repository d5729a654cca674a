//! Proof files: `(goal FORMULA) (proof TREE)`.

use super::{natural, rational, Sexp, SyntaxError};
use crate::logic::formula::{ChainExpr, ElemTerm, Fact, Formula, NumExpr};
use crate::logic::script::{ProofNode, ProofScript, Rule};
use crate::sde::StreamOp;
use crate::transformer::CmpOp;

pub fn parse_proof(text: &str) -> Result<ProofScript, SyntaxError> {
    let forms = super::parse_sexps(text)?;
    let mut goal = None;
    let mut proof = None;
    for form in &forms {
        let items = form.expect_list("(goal …) or (proof …)")?;
        match (form.head(), items.len()) {
            (Some("goal"), 2) if goal.is_none() => goal = Some(parse_formula(&items[1])?),
            (Some("proof"), 2) if proof.is_none() => proof = Some(parse_node(&items[1])?),
            (Some("goal" | "proof"), 2) => return Err(SyntaxError::new("repeated section", form.span)),
            (Some(h @ ("goal" | "proof")), _) => {
                return Err(SyntaxError::new(format!("{h} expects exactly one argument"), form.span))
            }
            _ => return Err(SyntaxError::new("expected (goal …) or (proof …)", form.span)),
        }
    }
    let end = forms.last().map(|f| f.span).unwrap_or_default();
    let goal = goal.ok_or_else(|| SyntaxError::new("missing (goal …)", end))?;
    let proof = proof.ok_or_else(|| SyntaxError::new("missing (proof …)", end))?;
    Ok(ProofScript { goal, proof })
}

fn name(s: &Sexp, what: &str) -> Result<String, SyntaxError> {
    Ok(s.expect_atom(what)?.to_string())
}

/// Parses a rule tree.
pub fn parse_node(s: &Sexp) -> Result<ProofNode, SyntaxError> {
    let items = s.expect_list("a rule application")?;
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a rule name", s.span))?;
    let args = &items[1..];
    let bad = |expected: &str| SyntaxError::new(format!("{head} expects {expected}"), s.span);
    let subs = |xs: &[Sexp]| xs.iter().map(parse_node).collect::<Result<Vec<_>, _>>();
    let (rule, children) = match head {
        "lob" | "rewrite" | "axiom" | "impl-i" | "impl-e" | "forall-i" | "weaken" => {
            let leaf = head == "axiom";
            let expected = match head {
                "lob" => "name and subproof",
                "rewrite" => "stream name and subproof",
                "axiom" => "a hypothesis name",
                "impl-i" => "name and subproof",
                "forall-i" => "variable and subproof",
                _ => "hypothesis and subproof",
            };
            let ok = if leaf { args.len() == 1 } else { args.len() == 2 };
            if !ok || args[0].as_atom().is_none() {
                return Err(bad(expected));
            }
            let n = name(&args[0], "a name")?;
            let rule = match head {
                "lob" => Rule::Lob(n),
                "rewrite" => Rule::Rewrite(n),
                "axiom" => Rule::Axiom(n),
                "impl-i" => Rule::ImplI(n),
                "impl-e" => Rule::ImplE(n),
                "forall-i" => Rule::ForallI(n),
                _ => Rule::Weaken(n),
            };
            (rule, subs(&args[1..])?)
        }
        "step" | "next" | "later-impl" | "later-functor" | "later-mono" | "later-forall" | "later-exists"
        | "unfold" => {
            if args.len() != 1 {
                return Err(bad("a subproof"));
            }
            let rule = match head {
                "step" => Rule::Step,
                "next" => Rule::Next,
                "later-impl" => Rule::LaterImpl,
                "later-functor" => Rule::LaterFunctor,
                "later-mono" => Rule::LaterMono,
                "later-forall" => Rule::LaterForall,
                "later-exists" => Rule::LaterExists,
                _ => Rule::Unfold,
            };
            (rule, subs(args)?)
        }
        "later-and" | "and-i" => {
            if args.len() != 2 {
                return Err(bad("two subproofs"));
            }
            (if head == "and-i" { Rule::AndI } else { Rule::LaterAnd }, subs(args)?)
        }
        "atom" | "axiom-top" | "open" => {
            if !args.is_empty() {
                return Err(bad("no arguments"));
            }
            (
                match head {
                    "atom" => Rule::Atom,
                    "axiom-top" => Rule::AxiomTop,
                    _ => Rule::Open,
                },
                Vec::new(),
            )
        }
        "upto" => {
            let Some(tech) = args.first().and_then(Sexp::as_atom) else {
                return Err(bad("technique name and subproofs"));
            };
            let (via, rest) = match args.get(1) {
                Some(v) if v.head() == Some("via") => {
                    let [_, t] = v.as_list().unwrap_or_default() else {
                        return Err(SyntaxError::new("via expects one element term", v.span));
                    };
                    (Some(parse_elem(t)?), &args[2..])
                }
                _ => (None, &args[1..]),
            };
            if rest.is_empty() {
                return Err(bad("technique name and subproofs"));
            }
            (Rule::Upto(tech.to_string(), via), subs(rest)?)
        }
        "and-e" => {
            let [h, l, r, sub] = args else { return Err(bad("hypothesis, two names and subproof")) };
            (Rule::AndE(name(h, "a hypothesis")?, name(l, "a name")?, name(r, "a name")?), vec![parse_node(sub)?])
        }
        "forall-e" => {
            let [h, t, n, sub] = args else { return Err(bad("hypothesis, term, name and subproof")) };
            (Rule::ForallE(name(h, "a hypothesis")?, parse_elem(t)?, name(n, "a name")?), vec![parse_node(sub)?])
        }
        "exists-i" => {
            let [t, sub] = args else { return Err(bad("term and subproof")) };
            (Rule::ExistsI(parse_elem(t)?), vec![parse_node(sub)?])
        }
        other => return Err(SyntaxError::new(format!("unknown rule `{other}`"), items[0].span)),
    };
    Ok(ProofNode { rule, children, span: s.span })
}

pub fn parse_formula(s: &Sexp) -> Result<Formula, SyntaxError> {
    if let Some(a) = s.as_atom() {
        return match a {
            "top" => Ok(Formula::Top),
            "true" => Ok(Formula::Atom(Fact::Bool(true))),
            "false" => Ok(Formula::Atom(Fact::Bool(false))),
            _ => Err(SyntaxError::new(format!("expected a formula, got {a}"), s.span)),
        };
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a formula", s.span))?;
    let bad = |expected: &str| SyntaxError::new(format!("{head} expects {expected}"), s.span);
    Ok(match head {
        "in" => {
            let [_, e, c] = items else { return Err(bad("an element term and a chain")) };
            Formula::Mem(parse_elem(e)?, parse_chain_expr(c)?)
        }
        "later" => {
            let [_, f] = items else { return Err(bad("one formula")) };
            Formula::later(parse_formula(f)?)
        }
        "and" => {
            if items.len() < 3 {
                return Err(bad("at least two formulas"));
            }
            Formula::conj(items[1..].iter().map(parse_formula).collect::<Result<_, _>>()?)
        }
        "impl" => {
            let [_, a, b] = items else { return Err(bad("two formulas")) };
            Formula::implies(parse_formula(a)?, parse_formula(b)?)
        }
        "forall" | "exists" => {
            let [_, binder, body] = items else { return Err(bad("(VAR SORT) and a formula")) };
            let [x, sort] = binder.as_list().unwrap_or_default() else { return Err(bad("(VAR SORT) and a formula")) };
            let (x, sort) = (name(x, "a variable")?, name(sort, "a sort")?);
            let body = parse_formula(body)?;
            if head == "forall" {
                Formula::forall(&x, &sort, body)
            } else {
                Formula::exists(&x, &sort, body)
            }
        }
        "fact" => {
            let [_, f] = items else { return Err(bad("one fact")) };
            Formula::Atom(parse_fact(f)?)
        }
        _ => Formula::Atom(parse_fact(s)?),
    })
}

pub fn parse_fact(s: &Sexp) -> Result<Fact, SyntaxError> {
    match s.as_atom() {
        Some("true") => return Ok(Fact::Bool(true)),
        Some("false") => return Ok(Fact::Bool(false)),
        Some(a) => return Err(SyntaxError::new(format!("expected a fact, got {a}"), s.span)),
        None => {}
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a fact", s.span))?;
    let bad = |expected: &str| SyntaxError::new(format!("{head} expects {expected}"), s.span);
    Ok(match head {
        "eq" => {
            let [_, a, b] = items else { return Err(bad("two element terms")) };
            Fact::Eq(parse_elem(a)?, parse_elem(b)?)
        }
        "not" => {
            let [_, a] = items else { return Err(bad("one fact")) };
            Fact::Not(Box::new(parse_fact(a)?))
        }
        "and" => Fact::And(items[1..].iter().map(parse_fact).collect::<Result<_, _>>()?),
        "or" => Fact::Or(items[1..].iter().map(parse_fact).collect::<Result<_, _>>()?),
        op => match CmpOp::from_symbol(op) {
            Some(cmp) => {
                let [_, a, b] = items else { return Err(bad("two numeric expressions")) };
                Fact::Cmp(cmp, parse_num(a)?, parse_num(b)?)
            }
            None => return Err(SyntaxError::new(format!("unknown formula or fact `{op}`"), items[0].span)),
        },
    })
}

pub fn parse_num(s: &Sexp) -> Result<NumExpr, SyntaxError> {
    if s.as_atom().is_some() {
        return Ok(NumExpr::Lit(rational(s, "a rational or numeric expression")?));
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a numeric expression", s.span))?;
    let sub = |i: usize| parse_num(&items[i]).map(Box::new);
    Ok(match (head, items.len()) {
        ("head", 2) => NumExpr::Head(parse_elem(&items[1])?),
        ("nth", 3) => NumExpr::Nth(parse_elem(&items[1])?, natural(&items[2], "an index")?),
        ("+", 3) => NumExpr::Add(sub(1)?, sub(2)?),
        ("-", 3) => NumExpr::Sub(sub(1)?, sub(2)?),
        ("-", 2) => NumExpr::Neg(sub(1)?),
        ("*", 3) => NumExpr::Mul(sub(1)?, sub(2)?),
        ("min", 3) => NumExpr::Min(sub(1)?, sub(2)?),
        ("max", 3) => NumExpr::Max(sub(1)?, sub(2)?),
        _ => return Err(SyntaxError::new(format!("malformed numeric expression {s}"), s.span)),
    })
}

pub fn parse_elem(s: &Sexp) -> Result<ElemTerm, SyntaxError> {
    if let Some(a) = s.as_atom() {
        if a == "_" {
            return Err(SyntaxError::new("holes are not element terms", s.span));
        }
        return Ok(match crate::elem::parse_rational(a) {
            Some(r) => ElemTerm::Num(r),
            None => ElemTerm::sym(a),
        });
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected an element term", s.span))?;
    Ok(match (head, items.len()) {
        ("tail", 2) => ElemTerm::tail(parse_elem(&items[1])?),
        ("const", 2) => ElemTerm::Lit(rational(&items[1], "a rational")?),
        ("pair", 3) => ElemTerm::pair(parse_elem(&items[1])?, parse_elem(&items[2])?),
        (op, n) => match StreamOp::from_name(op) {
            Some(op) if op.arity() == n - 1 => {
                ElemTerm::Op(op, items[1..].iter().map(parse_elem).collect::<Result<_, _>>()?)
            }
            Some(op) => {
                return Err(SyntaxError::new(format!("{op} expects {} arguments, got {}", op.arity(), n - 1), s.span))
            }
            None => return Err(SyntaxError::new(format!("malformed element term {s}"), s.span)),
        },
    })
}

pub fn parse_chain_expr(s: &Sexp) -> Result<ChainExpr, SyntaxError> {
    if let Some(a) = s.as_atom() {
        return Ok(ChainExpr::named(a));
    }
    let items = s.as_list().unwrap_or_default();
    Ok(match (s.head(), items) {
        (Some("later"), [_, c]) => ChainExpr::later(parse_chain_expr(c)?),
        (Some("phi"), [_, n, c]) => ChainExpr::phi(&name(n, "a chain name")?, parse_chain_expr(c)?),
        (Some("upto"), [_, n, c]) => ChainExpr::Tech(name(n, "a technique name")?, Box::new(parse_chain_expr(c)?)),
        _ => return Err(SyntaxError::new(format!("malformed chain expression {s}"), s.span)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUNNING: &str = "(goal (in s PHI))\n\
        (proof (lob IH (step (later-functor (later-and (next (atom)) (rewrite s (upto C (axiom IH))))))))";

    #[test]
    fn running_example_parses() {
        let script = parse_proof(RUNNING).unwrap();
        assert_eq!(script.proof.size(), 9);
        assert_eq!(script.goal, Formula::Mem(ElemTerm::sym("s"), ChainExpr::named("PHI")));
    }

    #[test]
    fn trivial_script() {
        let script = parse_proof("(goal top)(proof (axiom-top))").unwrap();
        assert_eq!(script.proof, ProofNode::leaf(Rule::AxiomTop));
    }

    #[test]
    fn lob_without_arguments() {
        let err = parse_proof("(proof (lob))").unwrap_err();
        assert_eq!(err.message, "lob expects name and subproof");
        assert_eq!((err.span.line, err.span.col), (1, 8));
    }

    #[test]
    fn unknown_rule() {
        let err = parse_proof("(goal top)\n(proof (magic))").unwrap_err();
        assert_eq!(err.message, "unknown rule `magic`");
        assert_eq!(err.span.line, 2);
    }

    #[test]
    fn round_trip() {
        let texts = [
            RUNNING,
            "(goal (forall (x S) (impl (and (> (head x) 0) (fact (and true (eq x x)))) (later (in (pair x a) (upto T (phi B (later B))))))))\n\
             (proof (forall-i y (impl-i h (and-e h l r (upto T (via (tail (const 1/2))) (open) (exists-i (oplus 1 (neg s)) (atom)))))))",
            "(goal (exists (x S) (or (< (nth x 3) -2/3) false)))(proof (forall-e H x H2 (weaken H (unfold (open)))))",
        ];
        for text in texts {
            let script = parse_proof(text).unwrap();
            let printed = script.to_string();
            assert_eq!(parse_proof(&printed).unwrap(), script, "{printed}");
        }
    }
}
