//! Proof scripts: a goal and a tree of rule applications.

use std::fmt;

use super::formula::{ElemTerm, Formula};
use crate::syntax::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Adds `name: ▷φ` for the goal `φ`.
    Lob(String),
    /// Unfolds `x ∈ ch(Φ)` to `x ∈ ▷(Φ̂ ch(Φ))`, or folds it back.
    Step,
    Next,
    LaterAnd,
    LaterImpl,
    LaterFunctor,
    LaterMono,
    LaterForall,
    LaterExists,
    /// Closes the goal by a compatible technique; `via` names the middle
    /// element for binary techniques.
    Upto(String, Option<ElemTerm>),
    Rewrite(String),
    Unfold,
    Atom,
    Axiom(String),
    AxiomTop,
    AndI,
    /// Hypothesis, names for its two halves.
    AndE(String, String, String),
    ImplI(String),
    ImplE(String),
    ForallI(String),
    /// Hypothesis, instance, name for the instantiated hypothesis.
    ForallE(String, ElemTerm, String),
    ExistsI(ElemTerm),
    Weaken(String),
    /// An unproved leaf.
    Open,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Lob(_) => "lob",
            Rule::Step => "step",
            Rule::Next => "next",
            Rule::LaterAnd => "later-and",
            Rule::LaterImpl => "later-impl",
            Rule::LaterFunctor => "later-functor",
            Rule::LaterMono => "later-mono",
            Rule::LaterForall => "later-forall",
            Rule::LaterExists => "later-exists",
            Rule::Upto(..) => "upto",
            Rule::Rewrite(_) => "rewrite",
            Rule::Unfold => "unfold",
            Rule::Atom => "atom",
            Rule::Axiom(_) => "axiom",
            Rule::AxiomTop => "axiom-top",
            Rule::AndI => "and-i",
            Rule::AndE(..) => "and-e",
            Rule::ImplI(_) => "impl-i",
            Rule::ImplE(_) => "impl-e",
            Rule::ForallI(_) => "forall-i",
            Rule::ForallE(..) => "forall-e",
            Rule::ExistsI(_) => "exists-i",
            Rule::Weaken(_) => "weaken",
            Rule::Open => "open",
        }
    }

    /// Number of subproofs, when fixed by the rule alone.
    pub fn fixed_arity(&self) -> Option<usize> {
        Some(match self {
            Rule::Atom | Rule::Axiom(_) | Rule::AxiomTop | Rule::Open => 0,
            Rule::LaterAnd | Rule::AndI => 2,
            Rule::Upto(..) => return None,
            _ => 1,
        })
    }

    fn args(&self) -> Vec<String> {
        match self {
            Rule::Lob(n)
            | Rule::Rewrite(n)
            | Rule::Axiom(n)
            | Rule::ImplI(n)
            | Rule::ImplE(n)
            | Rule::ForallI(n)
            | Rule::Weaken(n) => vec![n.clone()],
            Rule::Upto(n, None) => vec![n.clone()],
            Rule::Upto(n, Some(via)) => vec![n.clone(), format!("(via {via})")],
            Rule::AndE(h, l, r) => vec![h.clone(), l.clone(), r.clone()],
            Rule::ForallE(h, t, n) => vec![h.clone(), t.to_string(), n.clone()],
            Rule::ExistsI(t) => vec![t.to_string()],
            _ => Vec::new(),
        }
    }
}

/// One rule application. Equality ignores spans.
#[derive(Clone, Debug)]
pub struct ProofNode {
    pub rule: Rule,
    pub children: Vec<ProofNode>,
    pub span: Span,
}

impl PartialEq for ProofNode {
    fn eq(&self, other: &ProofNode) -> bool {
        self.rule == other.rule && self.children == other.children
    }
}

impl Eq for ProofNode {}

impl ProofNode {
    pub fn new(rule: Rule, children: Vec<ProofNode>) -> ProofNode {
        ProofNode { rule, children, span: Span::default() }
    }

    pub fn leaf(rule: Rule) -> ProofNode {
        ProofNode::new(rule, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofNode::size).sum::<usize>()
    }
}

impl fmt::Display for ProofNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.rule.name())?;
        for a in self.rule.args() {
            write!(f, " {a}")?;
        }
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofScript {
    pub goal: Formula,
    pub proof: ProofNode,
}

impl fmt::Display for ProofScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(goal {})", self.goal)?;
        writeln!(f, "(proof {})", self.proof)
    }
}
