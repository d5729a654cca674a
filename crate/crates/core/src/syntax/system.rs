//! System files: carriers, stream definitions, operations, liftings,
//! coalgebras, chains and techniques.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use super::{arity_error, element, natural, rational, Sexp, Span, SyntaxError};
use crate::chain::Chain;
use crate::elem::Elem;
use crate::fibre::{Carrier, Fibre, Predicate};
use crate::sde::{HeadExpr, SdeSystem, StreamOp, Term};
use crate::transformer::{final_chain, CmpOp, Coalgebra, LiftExpr, LiftMode, Lifting, Transformer};
use crate::upto::{check_compatible, CompatCert, CompatOptions, Technique};
use crate::Error;

/// A named chain of the system.
#[derive(Clone, Debug)]
pub enum ChainDef {
    /// The final chain of a transformer.
    Final(Transformer),
    /// A descending chain given by its entries; the last entry repeats.
    Explicit(Chain),
}

/// The declaration form of a technique, which fixes its proof-rule premises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TechniqueForm {
    Identity,
    Context,
    Transitive,
    Converse,
}

#[derive(Clone, Debug)]
pub struct TechniqueDef {
    pub technique: Technique,
    pub form: TechniqueForm,
    /// The chain named in the declaration, if any.
    pub chain: Option<String>,
}

/// A loaded system file.
#[derive(Debug, Default)]
pub struct System {
    sde: Arc<SdeSystem>,
    sorts: BTreeMap<String, Carrier>,
    liftings: BTreeMap<String, Lifting>,
    coalgebras: BTreeMap<String, Coalgebra>,
    chains: BTreeMap<String, ChainDef>,
    techniques: BTreeMap<String, TechniqueDef>,
    certs: Mutex<BTreeMap<(String, String), CompatCert>>,
}

impl System {
    pub fn sde(&self) -> &Arc<SdeSystem> {
        &self.sde
    }

    /// Finite sorts: declared carriers and the state spaces of finite coalgebras.
    pub fn sort(&self, name: &str) -> Option<&Carrier> {
        self.sorts.get(name)
    }

    pub fn sorts(&self) -> &BTreeMap<String, Carrier> {
        &self.sorts
    }

    pub fn lifting(&self, name: &str) -> Option<&Lifting> {
        self.liftings.get(name)
    }

    pub fn coalgebra(&self, name: &str) -> Option<&Coalgebra> {
        self.coalgebras.get(name)
    }

    pub fn coalgebras(&self) -> &BTreeMap<String, Coalgebra> {
        &self.coalgebras
    }

    pub fn chain_def(&self, name: &str) -> Option<&ChainDef> {
        self.chains.get(name)
    }

    pub fn chain_names(&self) -> impl Iterator<Item = &String> {
        self.chains.keys()
    }

    pub fn chain(&self, name: &str) -> Option<Chain> {
        self.chains.get(name).map(|c| match c {
            ChainDef::Final(phi) => final_chain(phi),
            ChainDef::Explicit(ch) => ch.clone(),
        })
    }

    /// The transformer behind a final chain.
    pub fn transformer(&self, chain: &str) -> Option<&Transformer> {
        match self.chains.get(chain)? {
            ChainDef::Final(phi) => Some(phi),
            ChainDef::Explicit(_) => None,
        }
    }

    pub fn technique(&self, name: &str) -> Option<&TechniqueDef> {
        self.techniques.get(name)
    }

    pub fn technique_names(&self) -> impl Iterator<Item = &String> {
        self.techniques.keys()
    }

    pub fn is_stream(&self, name: &str) -> bool {
        self.sde.get(name).is_some()
    }

    /// Compatibility certificate of a technique for the transformer of a
    /// chain, computed once per pair.
    pub fn compat(&self, technique: &str, chain: &str, opts: &CompatOptions) -> crate::Result<CompatCert> {
        let key = (technique.to_string(), chain.to_string());
        if let Some(cert) = self.certs.lock().expect("cert lock").get(&key) {
            return Ok(cert.clone());
        }
        let t = self.technique(technique).ok_or_else(|| Error::Invalid(format!("unknown technique {technique}")))?;
        let phi = self.transformer(chain).ok_or_else(|| Error::Invalid(format!("{chain} is not a final chain")))?;
        let cert = check_compatible(&t.technique, phi, opts)?;
        self.certs.lock().expect("cert lock").insert(key, cert.clone());
        Ok(cert)
    }
}

fn sem(span: Span) -> impl Fn(Error) -> SyntaxError {
    move |e| SyntaxError::new(e.to_string(), span)
}

const BUILTIN_CAUSAL: [StreamOp; 4] = [StreamOp::Oplus, StreamOp::Ominus, StreamOp::Otimes, StreamOp::Neg];

/// Parses and loads a system file.
pub fn parse_system(text: &str) -> Result<System, SyntaxError> {
    let forms = super::parse_sexps(text)?;
    let mut names: BTreeSet<String> = BTreeSet::new();
    let mut by_kind: BTreeMap<&str, Vec<&Sexp>> = BTreeMap::new();
    for form in &forms {
        let items = form.expect_list("a declaration")?;
        let kind = form.head().ok_or_else(|| SyntaxError::new("expected a declaration keyword", form.span))?;
        if !["carrier", "op", "sde", "lifting", "coalgebra", "chain", "technique"].contains(&kind) {
            return Err(SyntaxError::new(format!("unknown declaration `{kind}`"), form.span));
        }
        let name = items.get(1).ok_or_else(|| arity_error(form, kind, "a name"))?;
        let name = name.expect_atom("a name")?;
        if !names.insert(name.to_string()) {
            return Err(SyntaxError::new(format!("duplicate name `{name}`"), items[1].span));
        }
        by_kind.entry(kind).or_default().push(form);
    }
    let of = |k: &str| by_kind.get(k).cloned().unwrap_or_default();

    let mut sys = System::default();
    for form in of("carrier") {
        let (name, carrier) = parse_carrier(form)?;
        sys.sorts.insert(name, carrier);
    }

    let mut sde = SdeSystem::new();
    for op in BUILTIN_CAUSAL {
        sde.declare_op(op.name(), true, op.arity()).expect("builtin operation");
    }
    for form in of("op") {
        let items = form.as_list().unwrap_or_default();
        let [_, name, causal, arity] = items else {
            return Err(arity_error(form, "op", "a name, causal or noncausal, and an arity"));
        };
        let causal = match causal.expect_atom("causal or noncausal")? {
            "causal" => true,
            "noncausal" => false,
            other => return Err(SyntaxError::new(format!("expected causal or noncausal, got {other}"), causal.span)),
        };
        let arity = natural(arity, "an arity")?;
        sde.declare_op(name.expect_atom("a name")?, causal, arity).map_err(sem(form.span))?;
    }
    let mut sde_spans = BTreeMap::new();
    for form in of("sde") {
        let (name, head, tail) = parse_sde(form, &sde)?;
        sde.define(&name, head, tail).map_err(sem(form.span))?;
        sde_spans.insert(name, form.span);
    }
    for def in sde.defs() {
        let span = sde_spans[&*def.name];
        let mut terms = vec![&def.tail];
        head_terms(&def.head, &mut terms);
        for t in terms {
            sde.check_term(t).map_err(sem(span))?;
        }
        for k in 0..crate::sde::VALIDATION_PREFIX {
            sde.nth(&def.name, k).map_err(sem(span))?;
        }
    }
    sys.sde = Arc::new(sde);

    for form in of("lifting") {
        let (name, lifting) = parse_lifting(form)?;
        sys.liftings.insert(name, lifting);
    }
    for form in of("coalgebra") {
        let c = parse_coalgebra(form, &sys)?;
        if c.is_finite() {
            sys.sorts.insert(c.name().to_string(), c.carrier().clone());
        }
        sys.coalgebras.insert(c.name().to_string(), c);
    }
    for form in of("chain") {
        let (name, def) = parse_chain(form, &sys)?;
        sys.chains.insert(name, def);
    }
    for form in of("technique") {
        let (name, def) = parse_technique(form, &sys)?;
        sys.techniques.insert(name, def);
    }
    Ok(sys)
}

fn head_terms<'a>(h: &'a HeadExpr, out: &mut Vec<&'a Term>) {
    match h {
        HeadExpr::Lit(_) => {}
        HeadExpr::Head(t) => out.push(t),
        HeadExpr::Add(a, b) | HeadExpr::Sub(a, b) | HeadExpr::Mul(a, b) => {
            head_terms(a, out);
            head_terms(b, out);
        }
        HeadExpr::Neg(a) => head_terms(a, out),
    }
}

fn parse_carrier(form: &Sexp) -> Result<(String, Carrier), SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let [_, name, kind, elems] = items else {
        return Err(arity_error(form, "carrier", "a name, `finite` and an element list"));
    };
    if kind.as_atom() != Some("finite") {
        return Err(SyntaxError::new("only finite carriers can be declared", kind.span));
    }
    let elems = elems.expect_list("an element list")?.iter().map(element).collect::<Result<BTreeSet<_>, _>>()?;
    Ok((name.expect_atom("a name")?.to_string(), Carrier::finite(elems)))
}

fn parse_sde(form: &Sexp, sde: &SdeSystem) -> Result<(String, HeadExpr, Term), SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let name = items[1].expect_atom("a name")?;
    let mut head = None;
    let mut tail = None;
    for part in &items[2..] {
        match (part.head(), part.as_list()) {
            (Some("head"), Some([_, h])) if head.is_none() => head = Some(parse_head(h, sde)?),
            (Some("tail"), Some([_, t])) if tail.is_none() => tail = Some(parse_term(t, sde, false)?),
            _ => return Err(SyntaxError::new("expected a single (head EXPR) and a single (tail TERM)", part.span)),
        }
    }
    let head = head.ok_or_else(|| SyntaxError::new("missing head", form.span))?;
    let tail = tail.ok_or_else(|| SyntaxError::new("missing tail", form.span))?;
    Ok((name.to_string(), head, tail))
}

fn parse_head(s: &Sexp, sde: &SdeSystem) -> Result<HeadExpr, SyntaxError> {
    if s.as_atom().is_some() {
        return Ok(HeadExpr::Lit(rational(s, "a rational or head expression")?));
    }
    let items = s.as_list().unwrap_or_default();
    let sub = |i: usize| parse_head(&items[i], sde).map(Box::new);
    Ok(match (s.head(), items.len()) {
        (Some("head"), 2) => HeadExpr::Head(parse_term(&items[1], sde, false)?),
        (Some("+"), 3) => HeadExpr::Add(sub(1)?, sub(2)?),
        (Some("-"), 3) => HeadExpr::Sub(sub(1)?, sub(2)?),
        (Some("*"), 3) => HeadExpr::Mul(sub(1)?, sub(2)?),
        (Some("-"), 2) => HeadExpr::Neg(sub(1)?),
        _ => return Err(SyntaxError::new(format!("malformed head expression {s}"), s.span)),
    })
}

/// Stream terms; `_` is accepted only when `holes` is set.
pub(crate) fn parse_term(s: &Sexp, sde: &SdeSystem, holes: bool) -> Result<Term, SyntaxError> {
    if let Some(a) = s.as_atom() {
        if a == "_" {
            return if holes { Ok(Term::Hole) } else { Err(SyntaxError::new("hole outside a context", s.span)) };
        }
        if let Some(r) = crate::elem::parse_rational(a) {
            return Ok(Term::Lit(r));
        }
        return Ok(Term::name(a));
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a stream term", s.span))?;
    match head {
        "tail" if items.len() == 2 => Ok(Term::tail(parse_term(&items[1], sde, holes)?)),
        "const" if items.len() == 2 => Ok(Term::Lit(rational(&items[1], "a rational")?)),
        _ => {
            let op = StreamOp::from_name(head)
                .filter(|op| sde.is_declared(*op))
                .ok_or_else(|| SyntaxError::new(format!("undeclared operation `{head}`"), items[0].span))?;
            if items.len() - 1 != op.arity() {
                return Err(SyntaxError::new(
                    format!("{head} expects {} arguments, got {}", op.arity(), items.len() - 1),
                    s.span,
                ));
            }
            let args = items[1..].iter().map(|a| parse_term(a, sde, holes)).collect::<Result<_, _>>()?;
            Ok(Term::op(op, args))
        }
    }
}

fn parse_lifting(form: &Sexp) -> Result<(String, Lifting), SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let [_, name, body] = items else {
        return Err(arity_error(form, "lifting", "a name and a body"));
    };
    let name = name.expect_atom("a name")?;
    let lifting = match body.as_atom() {
        Some("canonical") => Lifting::canonical(name, LiftMode::Predicate, Fibre::Pred),
        Some("bisim") => Lifting::canonical(name, LiftMode::Relation, Fibre::Pred),
        _ => Lifting::expr(name, parse_lift_expr(body)?).map_err(sem(body.span))?,
    };
    Ok((name.to_string(), lifting))
}

pub(crate) fn parse_lift_expr(s: &Sexp) -> Result<LiftExpr, SyntaxError> {
    if let Some(a) = s.as_atom() {
        return Ok(match a {
            "head" => LiftExpr::Head,
            "rec" => LiftExpr::Rec,
            "true" => LiftExpr::Bool(true),
            "false" => LiftExpr::Bool(false),
            _ => LiftExpr::Num(rational(s, "head, rec, true, false or a rational")?),
        });
    }
    let items = s.as_list().unwrap_or_default();
    let head = s.head().ok_or_else(|| SyntaxError::new("expected a lifting expression", s.span))?;
    let sub = |i: usize| parse_lift_expr(&items[i]).map(Box::new);
    let n = items.len();
    Ok(match (head, n) {
        ("const", 2) => LiftExpr::Num(rational(&items[1], "a rational")?),
        ("+", 3) => LiftExpr::Add(sub(1)?, sub(2)?),
        ("-", 3) => LiftExpr::Sub(sub(1)?, sub(2)?),
        ("-", 2) => LiftExpr::Neg(sub(1)?),
        ("*", 3) => LiftExpr::Mul(sub(1)?, sub(2)?),
        ("min", 3) => LiftExpr::Min(sub(1)?, sub(2)?),
        ("max", 3) => LiftExpr::Max(sub(1)?, sub(2)?),
        ("not", 2) => LiftExpr::Not(sub(1)?),
        ("and", _) => LiftExpr::And(items[1..].iter().map(parse_lift_expr).collect::<Result<_, _>>()?),
        ("or", _) => LiftExpr::Or(items[1..].iter().map(parse_lift_expr).collect::<Result<_, _>>()?),
        (op, 3) if CmpOp::from_symbol(op).is_some() => {
            LiftExpr::Cmp(CmpOp::from_symbol(op).expect("checked"), sub(1)?, sub(2)?)
        }
        _ => return Err(SyntaxError::new(format!("malformed lifting expression {s}"), s.span)),
    })
}

fn parse_coalgebra(form: &Sexp, sys: &System) -> Result<Coalgebra, SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let name = items[1].expect_atom("a name")?;
    let kind = items.get(2).ok_or_else(|| arity_error(form, "coalgebra", "a name and a kind"))?;
    match (kind.as_atom(), &items[3..]) {
        (Some("stream"), []) => Ok(Coalgebra::streams(name, sys.sde.clone())),
        (Some("lts"), [rows, extra @ ..]) => {
            let mut transitions = Vec::new();
            let mut states = BTreeSet::new();
            let mut labels = BTreeSet::new();
            for row in rows.expect_list("a transition list")? {
                let [s, a, t] = row.expect_list("a transition (s a s')")? else {
                    return Err(SyntaxError::new("expected a transition (s a s')", row.span));
                };
                let (s, a, t) = (element(s)?, element(a)?, element(t)?);
                states.insert(s.clone());
                states.insert(t.clone());
                labels.insert(a.clone());
                transitions.push((s, a, t));
            }
            for part in extra {
                let list = part.expect_list("(states …) or (labels …)")?;
                let target = match part.head() {
                    Some("states") => &mut states,
                    Some("labels") => &mut labels,
                    _ => return Err(SyntaxError::new("expected (states …) or (labels …)", part.span)),
                };
                for e in &list[1..] {
                    target.insert(element(e)?);
                }
            }
            let states: Vec<Elem> = states.into_iter().collect();
            let labels: Vec<Elem> = labels.into_iter().collect();
            Coalgebra::lts(name, &states, &labels, &transitions).map_err(sem(form.span))
        }
        (Some("automaton"), [rows]) => {
            let mut table = Vec::new();
            for row in rows.expect_list("an automaton table")? {
                let [x, out, next] = row.expect_list("a row (x out next)")? else {
                    return Err(SyntaxError::new("expected a row (x out next)", row.span));
                };
                table.push((element(x)?, rational(out, "a rational output")?, element(next)?));
            }
            Coalgebra::automaton(name, &table).map_err(sem(form.span))
        }
        _ => Err(SyntaxError::new("expected stream, lts ((s a s')…) or automaton ((x out next)…)", kind.span)),
    }
}

fn parse_chain(form: &Sexp, sys: &System) -> Result<(String, ChainDef), SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let [_, name, body] = items else {
        return Err(arity_error(form, "chain", "a name and (transformer LIFTING COALGEBRA)"));
    };
    let name = name.expect_atom("a name")?;
    let parts = body.expect_list("a chain body")?;
    let def = match body.head() {
        Some("transformer") => {
            let [_, lifting, coalg] = parts else {
                return Err(arity_error(body, "transformer", "a lifting and a coalgebra"));
            };
            let l = lifting.expect_atom("a lifting name")?;
            let lifting_def = sys
                .liftings
                .get(l)
                .ok_or_else(|| SyntaxError::new(format!("unknown lifting `{l}`"), lifting.span))?;
            let c = coalg.expect_atom("a coalgebra name")?;
            let coalg_def = sys
                .coalgebras
                .get(c)
                .ok_or_else(|| SyntaxError::new(format!("unknown coalgebra `{c}`"), coalg.span))?;
            ChainDef::Final(Transformer::new(name, coalg_def, lifting_def).map_err(sem(body.span))?)
        }
        Some("explicit") => {
            let sort_sexp = parts.get(1).ok_or_else(|| arity_error(body, "explicit", "a sort and entries"))?;
            let sort = sort_sexp.expect_atom("a sort")?;
            let carrier = sys
                .sorts
                .get(sort)
                .ok_or_else(|| SyntaxError::new(format!("unknown sort `{sort}`"), sort_sexp.span))?;
            let mut entries: Vec<Predicate> = Vec::new();
            for entry in &parts[2..] {
                let members = entry.expect_list("a subset")?.iter().map(element).collect::<Result<Vec<_>, _>>()?;
                let p = Predicate::subset(carrier, members).map_err(sem(entry.span))?;
                if let Some(prev) = entries.last() {
                    if !crate::fibre::leq(&p, prev, None).map_err(sem(entry.span))? {
                        return Err(SyntaxError::new("explicit chain entries must descend", entry.span));
                    }
                }
                entries.push(p);
            }
            let chain = Chain::explicit(entries).map_err(sem(body.span))?;
            ChainDef::Explicit(chain.with_label(name))
        }
        _ => return Err(SyntaxError::new("expected (transformer LIFTING COALGEBRA) or (explicit SORT …)", body.span)),
    };
    Ok((name.to_string(), def))
}

fn parse_technique(form: &Sexp, sys: &System) -> Result<(String, TechniqueDef), SyntaxError> {
    let items = form.as_list().unwrap_or_default();
    let name = items[1].expect_atom("a name")?;
    let kind = items.get(2).ok_or_else(|| arity_error(form, "technique", "a name and a kind"))?;
    let chain_arg = |i: usize| -> Result<String, SyntaxError> {
        let s = items.get(i).ok_or_else(|| arity_error(form, "technique", "a chain"))?;
        let c = s.expect_atom("a chain name")?;
        match sys.chains.get(c) {
            Some(ChainDef::Final(phi)) if phi.lifting().mode == LiftMode::Relation => Ok(c.to_string()),
            Some(_) => Err(SyntaxError::new(format!("`{c}` is not a relational final chain"), s.span)),
            None => Err(SyntaxError::new(format!("unknown chain `{c}`"), s.span)),
        }
    };
    let (technique, form, chain) = match (kind.as_atom(), items.len()) {
        (Some("context"), 4) => {
            let ctx = parse_term(&items[3], &sys.sde, true)?;
            if !ctx.has_hole() {
                return Err(SyntaxError::new("a context needs a hole `_`", items[3].span));
            }
            sys.sde.check_term(&ctx).map_err(sem(items[3].span))?;
            (Technique::context(name, sys.sde.clone(), ctx).map_err(sem(form.span))?, TechniqueForm::Context, None)
        }
        (Some("transitive"), 4) => (Technique::transitive(name), TechniqueForm::Transitive, Some(chain_arg(3)?)),
        (Some("converse"), 4) => {
            (crate::upto::converse_closure().renamed(name), TechniqueForm::Converse, Some(chain_arg(3)?))
        }
        (Some("identity"), 3) => (Technique::identity().renamed(name), TechniqueForm::Identity, None),
        _ => {
            return Err(SyntaxError::new(
                "expected context TERM, transitive CHAIN, converse CHAIN or identity",
                kind.span,
            ))
        }
    };
    Ok((name.to_string(), TechniqueDef { technique, form, chain }))
}
