//! Up-to techniques: compatibility certificates and the chain morphisms
//! `T̂(ch Φ) ⊑ ch Φ` they induce.

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{Chain, ChainMorphismCert, Failure};
use crate::elem::{Elem, Rational};
use crate::error::{Error, Result};
use crate::fibre::{self, BaseMap, Carrier, CarrierKind, Degree, Fibre, Predicate};
use crate::functor::Functor;
use crate::sde::{SdeSystem, Term};
use crate::transformer::{self, CmpOp, LiftExpr, LiftMode, LiftRule, Lifting, Transformer};

pub const DEFAULT_BUDGET: usize = 1 << 16;
pub const DEFAULT_CAUSALITY_DEPTH: usize = 32;
/// Random predicates drawn when a check falls back to sampling.
pub const DEFAULT_SAMPLES: usize = 64;

pub type TechniqueFn = Arc<dyn Fn(&[Predicate]) -> Result<Predicate> + Send + Sync>;
pub type GlobalFn = Arc<dyn Fn(&Predicate) -> Result<Predicate> + Send + Sync>;

#[derive(Clone)]
pub enum TechniqueKind {
    Identity,
    /// `C(P) = {ctx[t] | t ∈ P}` on stream terms.
    Context { system: Arc<SdeSystem>, ctx: Term },
    /// Direct image along a map `X → X`.
    Image(BaseMap),
    /// `T(R₁, R₂) = R₁ ; R₂` on relations.
    Transitive,
    /// `T(P) = P ∨ Q`.
    UnionWith(Predicate),
    /// `T₁ ∘ T₂ ∘ …`, rightmost applied first.
    Composition(Vec<Technique>),
    /// `T ∘ Δ_n`.
    Diagonal(Box<Technique>),
    /// A technique defined uniformly over all carriers.
    Global(GlobalFn),
    Custom(TechniqueFn),
}

/// A monotone operator `Predicate^arity → Predicate` on one carrier.
#[derive(Clone)]
pub struct Technique {
    name: Arc<str>,
    arity: usize,
    kind: TechniqueKind,
}

impl fmt::Debug for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Technique({}/{})", self.name, self.arity)
    }
}

impl Technique {
    pub fn identity() -> Technique {
        Technique { name: Arc::from("id"), arity: 1, kind: TechniqueKind::Identity }
    }

    pub fn context(name: &str, system: Arc<SdeSystem>, ctx: Term) -> Result<Technique> {
        if !ctx.has_hole() {
            return Err(Error::Invalid(format!("context {ctx} has no hole")));
        }
        system.check_term(&ctx)?;
        Ok(Technique { name: Arc::from(name), arity: 1, kind: TechniqueKind::Context { system, ctx } })
    }

    pub fn image(name: &str, f: BaseMap) -> Result<Technique> {
        if f.source() != f.target() {
            return Err(Error::CarrierMismatch { left: f.source().to_string(), right: f.target().to_string() });
        }
        Ok(Technique { name: Arc::from(name), arity: 1, kind: TechniqueKind::Image(f) })
    }

    pub fn transitive(name: &str) -> Technique {
        Technique { name: Arc::from(name), arity: 2, kind: TechniqueKind::Transitive }
    }

    pub fn union_with(name: &str, q: Predicate) -> Technique {
        Technique { name: Arc::from(name), arity: 1, kind: TechniqueKind::UnionWith(q) }
    }

    /// Union of its arguments.
    pub fn union(name: &str, arity: usize) -> Technique {
        Technique::custom(name, arity, |args| {
            let mut acc = args[0].clone();
            for p in &args[1..] {
                acc = fibre::join(&acc, p)?;
            }
            Ok(acc)
        })
    }

    pub fn composition(name: &str, parts: Vec<Technique>) -> Result<Technique> {
        if parts.is_empty() {
            return Err(Error::Invalid("empty composition".into()));
        }
        let parts = parts.into_iter().map(|t| if t.arity > 1 { diagonal_technique(&t) } else { t }).collect();
        Ok(Technique { name: Arc::from(name), arity: 1, kind: TechniqueKind::Composition(parts) })
    }

    pub fn global<F>(name: &str, f: F) -> Technique
    where
        F: Fn(&Predicate) -> Result<Predicate> + Send + Sync + 'static,
    {
        Technique { name: Arc::from(name), arity: 1, kind: TechniqueKind::Global(Arc::new(f)) }
    }

    pub fn custom<F>(name: &str, arity: usize, f: F) -> Technique
    where
        F: Fn(&[Predicate]) -> Result<Predicate> + Send + Sync + 'static,
    {
        Technique { name: Arc::from(name), arity: arity.max(1), kind: TechniqueKind::Custom(Arc::new(f)) }
    }

    pub fn renamed(mut self, name: &str) -> Technique {
        self.name = Arc::from(name);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> &TechniqueKind {
        &self.kind
    }

    pub fn context_term(&self) -> Option<&Term> {
        match &self.kind {
            TechniqueKind::Context { ctx, .. } => Some(ctx),
            _ => None,
        }
    }

    pub fn apply(&self, args: &[Predicate]) -> Result<Predicate> {
        if args.len() != self.arity {
            return Err(Error::Invalid(format!("technique {} expects {} arguments, got {}", self.name, self.arity, args.len())));
        }
        let carrier = args[0].carrier();
        for p in args {
            if p.carrier() != carrier {
                return Err(Error::CarrierMismatch { left: carrier.to_string(), right: p.carrier().to_string() });
            }
        }
        match &self.kind {
            TechniqueKind::Identity => Ok(args[0].clone()),
            TechniqueKind::Context { system, ctx } => {
                let (p, ctx, system) = (args[0].clone(), ctx.clone(), system.clone());
                let fibre = p.fibre();
                let f = move |x: &Elem| -> Result<Degree> {
                    let Some(term) = x.as_term() else { return Ok(Degree::bottom(fibre)) };
                    match ctx.match_context(term) {
                        Some(t) => p.degree(&Elem::stream(system.normalize(&t)?)),
                        None => Ok(Degree::bottom(fibre)),
                    }
                };
                Predicate::tabulate(carrier, fibre, f)
            }
            TechniqueKind::Image(f) => fibre::coprod_along(f, &args[0]),
            TechniqueKind::Transitive => relational_composition(&args[0], &args[1]),
            TechniqueKind::UnionWith(q) => fibre::join(&args[0], q),
            TechniqueKind::Composition(parts) => {
                let mut p = args[0].clone();
                for t in parts.iter().rev() {
                    p = t.apply(std::slice::from_ref(&p))?;
                }
                Ok(p)
            }
            TechniqueKind::Diagonal(t) => t.apply(&vec![args[0].clone(); t.arity]),
            TechniqueKind::Global(f) => f(&args[0]),
            TechniqueKind::Custom(f) => {
                let p = f(args)?;
                if p.carrier() != carrier {
                    return Err(Error::CarrierMismatch { left: carrier.to_string(), right: p.carrier().to_string() });
                }
                Ok(p)
            }
        }
    }

    /// `T(P, …, P)`.
    pub fn apply_diag(&self, p: &Predicate) -> Result<Predicate> {
        self.apply(&vec![p.clone(); self.arity])
    }
}

/// `T' = T ∘ Δ_n`, a unary technique.
pub fn diagonal_technique(t: &Technique) -> Technique {
    if t.arity == 1 {
        return t.clone();
    }
    Technique { name: Arc::from(format!("{}'", t.name)), arity: 1, kind: TechniqueKind::Diagonal(Box::new(t.clone())) }
}

/// `R₁ ; R₂` on a carrier `X × X`.
pub fn relational_composition(r1: &Predicate, r2: &Predicate) -> Result<Predicate> {
    let CarrierKind::Pairs(a, b) = r1.carrier().kind() else {
        return Err(Error::Shape(format!("relational composition over {}", r1.carrier())));
    };
    if a != b {
        return Err(Error::Shape(format!("relational composition over {}", r1.carrier())));
    }
    if r1.fibre() != r2.fibre() {
        return Err(Error::FibreMismatch(format!("{} vs {}", r1.fibre(), r2.fibre())));
    }
    let mids = a.elements()?;
    let (r1, r2, fib) = (r1.clone(), r2.clone(), r1.fibre());
    Predicate::tabulate(&r1.carrier().clone(), fib, move |xz| {
        let (x, z) = xz.as_pair().ok_or_else(|| Error::Shape(format!("{xz} is not a pair")))?;
        let mut best = Degree::bottom(fib);
        for y in mids.iter() {
            let l = r1.degree(&Elem::pair(x.clone(), y.clone()))?;
            if l == Degree::bottom(fib) {
                continue;
            }
            best = best.join(&l.meet(&r2.degree(&Elem::pair(y.clone(), z.clone()))?));
            if best.is_top() {
                break;
            }
        }
        Ok(best)
    })
}

/// The converse `R^op`.
pub fn converse(r: &Predicate) -> Result<Predicate> {
    let r2 = r.clone();
    Predicate::tabulate(r.carrier(), r.fibre(), move |xy| {
        let (x, y) = xy.as_pair().ok_or_else(|| Error::Shape(format!("{xy} is not a pair")))?;
        r2.degree(&Elem::pair(y.clone(), x.clone()))
    })
}

// ---------------------------------------------------------------------------
// Compatibility
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CompatStatus {
    ProvedExhaustive,
    ProvedCausality,
    /// Obtained from a compatible technique for the lifting itself.
    DerivedFromGlobal,
    Sampled { samples: usize },
    Failed { witness: String },
}

impl CompatStatus {
    pub fn is_proved(&self) -> bool {
        matches!(self, CompatStatus::ProvedExhaustive | CompatStatus::ProvedCausality | CompatStatus::DerivedFromGlobal)
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, CompatStatus::Failed { .. })
    }
}

impl fmt::Display for CompatStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompatStatus::ProvedExhaustive => write!(f, "proved_exhaustive"),
            CompatStatus::ProvedCausality => write!(f, "proved_causality"),
            CompatStatus::DerivedFromGlobal => write!(f, "derived_from_global"),
            CompatStatus::Sampled { samples } => write!(f, "sampled({samples})"),
            CompatStatus::Failed { witness } => write!(f, "failed({witness})"),
        }
    }
}

/// Evidence for `T Φ ≤ Φ T`.
#[derive(Clone, Debug)]
pub struct CompatCert {
    pub technique: Technique,
    pub transformer: Transformer,
    pub status: CompatStatus,
    pub checked_budget: usize,
    /// Arguments `P` with `T(ΦP) ⊄ Φ(TP)` when the check failed.
    pub witness: Vec<Predicate>,
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct CompatOptions {
    pub budget: usize,
    pub causality_depth: usize,
    pub samples: usize,
    pub seed: u64,
    /// Probe elements for carriers that cannot be enumerated.
    pub probes: Option<Vec<Elem>>,
}

impl Default for CompatOptions {
    fn default() -> Self {
        CompatOptions {
            budget: DEFAULT_BUDGET,
            causality_depth: DEFAULT_CAUSALITY_DEPTH,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            probes: None,
        }
    }
}

/// First element with `T(ΦP₁, …, ΦPₙ) ⊄ Φ(T(P₁, …, Pₙ))`.
pub fn rho_violation(t: &Technique, phi: &Transformer, args: &[Predicate], probes: Option<&[Elem]>) -> Result<Option<Elem>> {
    let images: Vec<Predicate> = args.iter().map(|p| phi.apply(p)).collect::<Result<_>>()?;
    let lhs = t.apply(&images)?;
    let rhs = phi.apply(&t.apply(args)?)?;
    fibre::first_violation(&lhs, &rhs, probes)
}

fn witness_text(args: &[Predicate], x: &Elem) -> String {
    let ps: Vec<String> = args.iter().map(|p| format!("P={p}")).collect();
    format!("{} at {x}", ps.join(", "))
}

fn cert(t: &Technique, phi: &Transformer, status: CompatStatus, budget: usize, witness: Vec<Predicate>, note: &str) -> CompatCert {
    CompatCert { technique: t.clone(), transformer: phi.clone(), status, checked_budget: budget, witness, note: note.into() }
}

/// Certifies `T Φ ≤ Φ T`.
///
/// Order of attempts: exhaustive search over all predicates on a finite
/// Boolean carrier within budget; the structural causality argument for
/// context closures on stream terms; otherwise a sampled check.
pub fn check_compatible(t: &Technique, phi: &Transformer, opts: &CompatOptions) -> Result<CompatCert> {
    if opts.budget == 0 {
        return Err(Error::Budget(format!("no budget to check {} against {}", t.name(), phi.name())));
    }
    let carrier = phi.carrier();
    if let TechniqueKind::Identity = t.kind {
        return Ok(cert(t, phi, CompatStatus::ProvedExhaustive, 0, vec![], "identity"));
    }
    if phi.fibre() == Fibre::Pred && carrier.is_tabulable() {
        let n = carrier.len().unwrap_or(usize::MAX);
        let tuple_bits = n.saturating_mul(t.arity());
        if tuple_bits < 63 && (1usize << tuple_bits) <= opts.budget {
            return exhaustive(t, phi, t.arity(), opts.budget);
        }
        if t.arity() > 1 && n < 63 && (1usize << n) <= opts.budget {
            return exhaustive(&diagonal_technique(t), phi, 1, opts.budget).map(|mut c| {
                c.technique = t.clone();
                c.note = "checked on the diagonal".into();
                c
            });
        }
    }
    if let TechniqueKind::Context { system, ctx } = &t.kind {
        if let Some(reason) = causality_argument(system, ctx, phi, opts.causality_depth)? {
            return Ok(cert(t, phi, CompatStatus::ProvedCausality, opts.causality_depth, vec![], &reason));
        }
    }
    sampled(t, phi, opts)
}

fn exhaustive(t: &Technique, phi: &Transformer, arity: usize, budget: usize) -> Result<CompatCert> {
    let elems = phi.carrier().elements()?;
    let subsets: Vec<Predicate> = transformer::all_subsets(phi.carrier())?;
    let images: Vec<Predicate> = subsets.iter().map(|p| phi.apply(p)).collect::<Result<_>>()?;
    let count = subsets.len().pow(arity as u32);
    for code in 0..count {
        let mut idx = Vec::with_capacity(arity);
        let mut c = code;
        for _ in 0..arity {
            idx.push(c % subsets.len());
            c /= subsets.len();
        }
        let args: Vec<Predicate> = idx.iter().map(|&i| subsets[i].clone()).collect();
        let imgs: Vec<Predicate> = idx.iter().map(|&i| images[i].clone()).collect();
        let lhs = t.apply(&imgs)?;
        let rhs = phi.apply(&t.apply(&args)?)?;
        if let Some(x) = fibre::first_violation(&lhs, &rhs, None)? {
            let status = CompatStatus::Failed { witness: witness_text(&args, &x) };
            return Ok(cert(t, phi, status, budget, args, ""));
        }
    }
    let note = format!("all {count} argument tuples over {} elements", elems.len());
    Ok(cert(t, phi, CompatStatus::ProvedExhaustive, budget, vec![], &note))
}

/// The structural argument for a context `C` against a stream transformer
/// whose lifting is `cond₁(head) ∧ … ∧ rec`: `C` is causal, commutes with
/// the syntactic tail, and maps heads satisfying each `condᵢ` to heads
/// satisfying it. Then `t ∈ Φ(P)` gives `C[t] ∈ Φ(C(P))`.
fn causality_argument(system: &Arc<SdeSystem>, ctx: &Term, phi: &Transformer, depth: usize) -> Result<Option<String>> {
    let Some(sys) = phi.coalgebra().system() else { return Ok(None) };
    if !Arc::ptr_eq(sys, system) || phi.fibre() != Fibre::Pred || phi.lifting().mode != LiftMode::Predicate {
        return Ok(None);
    }
    let LiftRule::Expr(body) = &phi.lifting().rule else { return Ok(None) };
    if system.causality_check(ctx, depth)?.is_some() {
        return Ok(None);
    }
    let tail_shape = system.normalize(&system.tail_of(ctx)?)? == ctx.fill(&Term::tail(Term::Hole));
    if !tail_shape {
        return Ok(None);
    }
    let Some((a, b)) = system.affine_head(ctx)? else { return Ok(None) };
    let conjuncts = body.conjuncts();
    if conjuncts.iter().filter(|c| ***c == LiftExpr::Rec).count() != 1 {
        return Ok(None);
    }
    for c in conjuncts {
        if *c == LiftExpr::Rec {
            continue;
        }
        let Some((op, bound)) = head_condition(c) else { return Ok(None) };
        if !preserves(op, &bound, &a, &b) {
            return Ok(None);
        }
    }
    Ok(Some(format!("causal to depth {depth}; tail commutes; head map {a} + {b}*x preserves the head condition")))
}

/// `head ⋈ c` in either orientation.
fn head_condition(e: &LiftExpr) -> Option<(CmpOp, Rational)> {
    match e {
        LiftExpr::Cmp(op, l, r) => match (l.as_ref(), r.as_ref()) {
            (LiftExpr::Head, LiftExpr::Num(c)) => Some((*op, c.clone())),
            (LiftExpr::Num(c), LiftExpr::Head) => Some((op.flip(), c.clone())),
            _ => None,
        },
        _ => None,
    }
}

/// Does `x ⋈ c` imply `a + b·x ⋈ c` for every rational `x`?
fn preserves(op: CmpOp, c: &Rational, a: &Rational, b: &Rational) -> bool {
    let fc = a + b * c;
    if b.is_zero() {
        return op.eval(a, c);
    }
    match op {
        CmpOp::Eq | CmpOp::Ne => fc == *c,
        CmpOp::Gt | CmpOp::Ge => *b > Rational::zero() && fc >= *c,
        CmpOp::Lt | CmpOp::Le => *b > Rational::zero() && fc <= *c,
    }
}

fn sample_candidates(phi: &Transformer, opts: &CompatOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Predicate>> {
    let carrier = phi.carrier();
    let fib = phi.fibre();
    let mut out = vec![Predicate::top(carrier, fib), Predicate::bottom(carrier, fib)];
    let ch = transformer::final_chain(phi);
    for n in 1..6 {
        out.push(ch.at(n)?);
    }
    if carrier.is_enumerable() {
        let elems = carrier.elements()?;
        for _ in 0..opts.samples {
            let p = match fib {
                Fibre::Pred => Predicate::subset(carrier, elems.iter().filter(|_| rng.gen_bool(0.5)).cloned())?,
                Fibre::QPred => Predicate::valuation(
                    carrier,
                    elems.iter().map(|x| (x.clone(), Rational::new(rng.gen_range(0..=8i64).into(), 8.into()))),
                )?,
            };
            out.push(p);
        }
    }
    Ok(out)
}

fn sampled(t: &Technique, phi: &Transformer, opts: &CompatOptions) -> Result<CompatCert> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let candidates = sample_candidates(phi, opts, &mut rng)?;
    let probes = opts.probes.as_deref();
    if probes.is_none() && !phi.carrier().is_enumerable() {
        return Err(Error::NoProbes(phi.carrier().to_string()));
    }
    let mut checked = 0;
    for i in 0..candidates.len() {
        let args: Vec<Predicate> = (0..t.arity()).map(|k| candidates[(i + k) % candidates.len()].clone()).collect();
        checked += 1;
        if let Some(x) = rho_violation(t, phi, &args, probes)? {
            let status = CompatStatus::Failed { witness: witness_text(&args, &x) };
            return Ok(cert(t, phi, status, opts.budget, args, ""));
        }
    }
    Ok(cert(t, phi, CompatStatus::Sampled { samples: checked }, opts.budget, vec![], "no counterexample among samples"))
}

/// `T̂(ch Φ) ⊑ ch Φ`, built by iteration on the index: `T(⊤) ≤ ⊤` at 0, and
/// at `n+1` the instance `T(Φ chₙ) ≤ Φ(T chₙ)` of `ρ` followed by `Φ`
/// applied to the previous component.
pub fn chain_morphism(cert: &CompatCert, depth: usize, probes: Option<&[Elem]>) -> Result<ChainMorphismCert> {
    if cert.status.is_failed() {
        return Err(Error::Invalid(format!(
            "technique {} is not compatible with {}: {}",
            cert.technique.name(),
            cert.transformer.name(),
            cert.status
        )));
    }
    let (t, phi) = (&cert.technique, &cert.transformer);
    let ch = transformer::final_chain(phi);
    let tt = t.clone();
    let source = Chain::pointwise(&ch, &format!("{}^ {}", t.name(), ch.label()), move |p| tt.apply_diag(p));
    let top = Predicate::top(phi.carrier(), phi.fibre());
    let mut failure = fibre::first_violation(&source.at(0)?, &top, probes)?
        .map(|x| Failure { index: 0, element: Some(x), note: "finality".into() });
    for n in 0..depth {
        if failure.is_some() {
            break;
        }
        let ch_n = ch.at(n)?;
        let t_ch_n = source.at(n)?;
        let rho_l = t.apply_diag(&phi.apply(&ch_n)?)?;
        let rho_r = phi.apply(&t_ch_n)?;
        let steps = [
            (rho_l.clone(), rho_r.clone(), "rho"),
            (rho_r, phi.apply(&ch_n)?, "monotonicity"),
            (source.at(n + 1)?, ch.at(n + 1)?, "inclusion"),
        ];
        for (l, r, note) in steps {
            if let Some(x) = fibre::first_violation(&l, &r, probes)? {
                failure = Some(Failure { index: n + 1, element: Some(x), note: note.into() });
                break;
            }
        }
    }
    Ok(ChainMorphismCert {
        source,
        target: ch,
        checked_depth: depth,
        ok: failure.is_none(),
        first_failure: failure,
        sampled: !cert.status.is_proved(),
    })
}

// ---------------------------------------------------------------------------
// Local compatibility from global compatibility
// ---------------------------------------------------------------------------

/// Result of checking a global technique against a lifting.
#[derive(Clone, Debug)]
pub struct LocalCompat {
    pub technique: Technique,
    pub lifting: Lifting,
    pub status: CompatStatus,
    pub instances: usize,
}

impl LocalCompat {
    /// The fibre-level certificate for `Φ = c* ∘ G`.
    pub fn for_transformer(&self, phi: &Transformer) -> Result<CompatCert> {
        if phi.lifting() != &self.lifting {
            return Err(Error::Invalid(format!("{} does not use lifting {}", phi.name(), self.lifting.name)));
        }
        let status = if self.status.is_failed() { self.status.clone() } else { CompatStatus::DerivedFromGlobal };
        Ok(cert(&self.technique, phi, status, self.instances, vec![], "lifting of a global technique"))
    }
}

/// A sample instance: a finite carrier and a functor with finite constants.
pub struct GlobalSample {
    pub carrier: Carrier,
    pub functor: Functor,
}

/// Checks monotonicity and then `T(G P) ≤ G(T P)` for every predicate `P` on
/// each sample carrier.
pub fn derive_local_compat(t: &Technique, lifting: &Lifting, samples: &[GlobalSample]) -> Result<LocalCompat> {
    if !matches!(t.kind, TechniqueKind::Global(_) | TechniqueKind::Identity) {
        return Err(Error::Invalid(format!("technique {} is not defined uniformly over carriers", t.name())));
    }
    let mut instances = 0;
    let result = |status, instances| LocalCompat { technique: t.clone(), lifting: lifting.clone(), status, instances };
    for s in samples {
        let base = match lifting.mode {
            LiftMode::Predicate => s.carrier.clone(),
            LiftMode::Relation => Carrier::square(&s.carrier),
        };
        let preds = transformer::all_subsets(&base)?;
        // Monotonicity gate.
        let images: Vec<Predicate> = preds.iter().map(|p| t.apply(std::slice::from_ref(p))).collect::<Result<_>>()?;
        for i in 0..preds.len() {
            for j in 0..preds.len() {
                if i & j == i {
                    if let Some(x) = fibre::first_violation(&images[i], &images[j], None)? {
                        let w = format!("not monotone: {} <= {} but T differs at {x}", preds[i], preds[j]);
                        return Ok(result(CompatStatus::Failed { witness: w }, instances));
                    }
                }
            }
        }
        let fx = Carrier::finite(s.functor.apply_elems(&s.carrier.elements()?, crate::functor::DEFAULT_SIZE_BOUND)?);
        let lifted_base = match lifting.mode {
            LiftMode::Predicate => fx.clone(),
            LiftMode::Relation => Carrier::square(&fx),
        };
        for p in &preds {
            instances += 1;
            let g = |q: &Predicate| lift_on(lifting, &s.functor, &lifted_base, q);
            let lhs = t.apply(&[g(p)?])?;
            let rhs = g(&t.apply(std::slice::from_ref(p))?)?;
            if let Some(x) = fibre::first_violation(&lhs, &rhs, None)? {
                return Ok(result(CompatStatus::Failed { witness: format!("P={p} at {x}") }, instances));
            }
        }
    }
    Ok(result(CompatStatus::ProvedExhaustive, instances))
}

/// `G(P)` as a predicate over `F X` (or its square).
fn lift_on(lifting: &Lifting, f: &Functor, base: &Carrier, p: &Predicate) -> Result<Predicate> {
    let (l, f, p) = (lifting.clone(), f.clone(), p.clone());
    Predicate::tabulate(base, lifting.fibre, move |v| match l.mode {
        LiftMode::Predicate => l.lift(&f, v, &|y| p.degree(y)),
        LiftMode::Relation => {
            let (a, b) = v.as_pair().ok_or_else(|| Error::Shape(format!("{v} is not a pair")))?;
            l.lift_rel(&f, a, b, &|x, y| p.degree(&Elem::pair(x.clone(), y.clone())))
        }
    })
}

/// Converse closure `R ∪ R^op`, uniform over carriers.
pub fn converse_closure() -> Technique {
    Technique::global("converse", |r| fibre::join(r, &converse(r)?))
}

/// Complement, used to exercise the monotonicity gate.
pub fn complement() -> Technique {
    Technique::global("complement", |p| {
        let q = p.clone();
        Predicate::tabulate(p.carrier(), p.fibre(), move |x| {
            let d = q.degree(x)?;
            Ok(match d {
                Degree::Bool(b) => Degree::Bool(!b),
                Degree::Quant(r) => Degree::Quant(Rational::from_integer(1.into()) - r),
            })
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::int;
    use crate::fibre::Fibre;
    use crate::sde::{HeadExpr, StreamOp};
    use crate::transformer::{Coalgebra, LiftExpr};

    fn gt0() -> Lifting {
        Lifting::expr(
            "gt0",
            LiftExpr::And(vec![
                LiftExpr::Cmp(CmpOp::Gt, Box::new(LiftExpr::Head), Box::new(LiftExpr::Num(int(0)))),
                LiftExpr::Rec,
            ]),
        )
        .unwrap()
    }

    fn running() -> (Arc<SdeSystem>, Transformer) {
        let mut sys = SdeSystem::new();
        sys.declare_op("oplus", true, 2).unwrap();
        sys.declare_op("odd", false, 1).unwrap();
        sys.declare_op("neg", true, 1).unwrap();
        sys.define("one", HeadExpr::Lit(int(1)), Term::name("one")).unwrap();
        sys.define("s", HeadExpr::Lit(int(1)), Term::op(StreamOp::Oplus, vec![Term::name("one"), Term::name("s")]))
            .unwrap();
        let sys = Arc::new(sys);
        let c = Coalgebra::streams("S", sys.clone());
        (sys, Transformer::new("phi", &c, &gt0()).unwrap())
    }

    #[test]
    fn context_closure_is_proved_by_causality() {
        let (sys, phi) = running();
        let c = Technique::context("C", sys.clone(), Term::op(StreamOp::Oplus, vec![Term::name("one"), Term::Hole])).unwrap();
        let cert = check_compatible(&c, &phi, &CompatOptions::default()).unwrap();
        assert_eq!(cert.status, CompatStatus::ProvedCausality);
        let probes = transformer::stream_probes(&sys, 3).unwrap();
        let m = chain_morphism(&cert, 16, Some(&probes)).unwrap();
        assert!(m.ok && !m.sampled);

        let neg = Technique::context("N", sys.clone(), Term::op(StreamOp::Neg, vec![Term::Hole])).unwrap();
        let opts = CompatOptions { probes: Some(probes.clone()), ..CompatOptions::default() };
        let cert = check_compatible(&neg, &phi, &opts).unwrap();
        assert!(!cert.status.is_proved());
    }

    #[test]
    fn constant_top_fails_on_empty() {
        // Output -1 at y, so Φ(⊤) = {x}.
        let (x, y) = (Elem::atom("x"), Elem::atom("y"));
        let c = Coalgebra::automaton("A", &[(x.clone(), int(1), y.clone()), (y.clone(), int(-1), x)]).unwrap();
        let phi = Transformer::new("gt0", &c, &gt0()).unwrap();
        let top = Technique::custom("top", 1, |args| Ok(Predicate::top(args[0].carrier(), Fibre::Pred)));
        let cert = check_compatible(&top, &phi, &CompatOptions::default()).unwrap();
        assert!(cert.status.is_failed());
        assert!(cert.witness[0].members().unwrap().is_empty());
        assert!(check_compatible(&Technique::identity(), &phi, &CompatOptions::default()).unwrap().status.is_proved());
        let zero = CompatOptions { budget: 0, ..CompatOptions::default() };
        assert!(matches!(check_compatible(&top, &phi, &zero), Err(Error::Budget(_))));
    }

    #[test]
    fn diagonal() {
        let c = Carrier::atoms(&["p", "q"]);
        let rel = Carrier::square(&c);
        let r = Predicate::subset(&rel, [Elem::pair(Elem::atom("p"), Elem::atom("q")), Elem::pair(Elem::atom("q"), Elem::atom("p"))]).unwrap();
        let t = Technique::transitive("trans");
        let d = diagonal_technique(&t);
        assert_eq!(d.arity(), 1);
        assert!(fibre::equal(&d.apply(std::slice::from_ref(&r)).unwrap(), &relational_composition(&r, &r).unwrap(), None).unwrap());
        let id = Technique::identity();
        assert_eq!(diagonal_technique(&id).arity(), 1);
        let u = diagonal_technique(&Technique::union("u", 2));
        assert!(fibre::equal(&u.apply(std::slice::from_ref(&r)).unwrap(), &r, None).unwrap());
    }

    #[test]
    fn local_from_global() {
        let bisim = Lifting::canonical("bisim", LiftMode::Relation, Fibre::Pred);
        let samples: Vec<GlobalSample> = (1..=3)
            .flat_map(|n| {
                (1..=2).map(move |k| GlobalSample {
                    carrier: Carrier::finite((0..n).map(|i| Elem::Num(int(i)))),
                    functor: Functor::stream(Functor::constant((0..k).map(|i| Elem::atom(&format!("a{i}"))))),
                })
            })
            .collect();
        let ok = derive_local_compat(&converse_closure(), &bisim, &samples).unwrap();
        assert_eq!(ok.status, CompatStatus::ProvedExhaustive);
        let bad = derive_local_compat(&complement(), &bisim, &samples).unwrap();
        assert!(matches!(bad.status, CompatStatus::Failed { ref witness } if witness.starts_with("not monotone")));
        let id = derive_local_compat(&Technique::identity(), &bisim, &samples).unwrap();
        assert!(id.status.is_proved());
    }
}
