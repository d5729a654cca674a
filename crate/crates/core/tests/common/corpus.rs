//! Random sequents shaped for each proof rule, over small systems whose
//! carriers are finite (plus the stream system for the stream-only rules).

use laterproof_core::logic::{apply_rule, semantic_validate, ElemTerm, Formula, RuleOptions, Rule, Sequent};
use laterproof_core::logic::rules::well_formed;
use laterproof_core::syntax::proof::{parse_elem, parse_formula};
use laterproof_core::syntax::parse_sexps;
use laterproof_core::syntax::system::{parse_system, System};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FINITE_SYSTEM: &str = "\
(carrier D finite (a b c))
(carrier Z finite ())
(coalgebra A automaton ((x0 1 x1) (x1 0 x2) (x2 1 x0) (y0 1 y1) (y1 1 y0)))
(lifting pos (and (> head 0) rec))
(chain P (transformer pos A))
(chain E (explicit D (a b c) (a b) (a)))
(chain F (explicit A (x0 x1 x2 y0 y1) (x0 y0 y1) (y0 y1)))
(coalgebra L lts ((p a q) (q a p) (r a r) (r b r)))
(lifting B bisim)
(chain BIS (transformer B L))
(technique TR transitive BIS)
(technique CV converse BIS)
(technique ID identity)
";

pub const STREAM_SYSTEM: &str = "\
(carrier D finite (a b))
(sde one (head 1) (tail one))
(sde s (head 1) (tail (oplus one s)))
(sde t (head 1) (tail u))
(sde u (head -1) (tail one))
(lifting gt0 (and (> head 0) rec))
(coalgebra S stream)
(chain PHI (transformer gt0 S))
(chain E (explicit D (a b) (a)))
(technique C context (oplus one _))
";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sort {
    D,
    A,
    L,
    Z,
    Stream,
}

impl Sort {
    fn name(self) -> &'static str {
        match self {
            Sort::D => "D",
            Sort::A => "A",
            Sort::L => "L",
            Sort::Z => "Z",
            Sort::Stream => "S",
        }
    }
}

pub fn parse_f(text: &str) -> Formula {
    let sx = parse_sexps(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    parse_formula(&sx[0]).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn parse_e(text: &str) -> ElemTerm {
    let sx = parse_sexps(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    parse_elem(&sx[0]).unwrap_or_else(|e| panic!("{text}: {e}"))
}

type Env = Vec<(String, String)>;
type Hyps = Vec<(String, Formula)>;

/// Generator state: the variables in scope and a counter for fresh names.
pub struct Gen {
    pub rng: ChaCha8Rng,
    streams: bool,
    scope: Vec<(String, Sort)>,
    fresh: usize,
}

impl Gen {
    pub fn new(seed: u64, streams: bool) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), streams, scope: Vec::new(), fresh: 0 }
    }

    fn sorts(&self) -> Vec<Sort> {
        if self.streams {
            vec![Sort::D, Sort::Stream]
        } else {
            vec![Sort::D, Sort::A, Sort::L, Sort::Z]
        }
    }

    /// Sorts that may be quantified or put in the context.
    fn finite_sorts(&self) -> Vec<Sort> {
        self.sorts().into_iter().filter(|s| *s != Sort::Stream).collect()
    }

    fn fresh_var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> T {
        items.choose(&mut self.rng).expect("nonempty").clone()
    }

    fn var_of(&mut self, sort: Sort) -> Option<String> {
        let vars: Vec<String> = self.scope.iter().filter(|(_, s)| *s == sort).map(|(v, _)| v.clone()).collect();
        (!vars.is_empty()).then(|| self.pick(&vars))
    }

    /// An element term of `sort`, or `None` when the sort has no closed terms
    /// and no variable is in scope.
    fn term(&mut self, sort: Sort) -> Option<String> {
        if self.chance(0.5) {
            if let Some(v) = self.var_of(sort) {
                return Some(self.maybe_tail(sort, v));
            }
        }
        let base = match sort {
            Sort::D => self.pick(&["a", "b", "c"][..if self.streams { 2 } else { 3 }]).to_string(),
            Sort::A => self.pick(&["x0", "x1", "x2", "y0", "y1"]).to_string(),
            Sort::L => self.pick(&["p", "q", "r"]).to_string(),
            Sort::Z => return self.var_of(Sort::Z),
            Sort::Stream => {
                let base = self.pick(&["one", "s", "t", "u"]).to_string();
                if self.chance(0.2) {
                    format!("(oplus one {base})")
                } else {
                    base
                }
            }
        };
        Some(self.maybe_tail(sort, base))
    }

    fn maybe_tail(&mut self, sort: Sort, t: String) -> String {
        if matches!(sort, Sort::A | Sort::Stream) && self.chance(0.2) {
            format!("(tail {t})")
        } else {
            t
        }
    }

    fn chain_for(&mut self, sort: Sort) -> Option<String> {
        let options: &[&str] = match sort {
            Sort::D => &["E", "(later E)"],
            Sort::A => &["P", "(later P)", "(phi P P)", "(phi P (later P))", "F", "(later F)", "(phi P F)"],
            Sort::L => &["BIS", "(later BIS)", "(phi BIS BIS)", "(phi BIS (later BIS))"],
            Sort::Stream => &["PHI", "(later PHI)", "(phi PHI PHI)", "(phi PHI (later PHI))"],
            Sort::Z => return None,
        };
        Some(self.pick(options).to_string())
    }

    fn membership(&mut self) -> String {
        let sort = self.pick(&self.sorts());
        let Some(chain) = self.chain_for(sort) else { return self.fact() };
        let elem = if sort == Sort::L {
            let (Some(a), Some(b)) = (self.term(Sort::L), self.term(Sort::L)) else { return self.fact() };
            format!("(pair {a} {b})")
        } else {
            match self.term(sort) {
                Some(e) => e,
                None => return self.fact(),
            }
        };
        format!("(in {elem} {chain})")
    }

    /// A decidable base fact.
    pub fn fact(&mut self) -> String {
        let choice = self.rng.gen_range(0..6);
        match choice {
            0 => self.pick(&["true", "false"]).to_string(),
            1 => {
                let inner = self.fact();
                format!("(not {inner})")
            }
            2 if self.streams => {
                let t = self.term(Sort::Stream).expect("streams have closed terms");
                let k = self.rng.gen_range(0..3);
                let c = self.rng.gen_range(-1..3);
                format!("({} (nth {t} {k}) {c})", self.pick(&[">", ">=", "=", "<"]))
            }
            2 | 3 if !self.streams => {
                let t = self.term(Sort::A).expect("closed terms");
                format!("({} (head {t}) {})", self.pick(&[">", "=", "<="]), self.rng.gen_range(0..2))
            }
            3 => {
                let t = self.term(Sort::Stream).expect("closed terms");
                format!("(> (head {t}) 0)")
            }
            _ => {
                let sort = self.pick(&self.finite_sorts());
                match (self.term(sort), self.term(sort)) {
                    (Some(a), Some(b)) => format!("(eq {a} {b})"),
                    _ => "true".to_string(),
                }
            }
        }
    }

    /// A formula of at most `depth` connectives.
    pub fn formula(&mut self, depth: usize) -> String {
        if depth == 0 || self.chance(0.3) {
            return match self.rng.gen_range(0..20) {
                0 => "top".to_string(),
                1..=7 => self.fact(),
                _ => self.membership(),
            };
        }
        match self.rng.gen_range(0..6) {
            0 | 1 => format!("(later {})", self.formula(depth - 1)),
            2 => format!("(and {} {})", self.formula(depth - 1), self.formula(depth - 1)),
            3 => format!("(impl {} {})", self.formula(depth - 1), self.formula(depth - 1)),
            q => {
                let sort = self.pick(&self.finite_sorts());
                self.quantified(if q == 4 { "forall" } else { "exists" }, sort, depth - 1, |g, d| g.formula(d))
            }
        }
    }

    fn quantified(&mut self, q: &str, sort: Sort, depth: usize, body: impl FnOnce(&mut Gen, usize) -> String) -> String {
        let v = self.fresh_var();
        self.scope.push((v.clone(), sort));
        let b = body(self, depth);
        self.scope.pop();
        format!("({q} ({v} {}) {b})", sort.name())
    }

    /// A formula built from facts and propositional connectives only.
    pub fn static_formula(&mut self, depth: usize) -> String {
        if depth == 0 || self.chance(0.4) {
            return self.fact();
        }
        match self.rng.gen_range(0..4) {
            0 => format!("(and {} {})", self.static_formula(depth - 1), self.static_formula(depth - 1)),
            1 => format!("(impl {} {})", self.static_formula(depth - 1), self.static_formula(depth - 1)),
            q => {
                let sort = self.pick(&self.finite_sorts());
                self.quantified(if q == 2 { "forall" } else { "exists" }, sort, depth - 1, |g, d| g.static_formula(d))
            }
        }
    }

    /// A random context of variables and hypotheses, installed in scope.
    fn context(&mut self) -> (Env, Hyps) {
        self.scope.clear();
        let mut env = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            let sort = self.pick(&self.finite_sorts());
            if sort == Sort::Z {
                continue;
            }
            let v = self.fresh_var();
            self.scope.push((v.clone(), sort));
            env.push((v, sort.name().to_string()));
        }
        let hyps = (0..self.rng.gen_range(0..=2)).map(|i| (format!("h{i}"), parse_f(&self.formula(2)))).collect();
        (env, hyps)
    }

    fn sequent(&mut self, goal: impl FnOnce(&mut Gen) -> String) -> Sequent {
        let (env, hyps) = self.context();
        let goal = parse_f(&goal(self));
        Sequent { env, hyps, goal }
    }

    /// A sequent and rule instance aimed at `rule`.
    pub fn instance(&mut self, rule: &str) -> (Sequent, Rule) {
        match rule {
            "lob" => (self.sequent(|g| g.formula(3)), Rule::Lob("IH".into())),
            "step" => {
                let seq = self.sequent(|g| {
                    let chain = if g.streams { "PHI" } else { g.pick(&["P", "BIS"]) };
                    let elem = match chain {
                        "P" => g.term(Sort::A).unwrap(),
                        "BIS" => format!("(pair {} {})", g.term(Sort::L).unwrap(), g.term(Sort::L).unwrap()),
                        _ => g.term(Sort::Stream).unwrap(),
                    };
                    let ce = if g.chance(0.5) { chain.to_string() } else { format!("(later (phi {chain} {chain}))") };
                    g.embed(format!("(in {elem} {ce})"))
                });
                (seq, Rule::Step)
            }
            "next" => (self.sequent(|g| format!("(later {})", g.formula(2))), Rule::Next),
            "later-and" => {
                let seq = self.sequent(|g| {
                    if !g.streams && g.chance(0.3) {
                        let e = g.term(Sort::A).unwrap();
                        let c = g.pick(&["P", "(later P)", "F"]);
                        format!("(later (in {e} (phi P {c})))")
                    } else {
                        format!("(later (and {} {}))", g.formula(2), g.formula(2))
                    }
                });
                (seq, Rule::LaterAnd)
            }
            "later-impl" => {
                let seq = self.sequent(|g| format!("(impl (later {}) (later {}))", g.formula(2), g.formula(2)));
                (seq, Rule::LaterImpl)
            }
            "later-functor" => {
                let seq = self.sequent(|g| {
                    let m = g.membership();
                    let m = if g.chance(0.5) { format!("(later {m})") } else { m };
                    g.embed(m)
                });
                (seq, Rule::LaterFunctor)
            }
            "later-mono" => {
                let mut seq = self.sequent(|g| format!("(later {})", g.formula(2)));
                if self.chance(0.7) {
                    let h = parse_f(&format!("(later {})", self.formula(2)));
                    seq.hyps.push(("hl".into(), h));
                }
                (seq, Rule::LaterMono)
            }
            "later-forall" | "later-exists" => {
                let q = if rule == "later-forall" { "forall" } else { "exists" };
                let seq = self.sequent(|g| {
                    let sort = g.pick(&g.finite_sorts());
                    let outer = g.chance(0.5);
                    let body = g.quantified(q, sort, 2, |g, d| {
                        let f = g.formula(d);
                        if outer {
                            f
                        } else {
                            format!("(later {f})")
                        }
                    });
                    if outer {
                        format!("(later {body})")
                    } else {
                        body
                    }
                });
                let r = if rule == "later-forall" { Rule::LaterForall } else { Rule::LaterExists };
                (seq, r)
            }
            "upto" => self.upto_instance(),
            "rewrite" => {
                let seq = self.sequent(|g| {
                    let name = g.pick(&["s", "t", "u", "one"]);
                    let m = match g.rng.gen_range(0..3) {
                        0 => format!("(in (tail {name}) {})", g.chain_for(Sort::Stream).unwrap()),
                        1 => format!("(> (head (tail {name})) 0)"),
                        _ => format!("(in (oplus one (tail {name})) PHI)"),
                    };
                    g.embed(m)
                });
                let name = first_tail_name(&seq.goal.to_string()).unwrap_or_else(|| "s".into());
                (seq, Rule::Rewrite(name))
            }
            "unfold" => {
                let seq = self.sequent(|g| {
                    let e = g.term(Sort::A).unwrap();
                    let c = g.pick(&["P", "(later P)", "F"]);
                    g.embed(format!("(in {e} (phi P {c}))"))
                });
                (seq, Rule::Unfold)
            }
            "atom" => (self.sequent(|g| g.static_formula(2)), Rule::Atom),
            "axiom" => {
                let mut seq = self.sequent(|g| g.formula(2));
                let name = format!("h{}", seq.hyps.len());
                let hyp = if self.chance(0.8) { seq.goal.clone() } else { parse_f(&self.formula(2)) };
                seq.hyps.push((name.clone(), hyp));
                (seq, Rule::Axiom(name))
            }
            "axiom-top" => (self.sequent(|_| "top".into()), Rule::AxiomTop),
            "and-i" => (self.sequent(|g| format!("(and {} {})", g.formula(2), g.formula(2))), Rule::AndI),
            "and-e" => {
                let mut seq = self.sequent(|g| g.formula(2));
                let h = parse_f(&format!("(and {} {})", self.formula(2), self.formula(2)));
                seq.hyps.push(("hc".into(), h));
                (seq, Rule::AndE("hc".into(), "hl".into(), "hr".into()))
            }
            "impl-i" => (self.sequent(|g| format!("(impl {} {})", g.formula(2), g.formula(2))), Rule::ImplI("hi".into())),
            "impl-e" => {
                let mut seq = self.sequent(|g| g.formula(2));
                let h = parse_f(&format!("(impl {} {})", self.formula(2), seq.goal));
                seq.hyps.push(("hi".into(), h));
                (seq, Rule::ImplE("hi".into()))
            }
            "forall-i" => {
                let seq = self.sequent(|g| {
                    let sort = g.pick(&g.finite_sorts());
                    g.quantified("forall", sort, 2, |g, d| g.formula(d))
                });
                let v = self.fresh_var();
                (seq, Rule::ForallI(v))
            }
            "forall-e" => {
                let mut seq = self.sequent(|g| g.formula(2));
                let sort = self.pick(&self.finite_sorts());
                let h = self.quantified("forall", sort, 2, |g, d| g.formula(d));
                seq.hyps.push(("hf".into(), parse_f(&h)));
                let t = self.term(sort).unwrap_or_else(|| "a".into());
                (seq, Rule::ForallE("hf".into(), parse_e(&t), "hn".into()))
            }
            "exists-i" => {
                let mut sort = Sort::D;
                let seq = self.sequent(|g| {
                    sort = g.pick(&g.finite_sorts());
                    g.quantified("exists", sort, 2, |g, d| g.formula(d))
                });
                let t = self.term(sort).unwrap_or_else(|| "a".into());
                (seq, Rule::ExistsI(parse_e(&t)))
            }
            "weaken" => {
                let mut seq = self.sequent(|g| g.formula(2));
                let h = parse_f(&self.formula(2));
                seq.hyps.push(("hw".into(), h));
                (seq, Rule::Weaken("hw".into()))
            }
            other => panic!("no generator for {other}"),
        }
    }

    /// Places `f` inside a random positive or negative context.
    fn embed(&mut self, f: String) -> String {
        match self.rng.gen_range(0..5) {
            0 => format!("(and {f} {})", self.formula(1)),
            1 => format!("(impl {} {f})", self.formula(1)),
            2 => format!("(later {f})"),
            3 => format!("(impl {f} {})", self.formula(1)),
            _ => f,
        }
    }

    fn upto_instance(&mut self) -> (Sequent, Rule) {
        let laters = self.rng.gen_range(0..3);
        let wrap = |f: String| (0..laters).fold(f, |acc, _| format!("(later {acc})"));
        if self.streams {
            let seq = self.sequent(|g| {
                let e = g.term(Sort::Stream).unwrap();
                wrap(format!("(in (oplus one {e}) PHI)"))
            });
            return (seq, Rule::Upto("C".into(), None));
        }
        let technique = self.pick(&["TR", "CV", "ID"]);
        let mut via = None;
        let seq = self.sequent(|g| {
            let (a, b) = (g.term(Sort::L).unwrap(), g.term(Sort::L).unwrap());
            if technique == "TR" {
                via = g.term(Sort::L);
            }
            wrap(format!("(in (pair {a} {b}) BIS)"))
        });
        (seq, Rule::Upto(technique.into(), via.map(|v| parse_e(&v))))
    }
}

fn first_tail_name(text: &str) -> Option<String> {
    let at = text.find("(tail ")?;
    let rest = &text[at + 6..];
    let end = rest.find([' ', ')'])?;
    Some(rest[..end].to_string())
}

pub const RULES: [&str; 23] = [
    "lob", "step", "next", "later-and", "later-impl", "later-functor", "later-mono", "later-forall", "later-exists",
    "upto", "rewrite", "unfold", "atom", "axiom", "axiom-top", "and-i", "and-e", "impl-i", "impl-e", "forall-i",
    "forall-e", "exists-i", "weaken",
];

/// Rules that need the stream system.
pub fn uses_streams(rule: &str, i: usize) -> bool {
    rule == "rewrite" || (rule == "upto" && i.is_multiple_of(4))
}

#[derive(Debug, Default)]
pub struct RuleTally {
    /// Instances where the rule applied.
    pub applied: usize,
    /// Of those, instances whose premises all validated.
    pub premises_valid: usize,
    pub unsound: Vec<String>,
    pub attempts: usize,
}

pub struct Systems {
    pub finite: System,
    pub streams: System,
}

impl Systems {
    pub fn load() -> Systems {
        Systems { finite: parse_system(FINITE_SYSTEM).unwrap(), streams: parse_system(STREAM_SYSTEM).unwrap() }
    }
}

fn valid(sys: &System, seq: &Sequent, depth: usize) -> Result<bool, String> {
    semantic_validate(sys, seq, depth).map(|r| r.is_none()).map_err(|e| format!("{seq}: {e}"))
}

/// Generates `count` applicable instances of `rule` and checks that valid
/// premises give a valid conclusion at `depth`.
pub fn check_rule(systems: &Systems, rule: &str, count: usize, depth: usize, seed: u64) -> Result<RuleTally, String> {
    let mut tally = RuleTally::default();
    let opts = RuleOptions::default();
    let mut i = 0;
    while tally.applied < count {
        tally.attempts += 1;
        if tally.attempts > count * 50 {
            return Err(format!("{rule}: only {} applicable instances in {} attempts", tally.applied, tally.attempts));
        }
        let streams = uses_streams(rule, i);
        i += 1;
        let sys = if streams { &systems.streams } else { &systems.finite };
        let mut g = Gen::new(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), streams);
        let (seq, r) = g.instance(rule);
        if well_formed(sys, &seq).is_err() {
            continue;
        }
        let Ok(premises) = apply_rule(sys, &seq, &r, &opts) else { continue };
        tally.applied += 1;
        let mut all_valid = true;
        for p in &premises {
            if well_formed(sys, p).is_err() || !valid(sys, p, depth)? {
                all_valid = false;
                break;
            }
        }
        if !all_valid {
            continue;
        }
        tally.premises_valid += 1;
        if !valid(sys, &seq, depth)? {
            tally.unsound.push(format!("{} on {seq}", r.name()));
        }
    }
    Ok(tally)
}
