//! Invariant suites run by `laterproof selftest`.

use serde::Serialize;

use crate::chain::{self, Chain};
use crate::elem::Elem;
use crate::error::Result;
use crate::fibre::{self, Carrier};
use crate::logic::{check_proof, CheckOptions};
use crate::syntax::proof::parse_proof;
use crate::syntax::system::parse_system;
use crate::transformer::{all_subsets, nu_oracle, step_check, stream_probes};
use crate::upto::{chain_morphism, CompatOptions};

/// The stream system of the running example.
pub const STREAM_SYSTEM: &str = "\
(sde one (head 1) (tail one))
(sde s (head 1) (tail (oplus one s)))
(lifting gt0 (and (> head 0) rec))
(coalgebra S stream)
(chain PHI (transformer gt0 S))
(technique C context (oplus one _))
";

/// Its proof script: `s` is positive everywhere.
pub const STREAM_PROOF: &str = "\
(goal (in s PHI))
(proof (lob IH (step (later-functor (later-and (next (atom)) (rewrite s (upto C (axiom IH))))))))
";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    pub failures: usize,
    /// First failure, if any.
    pub note: String,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    checked: usize,
    failures: usize,
    note: String,
}

impl Tally {
    fn new(name: &'static str) -> Tally {
        Tally { name, checked: 0, failures: 0, note: String::new() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.note.is_empty() {
                self.note = what();
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult { name: self.name, checked: self.checked, failures: self.failures, note: self.note }
    }
}

fn guard(name: &'static str, f: impl FnOnce(&mut Tally) -> Result<()>) -> SuiteResult {
    let mut tally = Tally::new(name);
    if let Err(e) = f(&mut tally) {
        tally.failures += 1;
        tally.note = format!("error: {e}");
    }
    tally.finish()
}

/// All Boolean descending chains of `len` explicit entries over `carrier`.
pub fn descending_chains(carrier: &Carrier, len: usize) -> Result<Vec<Chain>> {
    let subsets = all_subsets(carrier)?;
    let mut seqs: Vec<Vec<usize>> = (0..subsets.len()).map(|i| vec![i]).collect();
    for _ in 1..len {
        seqs = seqs
            .into_iter()
            .flat_map(|seq| {
                let last = *seq.last().expect("nonempty");
                (0..subsets.len()).filter(move |&m| m & last == m).map(move |m| {
                    let mut next = seq.clone();
                    next.push(m);
                    next
                })
            })
            .collect();
    }
    seqs.into_iter().map(|seq| Chain::explicit(seq.into_iter().map(|i| subsets[i].clone()).collect())).collect()
}

fn small_carriers() -> Vec<Carrier> {
    vec![Carrier::atoms(&["a"]), Carrier::atoms(&["a", "b"])]
}

fn currying(t: &mut Tally) -> Result<()> {
    let depth = 3;
    for carrier in small_carriers() {
        let chains = descending_chains(&carrier, depth)?;
        for h in &chains {
            for s in &chains {
                let hs = chain::product(h, s)?;
                for u in &chains {
                    let us = chain::exponential(s, u)?;
                    for n in 0..depth {
                        let left = chain::entails(&hs, u, n, None)?.ok;
                        let right = chain::entails(h, &us, n, None)?.ok;
                        t.record(left == right, || format!("index {n} on {carrier}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn loeb(t: &mut Tally) -> Result<()> {
    for carrier in small_carriers() {
        for s in descending_chains(&carrier, 3)? {
            let cert = chain::loeb(&s, 4, None)?;
            t.record(cert.ok, || format!("loeb certificate on {carrier}"));
            t.record(chain::loeb_rule(&s, 4, None)?, || format!("loeb rule on {carrier}"));
        }
    }
    Ok(())
}

fn later_distribution(t: &mut Tally) -> Result<()> {
    for carrier in small_carriers() {
        let chains = descending_chains(&carrier, 3)?;
        for s in &chains {
            t.record(chain::next(s, 4, None)?.ok, || "next".into());
            for u in &chains {
                t.record(chain::later_preserves_products_check(s, u, 4, None)?, || "later of products".into());
                t.record(chain::later_impl_distr(s, u, 4, None)?.ok, || "later of exponentials".into());
            }
        }
    }
    Ok(())
}

const LTS_SYSTEM: &str = "\
(lifting B bisim)
(coalgebra L lts ((p a q) (q a p) (r b r)))
(chain BIS (transformer B L))
(technique TR transitive BIS)
(technique CV converse BIS)
";

fn step_theorem(t: &mut Tally) -> Result<()> {
    let streams = parse_system(STREAM_SYSTEM).map_err(syntax)?;
    let probes = stream_probes(streams.sde(), 4)?;
    let phi = streams.transformer("PHI").expect("declared");
    let fail = step_check(phi, 16, Some(&probes))?;
    t.record(fail.is_none(), || format!("streams: {}", fail.map(|f| f.to_string()).unwrap_or_default()));
    let lts = parse_system(LTS_SYSTEM).map_err(syntax)?;
    let fail = step_check(lts.transformer("BIS").expect("declared"), 16, None)?;
    t.record(fail.is_none(), || format!("lts: {}", fail.map(|f| f.to_string()).unwrap_or_default()));
    Ok(())
}

fn limits(t: &mut Tally) -> Result<()> {
    let lts = parse_system(LTS_SYSTEM).map_err(syntax)?;
    let phi = lts.transformer("BIS").expect("declared");
    let limit = chain::chain_limit(&crate::transformer::final_chain(phi), 1, chain::DEFAULT_LIMIT_BOUND)?;
    let nu = nu_oracle(phi)?;
    t.record(fibre::equal(&limit, &nu, None)?, || "chain limit differs from the greatest fixed point".into());
    let bisimilar = |x: &str, y: &str| nu.holds(&Elem::pair(Elem::atom(x), Elem::atom(y)));
    t.record(bisimilar("p", "q")?, || "p and q should be bisimilar".into());
    t.record(!bisimilar("p", "r")?, || "p and r should differ".into());
    Ok(())
}

fn upto_soundness(t: &mut Tally) -> Result<()> {
    let systems = [(STREAM_SYSTEM, "PHI", vec!["C"]), (LTS_SYSTEM, "BIS", vec!["TR", "CV"])];
    for (text, chain_name, techniques) in systems {
        let sys = parse_system(text).map_err(syntax)?;
        let probes = if sys.sde().names().next().is_some() { Some(stream_probes(sys.sde(), 4)?) } else { None };
        let opts = CompatOptions { probes: probes.clone(), ..CompatOptions::default() };
        for name in techniques {
            let cert = sys.compat(name, chain_name, &opts)?;
            t.record(cert.status.is_proved(), || format!("{name}: {}", cert.status));
            let morphism = chain_morphism(&cert, 16, probes.as_deref())?;
            t.record(morphism.ok, || format!("{name}: {:?}", morphism.first_failure));
        }
    }
    Ok(())
}

fn running_example(t: &mut Tally) -> Result<()> {
    let sys = parse_system(STREAM_SYSTEM).map_err(syntax)?;
    let script = parse_proof(STREAM_PROOF).map_err(syntax)?;
    for semantic in [None, Some(64)] {
        let report = check_proof(&sys, &script, &CheckOptions { semantic, ..CheckOptions::default() });
        t.record(report.ok, || report.first_problem().map(|e| format!("{}: {}", e.path, e.message)).unwrap_or_default());
    }
    for n in 0..64 {
        let v = sys.sde().nth("s", n)?;
        t.record(v == crate::elem::Rational::from_integer((n as i64 + 1).into()), || format!("s_{n} = {v}"));
    }
    Ok(())
}

fn syntax(e: crate::syntax::SyntaxError) -> crate::Error {
    crate::Error::Invalid(e.to_string())
}

/// Runs every suite in a fixed order.
pub fn run_all() -> Vec<SuiteResult> {
    vec![
        guard("currying", currying),
        guard("loeb", loeb),
        guard("later-distribution", later_distribution),
        guard("step", step_theorem),
        guard("limits", limits),
        guard("upto", upto_soundness),
        guard("example", running_example),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descending_chain_counts() {
        // Chains P0 ⊇ P1 ⊇ P2 over n points: 4^n.
        assert_eq!(descending_chains(&Carrier::atoms(&["a"]), 3).unwrap().len(), 4);
        assert_eq!(descending_chains(&Carrier::atoms(&["a", "b"]), 3).unwrap().len(), 16);
    }

    #[test]
    fn suites_pass() {
        for r in run_all() {
            assert!(r.ok(), "{r:?}");
            assert!(r.checked > 0, "{r:?}");
        }
    }
}
