mod common;

use laterproof_core::chain::{self, Chain};
use laterproof_core::fibre::{Carrier, Fibre, Predicate};
use laterproof_core::logic::denote::denote;
use laterproof_core::logic::{check_proof, semantic_validate, CheckOptions, NodeStatus, ProofNode, Rule, Sequent};
use laterproof_core::selftest::{STREAM_PROOF, STREAM_SYSTEM};
use laterproof_core::syntax::proof::parse_proof;
use laterproof_core::syntax::system::parse_system;
use proptest::prelude::*;

use common::corpus::{parse_f, Gen, Systems};
use common::{mask_at, mask_exp};

fn mask_chain(points: usize) -> impl Strategy<Value = Vec<u32>> {
    let full = (1u32 << points) - 1;
    prop::collection::vec(0..=full, 1..6).prop_map(|raw| {
        let mut acc = u32::MAX;
        raw.into_iter()
            .map(|m| {
                acc &= m;
                acc
            })
            .collect()
    })
}

fn chain_of(c: &Carrier, masks: &[u32]) -> Chain {
    let elems = c.elements().unwrap();
    let preds = masks
        .iter()
        .map(|&m| Predicate::subset(c, elems.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, x)| x.clone())).unwrap())
        .collect();
    Chain::explicit(preds).unwrap()
}

/// Replaces the `k`-th node in preorder, or unwraps it to its first child.
fn mutate(node: &ProofNode, k: &mut usize, replacement: &Option<Rule>) -> ProofNode {
    if *k == 0 {
        *k = usize::MAX;
        return match replacement {
            Some(r) => ProofNode::leaf(r.clone()),
            None => node.children.first().cloned().unwrap_or_else(|| ProofNode::leaf(Rule::Open)),
        };
    }
    *k -= 1;
    let children = node.children.iter().map(|c| mutate(c, k, replacement)).collect();
    ProofNode { rule: node.rule.clone(), children, span: node.span }
}

fn leaf_rule() -> impl Strategy<Value = Option<Rule>> {
    prop_oneof![
        Just(None),
        Just(Some(Rule::Atom)),
        Just(Some(Rule::AxiomTop)),
        Just(Some(Rule::Axiom("IH".into()))),
        Just(Some(Rule::Open)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn formulas_round_trip(seed in any::<u64>(), streams in any::<bool>()) {
        let mut g = Gen::new(seed, streams);
        let text = g.formula(3);
        let f = parse_f(&text);
        prop_assert_eq!(parse_f(&f.to_string()), f);
    }

    #[test]
    fn scripts_round_trip(k in 0usize..9, leaf in leaf_rule()) {
        let script = parse_proof(STREAM_PROOF).unwrap();
        let mut k = k;
        let mutated = laterproof_core::logic::ProofScript { goal: script.goal.clone(), proof: mutate(&script.proof, &mut k, &leaf) };
        prop_assert_eq!(parse_proof(&mutated.to_string()).unwrap(), mutated);
    }

    #[test]
    fn denoted_formulas_descend(seed in any::<u64>()) {
        let systems = Systems::load();
        let mut g = Gen::new(seed, false);
        let f = parse_f(&g.static_formula(3));
        let ch = denote(&systems.finite, &[], &f, Fibre::Pred).unwrap();
        prop_assert!(chain::antitone_violation(&ch, 12, None).unwrap().is_none());
    }

    #[test]
    fn currying_on_random_chains(h in mask_chain(3), s in mask_chain(3), t in mask_chain(3)) {
        let c = Carrier::atoms(&["a", "b", "c"]);
        let (hc, sc, tc) = (chain_of(&c, &h), chain_of(&c, &s), chain_of(&c, &t));
        let hs = chain::product(&hc, &sc).unwrap();
        let ts = chain::exponential(&sc, &tc).unwrap();
        for n in 0..6 {
            let left = chain::entails(&hs, &tc, n, None).unwrap().ok;
            let right = chain::entails(&hc, &ts, n, None).unwrap().ok;
            prop_assert_eq!(left, right);
            let expected = (0..=n).all(|m| mask_at(&h, m) & !mask_exp(&s, &t, m, 7) == 0);
            prop_assert_eq!(right, expected);
        }
    }

    #[test]
    fn later_then_loeb(s in mask_chain(2)) {
        let c = Carrier::atoms(&["a", "b"]);
        let sc = chain_of(&c, &s);
        prop_assert!(chain::entails(&sc, &chain::later(&sc), 6, None).unwrap().ok);
        prop_assert!(chain::loeb(&sc, 6, None).unwrap().ok);
    }

    #[test]
    fn report_verdicts_are_consistent(k in 0usize..9, leaf in leaf_rule(), depth in 1usize..10) {
        let sys = parse_system(STREAM_SYSTEM).unwrap();
        let script = parse_proof(STREAM_PROOF).unwrap();
        let mut k = k;
        let script = laterproof_core::logic::ProofScript { goal: script.goal.clone(), proof: mutate(&script.proof, &mut k, &leaf) };
        let syntactic = check_proof(&sys, &script, &CheckOptions::default());
        let semantic = check_proof(&sys, &script, &CheckOptions { semantic: Some(depth), ..CheckOptions::default() });
        for r in [&syntactic, &semantic] {
            prop_assert_eq!(r.ok, r.entries.iter().all(|e| e.status == NodeStatus::Ok));
            prop_assert!(r.open_leaves == 0 || !r.ok);
        }
        prop_assert!(!semantic.ok || syntactic.ok);
        if syntactic.ok {
            prop_assert!(semantic_validate(&sys, &Sequent::goal(script.goal.clone()), depth).unwrap().is_none());
        }
    }
}
