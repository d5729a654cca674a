//! Per-rule proof checking and reports.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use super::denote::semantic_validate;
use super::formula::Sequent;
use super::rules::{apply_rule, well_formed, RuleOptions};
use super::script::{ProofNode, ProofScript, Rule};
use crate::syntax::system::System;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Syntactic,
    /// Every node's sequent is also validated at indices `0..=depth`.
    Semantic { depth: usize },
}

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    /// `Some(depth)` for semantic mode.
    pub semantic: Option<usize>,
    pub rules: RuleOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Ok,
    Failed,
    Open,
}

/// One rule application of the checked tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Entry {
    /// `root`, then child indices: `root.0.1`.
    pub path: String,
    pub rule: String,
    pub status: NodeStatus,
    pub message: String,
    pub sequent: String,
    pub line: usize,
    pub col: usize,
    /// First failing index in semantic mode.
    pub index: Option<usize>,
    /// Variable assignment at which the semantic check failed.
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub ok: bool,
    pub mode: &'static str,
    pub depth: Option<usize>,
    pub rule_applications: usize,
    pub open_leaves: usize,
    pub entries: Vec<Entry>,
    pub timing_ms: u64,
}

impl Report {
    /// The first entry that is not ok.
    pub fn first_problem(&self) -> Option<&Entry> {
        self.entries.iter().find(|e| e.status != NodeStatus::Ok)
    }

    /// The report with its timing zeroed, for comparisons.
    pub fn without_timing(&self) -> Report {
        Report { timing_ms: 0, ..self.clone() }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path_w = self.entries.iter().map(|e| e.path.len()).max().unwrap_or(0) + 1;
        let rule_w = self.entries.iter().map(|e| e.rule.len()).max().unwrap_or(0) + 1;
        for e in &self.entries {
            let status = match e.status {
                NodeStatus::Ok => "ok",
                NodeStatus::Failed => "FAILED",
                NodeStatus::Open => "OPEN",
            };
            write!(f, "{status:<7}{:<path_w$}{:<rule_w$}{}", e.path, e.rule, e.sequent)?;
            if !e.message.is_empty() {
                write!(f, "\n       {}:{}: {}", e.line, e.col, e.message)?;
            }
            writeln!(f)?;
        }
        let depth = self.depth.map(|d| format!(", depth {d}")).unwrap_or_default();
        writeln!(
            f,
            "{}: {} rule applications, {} open leaves ({}{depth})",
            if self.ok { "ok" } else { "failed" },
            self.rule_applications,
            self.open_leaves,
            self.mode
        )
    }
}

/// Checks `script` against `sys` rule by rule.
pub fn check_proof(sys: &System, script: &ProofScript, opts: &CheckOptions) -> Report {
    let start = Instant::now();
    let mut entries = Vec::new();
    walk(sys, &script.proof, Sequent::goal(script.goal.clone()), "root".to_string(), opts, &mut entries);
    let ok = entries.iter().all(|e| e.status == NodeStatus::Ok);
    Report {
        ok,
        mode: if opts.semantic.is_some() { "semantic" } else { "syntactic" },
        depth: opts.semantic,
        rule_applications: entries.iter().filter(|e| e.rule != Rule::Open.name()).count(),
        open_leaves: entries.iter().filter(|e| e.status == NodeStatus::Open).count(),
        entries,
        timing_ms: start.elapsed().as_millis() as u64,
    }
}

fn walk(sys: &System, node: &ProofNode, seq: Sequent, path: String, opts: &CheckOptions, out: &mut Vec<Entry>) {
    let mut entry = Entry {
        path: path.clone(),
        rule: node.rule.name().to_string(),
        status: NodeStatus::Ok,
        message: String::new(),
        sequent: seq.to_string(),
        line: node.span.line,
        col: node.span.col,
        index: None,
        witness: None,
    };
    let failed = |mut entry: Entry, message: String, out: &mut Vec<Entry>| {
        entry.status = NodeStatus::Failed;
        entry.message = message;
        out.push(entry);
    };
    if let Err(e) = well_formed(sys, &seq) {
        return failed(entry, format!("ill-formed sequent: {e}"), out);
    }
    if node.rule == Rule::Open {
        entry.status = NodeStatus::Open;
        entry.message = "open leaf".to_string();
        return out.push(entry);
    }
    let premises = match apply_rule(sys, &seq, &node.rule, &opts.rules) {
        Ok(p) => p,
        Err(e) => return failed(entry, e.to_string(), out),
    };
    if premises.len() != node.children.len() {
        let msg = format!("{} produces {} subgoals, the script gives {}", node.rule.name(), premises.len(), node.children.len());
        return failed(entry, msg, out);
    }
    if let Some(depth) = opts.semantic {
        match semantic_validate(sys, &seq, depth) {
            Ok(None) => {}
            Ok(Some((index, witness))) => {
                entry.index = Some(index);
                entry.witness = Some(witness.clone());
                return failed(entry, format!("sequent fails at index {index} for {witness}"), out);
            }
            Err(e) => return failed(entry, format!("semantic check: {e}"), out),
        }
    }
    out.push(entry);
    for (i, (child, premise)) in node.children.iter().zip(premises).enumerate() {
        walk(sys, child, premise, format!("{path}.{i}"), opts, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::proof::parse_proof;
    use crate::syntax::system::parse_system;

    const SYS: &str = "(sde one (head 1) (tail one))\n(sde s (head 1) (tail (oplus one s)))\n\
        (lifting gt0 (and (> head 0) rec))\n(coalgebra S stream)\n\
        (chain PHI (transformer gt0 S))\n(technique C context (oplus one _))";
    const GOAL: &str = "(goal (in s PHI))\n";
    const PROOF: &str =
        "(proof (lob IH (step (later-functor (later-and (next (atom)) (rewrite s (upto C (axiom IH))))))))";

    fn run(proof: &str, semantic: Option<usize>) -> Report {
        let sys = parse_system(SYS).unwrap();
        let script = parse_proof(&format!("{GOAL}{proof}")).unwrap();
        check_proof(&sys, &script, &CheckOptions { semantic, ..Default::default() })
    }

    #[test]
    fn running_example_checks() {
        let r = run(PROOF, None);
        assert!(r.ok, "{r}");
        assert_eq!(r.rule_applications, 9);
        let r = run(PROOF, Some(64));
        assert!(r.ok, "{r}");
    }

    #[test]
    fn missing_upto_fails_at_axiom() {
        let r = run("(proof (lob IH (step (later-functor (later-and (next (atom)) (rewrite s (axiom IH)))))))", None);
        assert!(!r.ok);
        let bad = r.first_problem().unwrap();
        assert_eq!(bad.rule, "axiom");
        assert_eq!(bad.path, "root.0.0.0.1.0");
    }

    #[test]
    fn trivial_script() {
        let sys = parse_system("").unwrap();
        let script = parse_proof("(goal top)(proof (axiom-top))").unwrap();
        let r = check_proof(&sys, &script, &CheckOptions::default());
        assert!(r.ok);
        assert_eq!(r.rule_applications, 1);
    }

    #[test]
    fn open_leaves_fail() {
        let r = run("(proof (lob IH (open)))", None);
        assert!(!r.ok);
        assert_eq!(r.open_leaves, 1);
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let r = run("(proof (lob IH (step (later-functor (later-and (next (atom)) (open))))))", None);
        assert!(!r.ok);
        assert_eq!(r.open_leaves, 1);
        let r = run("(proof (upto C (open)))", None);
        assert_eq!(r.first_problem().unwrap().rule, "upto");
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run(PROOF, Some(16)).without_timing();
        let b = run(PROOF, Some(16)).without_timing();
        assert_eq!(a, b);
    }
}
