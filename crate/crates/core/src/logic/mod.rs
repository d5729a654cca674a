//! The recursive proof system: formulas with `▷`, sequents, rules, and the
//! per-rule checker.

pub mod check;
pub mod denote;
pub mod formula;
pub mod rules;
pub mod script;

pub use check::{check_proof, CheckOptions, Entry, NodeStatus, Report};
pub use denote::{denote, semantic_validate};
pub use formula::{ChainExpr, ElemTerm, Fact, Formula, NumExpr, Sequent};
pub use rules::{apply_rule, RuleOptions};
pub use script::{ProofNode, ProofScript, Rule};
