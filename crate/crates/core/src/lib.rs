//! Step-indexed coinduction: descending chains of predicates, the later
//! modality, final chains of predicate transformers, compatible up-to
//! techniques, and a per-rule checked proof system built on them.

pub mod chain;
pub mod elem;
pub mod error;
pub mod fibre;
pub mod functor;
pub mod logic;
pub mod sde;
pub mod selftest;
pub mod syntax;
pub mod transformer;
pub mod upto;

pub use error::{Error, Result};
