use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use laterproof_core::chain::{self, DEFAULT_LIMIT_BOUND};
use laterproof_core::elem::Elem;
use laterproof_core::fibre::Predicate;
use laterproof_core::logic::denote::{denote_chain, eval_elem};
use laterproof_core::logic::{check_proof, CheckOptions, RuleOptions};
use laterproof_core::selftest;
use laterproof_core::syntax::proof::{parse_chain_expr, parse_elem, parse_proof};
use laterproof_core::syntax::system::{parse_system, System};
use laterproof_core::syntax::{parse_sexps, SyntaxError};
use laterproof_core::transformer::{final_chain, nu_oracle, stream_probes};
use laterproof_core::upto::{CompatOptions, DEFAULT_BUDGET};

#[derive(Parser)]
#[command(name = "laterproof", version, about = "Checks step-indexed coinductive proofs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a proof script against a system.
    Check {
        system: PathBuf,
        proof: PathBuf,
        /// Index bound for semantic validation.
        #[arg(long, default_value_t = 16)]
        depth: usize,
        /// Also validate every node's sequent semantically up to --depth.
        #[arg(long)]
        semantic: bool,
        /// Accept up-to techniques whose compatibility was only sampled.
        #[arg(long)]
        allow_sampled: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate a chain at an index.
    Eval {
        system: PathBuf,
        /// Chain name or chain expression.
        chain: String,
        #[arg(long)]
        index: usize,
        /// Element term to evaluate at; defaults to the whole predicate.
        #[arg(long)]
        element: Option<String>,
    },
    /// Compare the greatest fixed point with the limit of the final chain.
    Oracle { system: PathBuf, chain: String },
    /// Certify compatibility of a technique with a chain's transformer.
    Compat {
        system: PathBuf,
        technique: String,
        chain: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Run the invariant suites.
    Selftest,
}

/// A failure that ends the run with exit status 2.
struct UsageError(String);

impl From<laterproof_core::Error> for UsageError {
    fn from(e: laterproof_core::Error) -> Self {
        UsageError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn located(path: &Path) -> impl Fn(SyntaxError) -> UsageError + '_ {
    move |e| UsageError(format!("{}:{e}", path.display()))
}

fn load_system(path: &Path) -> Result<System, UsageError> {
    parse_system(&read(path)?).map_err(located(path))
}

fn run(command: Command) -> Result<bool, UsageError> {
    match command {
        Command::Check { system, proof, depth, semantic, allow_sampled, format } => {
            let sys = load_system(&system)?;
            let script = parse_proof(&read(&proof)?).map_err(located(&proof))?;
            let opts = CheckOptions {
                semantic: semantic.then_some(depth),
                rules: RuleOptions { allow_sampled, ..RuleOptions::default() },
            };
            let report = check_proof(&sys, &script, &opts);
            match format {
                Format::Text => print!("{report}"),
                Format::Json => {
                    let json = serde_json::to_string_pretty(&report).map_err(|e| UsageError(e.to_string()))?;
                    println!("{json}");
                }
            }
            Ok(report.ok)
        }
        Command::Eval { system, chain, index, element } => {
            let sys = load_system(&system)?;
            let expr = parse_sexps(&chain).map_err(|e| UsageError(format!("chain: {e}")))?;
            let [expr] = expr.as_slice() else {
                return Err(UsageError("expected one chain expression".into()));
            };
            let expr = parse_chain_expr(expr).map_err(|e| UsageError(format!("chain: {e}")))?;
            let ch = denote_chain(&sys, &expr)?;
            let p = ch.at(index)?;
            match element {
                Some(text) => {
                    let parsed = parse_sexps(&text).map_err(|e| UsageError(format!("element: {e}")))?;
                    let [term] = parsed.as_slice() else {
                        return Err(UsageError("expected one element term".into()));
                    };
                    let term = parse_elem(term).map_err(|e| UsageError(format!("element: {e}")))?;
                    let x = eval_elem(&sys, &[], &[], &term)?;
                    println!("{} at {index}, {x}: {}", expr, p.degree(&x)?);
                }
                None if ch.carrier().is_enumerable() => println!("{expr} at {index}: {p}"),
                None => {
                    println!("{expr} at {index}, on probe elements:");
                    for x in stream_probes(sys.sde(), 4)? {
                        println!("  {x}: {}", p.degree(&x)?);
                    }
                }
            }
            Ok(true)
        }
        Command::Oracle { system, chain } => {
            let sys = load_system(&system)?;
            let phi = sys.transformer(&chain).ok_or_else(|| UsageError(format!("{chain} is not a final chain")))?;
            let nu = nu_oracle(phi)?;
            let ch = final_chain(phi);
            let limit = chain::chain_limit(&ch, 1, DEFAULT_LIMIT_BOUND)?;
            let stable = chain::stabilization_index(&ch, DEFAULT_LIMIT_BOUND)?;
            let equal = laterproof_core::fibre::equal(&nu, &limit, None)?;
            println!("final chain stabilises at index {stable}");
            print_members("greatest fixed point", &nu)?;
            print_members("chain limit", &limit)?;
            println!("{}", if equal { "equal" } else { "DIFFERENT" });
            Ok(equal)
        }
        Command::Compat { system, technique, chain, budget } => {
            let sys = load_system(&system)?;
            let probes = if sys.sde().names().next().is_some() { Some(stream_probes(sys.sde(), 4)?) } else { None };
            let opts = CompatOptions { budget, probes, ..CompatOptions::default() };
            let cert = sys.compat(&technique, &chain, &opts)?;
            println!("{technique} for {chain}: {}", cert.status);
            if !cert.note.is_empty() {
                println!("  {}", cert.note);
            }
            Ok(!cert.status.is_failed())
        }
        Command::Selftest => {
            let mut ok = true;
            for r in selftest::run_all() {
                if r.ok() {
                    println!("PASS {} ({} checks)", r.name, r.checked);
                } else {
                    ok = false;
                    println!("FAIL {} ({} of {} checks): {}", r.name, r.failures, r.checked, r.note);
                }
            }
            Ok(ok)
        }
    }
}

/// Prints the elements of a Boolean predicate, or the valuation itself.
fn print_members(title: &str, p: &Predicate) -> Result<(), UsageError> {
    let elems = p.carrier().elements()?;
    let mut members: Vec<&Elem> = Vec::new();
    for x in elems.iter() {
        if p.holds(x)? {
            members.push(x);
        }
    }
    println!("{title}: {p}");
    if p.fibre() == laterproof_core::fibre::Fibre::Pred {
        println!("  {} of {} elements", members.len(), elems.len());
    }
    Ok(())
}
