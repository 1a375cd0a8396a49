//! `flafol`: command-line front end for the FLAFOL kernel and toolchain.
//!
//! Subcommands:
//!
//! - `check` — verify an explicit proof file against the kernel rules;
//! - `audit` — produce a non-interference witness for one context belief;
//! - `search` — bounded proof search for a sequent;
//! - `csc` — enumerate compatible supercontexts of a sequent;
//! - `transform` — proof-to-proof transformations (`unsays`, `normalize`,
//!   `cut`, `simulate`, `sf-elim`);
//! - `fmt` — canonical formatting of theory and proof files;
//! - `explain` — one-paragraph schema of a kernel rule.
//!
//! Exit codes: `0` success/valid, `1` invalid or not found, `2` usage or
//! parse error.
//!
//! With `--json`, every command emits line-delimited JSON objects on stdout
//! with stable field names (`verdict`, `path`, `reason`, `stats`, ...); the
//! per-command schemas are documented in the repository README.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use flafol_core::audit::{audit, audit_sf_only, verify_witness, NIWitness};
use flafol_core::csc::{enumerate_cscs, CSCDerivation};
use flafol_core::kernel::{
    check_proof, elaborate, rule_schema, CheckReport, Proof, ProofStats, Verdict, RULE_NAMES,
};
use flafol_core::search::{bounded_prove, SearchConfig, SearchOutcome};
use flafol_core::sequent::check_sequent_wf;
use flafol_core::surface::{
    format_proof_file, format_theory, parse_belief, parse_proof_file, parse_sequent, parse_term,
    parse_theory, proof_to_raw, Theory,
};
use flafol_core::transform::{
    eliminate_cut, eliminate_cut_with_fuel, normalize, sf_eliminate, simulate, unsays_r,
};
use flafol_core::trust::{search_sf, CIDerivation, CIRule, SFDerivation, SFRule};

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "flafol",
    version,
    about = "Proof checker, auditor, and toolchain for the FLAFOL authorization logic"
)]
struct Cli {
    /// Emit line-delimited JSON on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct TheoryArg {
    /// Theory file declaring sorts, functions, relations, and axioms.
    #[arg(long, value_name = "FILE")]
    theory: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a proof file against the kernel rules.
    Check {
        /// Proof file (`sequent <belief list> |- <belief>` plus `proof (...)`).
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
    },
    /// Audit a valid proof for the influence of one context belief.
    Audit {
        /// Proof file whose end sequent's context contains the marked belief.
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
        /// Index of the context belief to audit.
        #[arg(long, value_name = "INDEX")]
        mark: usize,
        /// Refuse implication-based trust; requires a discharging proof for
        /// every implication assumption the marked belief flows through.
        #[arg(long)]
        sf_only: bool,
        /// Proof file discharging one implication assumption: it must
        /// conclude the implication from the rest of the context
        /// (repeatable; only meaningful with --sf-only).
        #[arg(long = "discharge", value_name = "FILE")]
        discharges: Vec<PathBuf>,
        /// Write the pruned proof (when the witness is a pruning) here.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Search for a proof of a sequent within a depth bound.
    Search {
        /// Goal sequent in surface syntax, e.g. `a @ <l> |- a | b @ <l>`.
        sequent: String,
        #[command(flatten)]
        theory: TheoryArg,
        /// Maximum rule applications along any root-to-leaf path.
        #[arg(long, value_name = "N")]
        depth: usize,
        /// Theory file whose declared constants form the term universe;
        /// defaults to the constants of --theory.
        #[arg(long, value_name = "FILE")]
        universe: Option<PathBuf>,
        /// Wall-clock budget in milliseconds.
        #[arg(long, value_name = "MS")]
        timeout_ms: Option<u64>,
        /// Write the found proof to this file instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Enumerate compatible supercontexts of a sequent.
    Csc {
        /// Sequent in surface syntax.
        sequent: String,
        #[command(flatten)]
        theory: TheoryArg,
        /// Maximum number of derivation steps per supercontext.
        #[arg(long, value_name = "N")]
        depth: usize,
    },
    /// Apply a proof-to-proof transformation.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Canonically format a theory or proof file.
    Fmt {
        /// Theory file, or proof file when --theory is also given.
        file: PathBuf,
        /// Theory file; required when FILE is a proof file.
        #[arg(long, value_name = "FILE")]
        theory: Option<PathBuf>,
        /// Rewrite FILE in place instead of printing to stdout.
        #[arg(long)]
        write: bool,
    },
    /// Describe a kernel rule's schema (`explain list` prints all names).
    Explain {
        /// Rule name, e.g. `ImpL`.
        rule: String,
    },
}

#[derive(Subcommand)]
enum TransformCmd {
    /// Shift a says goal under its own voice: a proof of
    /// `G |- p says[l] a @ g` becomes a proof of `G |- a @ g.[p:l]`.
    Unsays {
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
        /// Write the result to this file instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Permute connective rules toward the root until the proof is in
    /// first normal form.
    Normalize {
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Splice a proof of a belief into a proof that assumes it: from
    /// `--left : G |- b` and `--right : G' |- psi` with `G'[INDEX] = b`
    /// and `G' \ INDEX = G`, derive `G |- psi`.
    Cut {
        #[command(flatten)]
        theory: TheoryArg,
        /// Proof of the cut belief.
        #[arg(long, value_name = "FILE")]
        left: PathBuf,
        /// Proof whose context contains the cut belief.
        #[arg(long, value_name = "FILE")]
        right: PathBuf,
        /// Context index of the cut belief in the right proof.
        #[arg(long, value_name = "INDEX")]
        index: usize,
        /// Rewrite-step budget (defaults to the library's budget).
        #[arg(long, value_name = "N")]
        fuel: Option<usize>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Replay a proof as observed by a simulating principal: every belief
    /// `a @ g` becomes `P says[L] a @ g` with the pair pushed under the
    /// ground label.
    Simulate {
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
        /// Simulating principal (a ground Principal term).
        #[arg(long, value_name = "TERM")]
        principal: String,
        /// Simulation label (a ground Label term).
        #[arg(long, value_name = "TERM")]
        label: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Transport the goal along a speaks-for derivation found by search:
    /// a proof of `G |- a @ g1` becomes a proof of `G |- a @ g2`.
    SfElim {
        proof: PathBuf,
        #[command(flatten)]
        theory: TheoryArg,
        /// Target generalized principal, e.g. `<l>.[p:l1]`.
        #[arg(long, value_name = "GP")]
        to: String,
        /// Speaks-for search depth.
        #[arg(long, value_name = "N", default_value_t = 4)]
        depth: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// Failure handling
// ---------------------------------------------------------------------------

/// A command failure, carrying the exit code contract.
enum Failure {
    /// Unusable input: I/O error, syntax error, bad flag combination (exit 2).
    Usage(String),
    /// Well-formed input whose check, search, or transformation failed
    /// (exit 1).
    Invalid(String),
    /// The command already emitted its own report; exit with this code.
    Reported(u8),
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Reported(code)) => ExitCode::from(code),
        Err(f) => {
            let (code, reason) = match f {
                Failure::Usage(m) => (2, m),
                Failure::Invalid(m) => (1, m),
                Failure::Reported(_) => unreachable!(),
            };
            if json {
                println!("{}", json!({ "verdict": "error", "reason": reason }));
            } else {
                eprintln!("error: {reason}");
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Check { proof, theory } => cmd_check(json, &proof, &theory.theory),
        Cmd::Audit {
            proof,
            theory,
            mark,
            sf_only,
            discharges,
            out,
        } => cmd_audit(
            json,
            &proof,
            &theory.theory,
            mark,
            sf_only,
            &discharges,
            out.as_deref(),
        ),
        Cmd::Search {
            sequent,
            theory,
            depth,
            universe,
            timeout_ms,
            out,
        } => cmd_search(
            json,
            &sequent,
            &theory.theory,
            depth,
            universe.as_deref(),
            timeout_ms,
            out.as_deref(),
        ),
        Cmd::Csc {
            sequent,
            theory,
            depth,
        } => cmd_csc(json, &sequent, &theory.theory, depth),
        Cmd::Transform(t) => cmd_transform(json, t),
        Cmd::Fmt {
            file,
            theory,
            write,
        } => cmd_fmt(json, &file, theory.as_deref(), write),
        Cmd::Explain { rule } => cmd_explain(json, &rule),
    }
}

// ---------------------------------------------------------------------------
// File loading
// ---------------------------------------------------------------------------

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_theory(path: &Path) -> Result<Theory, Failure> {
    let text = read(path)?;
    parse_theory(&text).map_err(|e| Failure::Usage(format!("{}:{e}", path.display())))
}

/// Parse, elaborate, and check a proof file; reject invalid proofs.
fn load_checked_proof(th: &Theory, path: &Path) -> Result<Proof, Failure> {
    let text = read(path)?;
    let (seq, raw) = parse_proof_file(&th.signature, &text)
        .map_err(|e| Failure::Usage(format!("{}:{e}", path.display())))?;
    let p = elaborate(&th.signature, &seq, &raw);
    match check_proof(&th.signature, &p).verdict {
        Verdict::Valid => Ok(p),
        Verdict::Invalid { path: at, reason } => Err(Failure::Invalid(format!(
            "{}: invalid proof at {}: {}",
            path.display(),
            fmt_path(&at),
            reason
        ))),
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn fmt_path(path: &[usize]) -> String {
    if path.is_empty() {
        "the root".into()
    } else {
        format!("path {path:?}")
    }
}

fn stats_json(stats: &ProofStats) -> serde_json::Value {
    json!({ "nodes": stats.nodes, "depth": stats.depth, "rules": stats.rules })
}

fn rules_line(stats: &ProofStats) -> String {
    stats
        .rules
        .iter()
        .map(|(name, n)| format!("{name} x{n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render a speaks-for derivation as a nested rule term.
fn sf_term(d: &SFDerivation) -> String {
    match &d.rule {
        SFRule::ReflSF => "ReflSF".into(),
        SFRule::SelfLSF => "SelfLSF".into(),
        SFRule::SelfRSF => "SelfRSF".into(),
        SFRule::VarSF(_) => "VarSF".into(),
        SFRule::FwdSF(_, _) => "FwdSF".into(),
        SFRule::ExtSF(inner) => format!("ExtSF({})", sf_term(inner)),
        SFRule::TransSF(a, b) => format!("TransSF({}, {})", sf_term(a), sf_term(b)),
    }
}

/// Render a can-influence derivation as a nested rule term.
fn ci_term(d: &CIDerivation) -> String {
    match &d.rule {
        CIRule::SfCi(sf) => format!("SF-CI({})", sf_term(sf)),
        CIRule::ExtCI(inner) => format!("ExtCI({})", ci_term(inner)),
        CIRule::TransCI(a, b) => format!("TransCI({}, {})", ci_term(a), ci_term(b)),
        CIRule::ImpCI { index, .. } => format!("ImpCI[{index}]"),
    }
}

/// Render a compatible-supercontext derivation as a nested rule term.
fn csc_term(d: &CSCDerivation) -> String {
    let subs = d.premises();
    if subs.is_empty() {
        d.rule.name().to_string()
    } else {
        let inner: Vec<String> = subs.iter().map(|s| csc_term(s)).collect();
        format!("{}({})", d.rule.name(), inner.join(", "))
    }
}

/// Print a transformed or found proof: to `out` as a file, else to stdout.
fn emit_proof(json: bool, out: Option<&Path>, verdict: &str, p: &Proof) -> Result<(), Failure> {
    let text = format_proof_file(&p.conclusion, &proof_to_raw(p));
    match out {
        Some(path) => {
            write_file(path, &text)?;
            if json {
                println!(
                    "{}",
                    json!({ "verdict": verdict, "path": path.display().to_string() })
                );
            } else {
                println!("wrote {}", path.display());
            }
        }
        None => {
            if json {
                println!("{}", json!({ "verdict": verdict, "proof": text }));
            } else {
                print!("{text}");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_check(json: bool, proof: &Path, theory: &Path) -> Result<(), Failure> {
    let th = load_theory(theory)?;
    let text = read(proof)?;
    let (seq, raw) = parse_proof_file(&th.signature, &text)
        .map_err(|e| Failure::Usage(format!("{}:{e}", proof.display())))?;
    let p = elaborate(&th.signature, &seq, &raw);
    let report = check_proof(&th.signature, &p);
    print_report(json, &report);
    match report.verdict {
        Verdict::Valid => Ok(()),
        Verdict::Invalid { .. } => Err(Failure::Reported(1)),
    }
}

fn print_report(json: bool, report: &CheckReport) {
    if json {
        let line = match &report.verdict {
            Verdict::Valid => json!({
                "verdict": "valid",
                "stats": stats_json(&report.stats),
            }),
            Verdict::Invalid { path, reason } => json!({
                "verdict": "invalid",
                "path": path,
                "reason": reason.to_string(),
                "tag": reason.tag(),
                "stats": stats_json(&report.stats),
            }),
        };
        println!("{line}");
        return;
    }
    match &report.verdict {
        Verdict::Valid => {
            println!(
                "valid: {} nodes, depth {}",
                report.stats.nodes, report.stats.depth
            );
            println!("rules: {}", rules_line(&report.stats));
        }
        Verdict::Invalid { path, reason } => {
            println!("invalid at {}: {}", fmt_path(path), reason);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(
    json: bool,
    proof: &Path,
    theory: &Path,
    mark: usize,
    sf_only: bool,
    discharges: &[PathBuf],
    out: Option<&Path>,
) -> Result<(), Failure> {
    if !sf_only && !discharges.is_empty() {
        return Err(Failure::Usage(
            "--discharge is only meaningful with --sf-only".into(),
        ));
    }
    let th = load_theory(theory)?;
    let p = load_checked_proof(&th, proof)?;
    let witness = if sf_only {
        let ds: Vec<Proof> = discharges
            .iter()
            .map(|d| load_checked_proof(&th, d))
            .collect::<Result<_, _>>()?;
        audit_sf_only(&th.signature, &p, mark, &ds)
    } else {
        audit(&th.signature, &p, mark)
    }
    .map_err(invalid)?;
    verify_witness(&th.signature, &p, mark, &witness)
        .map_err(|e| Failure::Invalid(format!("witness failed its re-check: {e}")))?;
    match &witness {
        NIWitness::Pruned(pruned) => {
            if let Some(path) = out {
                let text = format_proof_file(&pruned.conclusion, &proof_to_raw(pruned));
                write_file(path, &text)?;
            }
            if json {
                let stats = check_proof(&th.signature, pruned).stats;
                println!(
                    "{}",
                    json!({ "verdict": "pruned", "mark": mark, "stats": stats_json(&stats) })
                );
            } else {
                println!("pruned: the end sequent holds without context belief {mark}");
                if let Some(path) = out {
                    println!("wrote {}", path.display());
                }
            }
        }
        NIWitness::Influence {
            delta,
            csc,
            g1_prime,
            g2_prime,
            ci,
            ..
        } => {
            if out.is_some() {
                eprintln!("note: --out ignored; an influence witness carries no pruned proof");
            }
            let delta_strs: Vec<String> = delta.iter().map(|b| b.to_string()).collect();
            if json {
                println!(
                    "{}",
                    json!({
                        "verdict": "influence",
                        "mark": mark,
                        "g1_prime": g1_prime.to_string(),
                        "g2_prime": g2_prime.to_string(),
                        "delta": delta_strs,
                        "csc": csc_term(csc),
                        "ci": ci_term(ci),
                    })
                );
            } else {
                println!("influence: {g1_prime} can influence {g2_prime}");
                println!("  supercontext: {}", delta_strs.join("; "));
                println!("  supercontext derivation: {}", csc_term(csc));
                println!("  can-influence derivation: {}", ci_term(ci));
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    json: bool,
    sequent: &str,
    theory: &Path,
    depth: usize,
    universe: Option<&Path>,
    timeout_ms: Option<u64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let th = load_theory(theory)?;
    let seq = parse_sequent(&th.signature, sequent)
        .map_err(|e| Failure::Usage(format!("<sequent>: {e}")))?;
    check_sequent_wf(&th.signature, &seq)
        .map_err(|e| Failure::Usage(format!("<sequent>: {e}")))?;
    let mut cfg = SearchConfig::with_signature_constants(&th.signature, depth);
    if let Some(upath) = universe {
        let uth = load_theory(upath)?;
        cfg.universe = SearchConfig::with_signature_constants(&uth.signature, depth).universe;
    }
    if let Some(ms) = timeout_ms {
        cfg.timeout = Some(Duration::from_millis(ms));
    }
    match bounded_prove(&th.signature, &seq, &cfg) {
        SearchOutcome::Found(p) => emit_proof(json, out, "found", &p),
        SearchOutcome::ExhaustedBounds => {
            if json {
                println!("{}", json!({ "verdict": "exhausted", "depth": depth }));
            } else {
                println!("no proof within depth {depth}");
            }
            Err(Failure::Reported(1))
        }
        SearchOutcome::TimedOut => {
            if json {
                println!("{}", json!({ "verdict": "timeout" }));
            } else {
                println!("search timed out");
            }
            Err(Failure::Reported(1))
        }
    }
}

fn cmd_csc(json: bool, sequent: &str, theory: &Path, depth: usize) -> Result<(), Failure> {
    let th = load_theory(theory)?;
    let seq = parse_sequent(&th.signature, sequent)
        .map_err(|e| Failure::Usage(format!("<sequent>: {e}")))?;
    check_sequent_wf(&th.signature, &seq)
        .map_err(|e| Failure::Usage(format!("<sequent>: {e}")))?;
    let results = enumerate_cscs(&th.signature, &seq, depth);
    for (idx, (delta, d)) in results.iter().enumerate() {
        let delta_strs: Vec<String> = delta.iter().map(|b| b.to_string()).collect();
        if json {
            println!(
                "{}",
                json!({
                    "verdict": "ok",
                    "index": idx,
                    "delta": delta_strs,
                    "derivation": csc_term(d),
                })
            );
        } else {
            let shown = if delta_strs.is_empty() {
                "(empty)".to_string()
            } else {
                delta_strs.join("; ")
            };
            println!("{idx}: {shown}  -- {}", csc_term(d));
        }
    }
    Ok(())
}

fn cmd_transform(json: bool, t: TransformCmd) -> Result<(), Failure> {
    match t {
        TransformCmd::Unsays { proof, theory, out } => {
            let th = load_theory(&theory.theory)?;
            let p = load_checked_proof(&th, &proof)?;
            let result = unsays_r(&th.signature, &p).map_err(invalid)?;
            emit_proof(json, out.as_deref(), "ok", &result)
        }
        TransformCmd::Normalize { proof, theory, out } => {
            let th = load_theory(&theory.theory)?;
            let p = load_checked_proof(&th, &proof)?;
            let result = normalize(&th.signature, &p).map_err(invalid)?;
            emit_proof(json, out.as_deref(), "ok", &result)
        }
        TransformCmd::Cut {
            theory,
            left,
            right,
            index,
            fuel,
            out,
        } => {
            let th = load_theory(&theory.theory)?;
            let left_p = load_checked_proof(&th, &left)?;
            let right_p = load_checked_proof(&th, &right)?;
            let result = match fuel {
                Some(f) => eliminate_cut_with_fuel(&th.signature, &left_p, &right_p, index, f),
                None => eliminate_cut(&th.signature, &left_p, &right_p, index),
            }
            .map_err(invalid)?;
            emit_proof(json, out.as_deref(), "ok", &result)
        }
        TransformCmd::Simulate {
            proof,
            theory,
            principal,
            label,
            out,
        } => {
            let th = load_theory(&theory.theory)?;
            let p = load_checked_proof(&th, &proof)?;
            let q = parse_term(&th.signature, &principal)
                .map_err(|e| Failure::Usage(format!("--principal: {e}")))?;
            let l = parse_term(&th.signature, &label)
                .map_err(|e| Failure::Usage(format!("--label: {e}")))?;
            let result = simulate(&th.signature, &p, &q, &l).map_err(invalid)?;
            emit_proof(json, out.as_deref(), "ok", &result)
        }
        TransformCmd::SfElim {
            proof,
            theory,
            to,
            depth,
            out,
        } => {
            let th = load_theory(&theory.theory)?;
            let p = load_checked_proof(&th, &proof)?;
            let target = parse_belief(&th.signature, &format!("true @ {to}"))
                .map_err(|e| Failure::Usage(format!("--to: {e}")))?
                .gp;
            let source = &p.conclusion.goal.gp;
            let d = search_sf(&th.signature, &p.conclusion.context, source, &target, depth)
                .ok_or_else(|| {
                    Failure::Invalid(format!(
                        "no speaks-for derivation from {source} to {target} within depth {depth}"
                    ))
                })?;
            let result = sf_eliminate(&th.signature, &p, &d).map_err(invalid)?;
            emit_proof(json, out.as_deref(), "ok", &result)
        }
    }
}

/// A proof file begins with the `sequent` keyword (after comments).
fn looks_like_proof_file(text: &str) -> bool {
    let mut rest = text;
    loop {
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix("//") {
            match r.find('\n') {
                Some(i) => rest = &r[i + 1..],
                None => return false,
            }
            continue;
        }
        break;
    }
    match rest.strip_prefix("sequent") {
        Some(after) => !after
            .chars()
            .next()
            .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '\''),
        None => false,
    }
}

fn cmd_fmt(json: bool, file: &Path, theory: Option<&Path>, write: bool) -> Result<(), Failure> {
    let text = read(file)?;
    let canonical = if looks_like_proof_file(&text) {
        let tpath = theory.ok_or_else(|| {
            Failure::Usage("--theory is required to format a proof file".into())
        })?;
        let th = load_theory(tpath)?;
        let (seq, raw) = parse_proof_file(&th.signature, &text)
            .map_err(|e| Failure::Usage(format!("{}:{e}", file.display())))?;
        format_proof_file(&seq, &raw)
    } else {
        let th = parse_theory(&text).map_err(|e| Failure::Usage(format!("{}:{e}", file.display())))?;
        format_theory(&th)
    };
    if write {
        write_file(file, &canonical)?;
        if json {
            println!(
                "{}",
                json!({ "verdict": "ok", "path": file.display().to_string() })
            );
        } else {
            println!("formatted {}", file.display());
        }
    } else if json {
        println!("{}", json!({ "verdict": "ok", "formatted": canonical }));
    } else {
        print!("{canonical}");
    }
    Ok(())
}

fn cmd_explain(json: bool, rule: &str) -> Result<(), Failure> {
    if rule == "list" {
        if json {
            println!("{}", json!({ "verdict": "ok", "rules": RULE_NAMES }));
        } else {
            for name in RULE_NAMES {
                println!("{name}");
            }
        }
        return Ok(());
    }
    match rule_schema(rule) {
        Some(schema) => {
            if json {
                println!(
                    "{}",
                    json!({ "verdict": "ok", "rule": rule, "schema": schema })
                );
            } else {
                println!("{schema}");
            }
            Ok(())
        }
        None => Err(Failure::Invalid(format!(
            "unknown rule `{rule}`; `flafol explain list` prints all rule names"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proof_file_sniffing_skips_comments() {
        assert!(looks_like_proof_file("sequent |- true @ <l>"));
        assert!(looks_like_proof_file("  // a comment\n\nsequent |- true @ <l>"));
        assert!(!looks_like_proof_file("sort Label"));
        assert!(!looks_like_proof_file("sequents_of_interest"));
        assert!(!looks_like_proof_file("// only a comment"));
    }

    #[test]
    fn cli_grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
