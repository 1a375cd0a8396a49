//! Compatible supercontexts.
//!
//! A context `Δ` is a *compatible supercontext* (CSC) of a sequent
//! `Γ ⊢ φ @ g`, written `Δ ≪ Γ ⊢ φ @ g`, when `Δ` holds everything in `Γ`
//! together with any counterfactual beliefs that a proof of the sequent could
//! bring into scope: branches of assumed disjunctions, conclusions of assumed
//! implications, unfolded `says` bodies, and so on.
//!
//! The derivation rules deliberately shadow the kernel's proof rules: each
//! step rewrites the underlying sequent exactly the way one kernel rule
//! rewrites it toward a chosen premise. [`check_csc`] exploits this by
//! re-using the kernel's premise computation, so the two systems can never
//! drift apart. The module offers three entry points:
//!
//! - [`check_csc`] validates a claimed derivation;
//! - [`csc_of_path`] replays the derivation that witnesses the context of any
//!   node inside a checked proof (every context appearing in a proof is a CSC
//!   of its end sequent);
//! - [`enumerate_cscs`] enumerates derivable supercontexts up to a depth
//!   bound.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::{fresh_name, Formula};
use crate::kernel::{
    check_proof, premises, CheckReason, CheckReport, Proof, ProofStats, RuleSpec, Verdict,
};
use crate::sequent::{check_sequent_wf, Context, Sequent};
use crate::signature::{Signature, Sort};
use crate::term::Term;

/// The claim `delta ≪ sequent.context ⊢ sequent.goal`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CSCJudgment {
    pub delta: Context,
    pub sequent: Sequent,
}

impl CSCJudgment {
    pub fn new(delta: Context, sequent: Sequent) -> CSCJudgment {
        CSCJudgment { delta, sequent }
    }
}

/// A compatible-supercontext derivation; every node stores its judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CSCDerivation {
    pub judgment: CSCJudgment,
    pub rule: CSCRule,
}

/// One constructor per derivation rule. The step rules carry the context
/// index / stack position they act on plus their single sub-derivation;
/// relabelling and forwarding steps additionally carry kernel side proofs.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum CSCRule {
    /// `Γ ≪ Γ ⊢ φ @ g` for any goal.
    CSCRefl,
    /// Union of two supercontexts of the same sequent.
    CSCUnion(Box<CSCDerivation>, Box<CSCDerivation>),
    CSCContraction { i: usize, premise: Box<CSCDerivation> },
    CSCExchange { i: usize, premise: Box<CSCDerivation> },
    CSCAndL { i: usize, premise: Box<CSCDerivation> },
    CSCAndR1 { premise: Box<CSCDerivation> },
    CSCAndR2 { premise: Box<CSCDerivation> },
    CSCOrL1 { i: usize, premise: Box<CSCDerivation> },
    CSCOrL2 { i: usize, premise: Box<CSCDerivation> },
    CSCOrR1 { premise: Box<CSCDerivation> },
    CSCOrR2 { premise: Box<CSCDerivation> },
    /// Keep the consequent of an assumed implication.
    CSCImpL1 { i: usize, premise: Box<CSCDerivation> },
    /// Drop the implication and pursue its antecedent; the conclusion's goal
    /// is discarded entirely.
    CSCImpL2 { i: usize, premise: Box<CSCDerivation> },
    CSCImpR { premise: Box<CSCDerivation> },
    CSCForallL { i: usize, t: Term, premise: Box<CSCDerivation> },
    CSCForallR { eigen: String, premise: Box<CSCDerivation> },
    CSCExistsL { i: usize, eigen: String, premise: Box<CSCDerivation> },
    CSCExistsR { t: Term, premise: Box<CSCDerivation> },
    CSCSaysL { i: usize, premise: Box<CSCDerivation> },
    CSCSaysR { premise: Box<CSCDerivation> },
    CSCSelfLIntro { i: usize, pos: usize, premise: Box<CSCDerivation> },
    CSCSelfLElim { i: usize, pos: usize, premise: Box<CSCDerivation> },
    CSCSelfRIntro { pos: usize, premise: Box<CSCDerivation> },
    CSCSelfRElim { pos: usize, premise: Box<CSCDerivation> },
    CSCVarL { i: usize, pos: usize, l2: Term, side: Proof, premise: Box<CSCDerivation> },
    CSCVarR { pos: usize, l2: Term, side: Proof, premise: Box<CSCDerivation> },
    CSCFwdL {
        i: usize,
        pos: usize,
        q: Term,
        read: Proof,
        write: Proof,
        premise: Box<CSCDerivation>,
    },
    CSCFwdR {
        pos: usize,
        p: Term,
        read: Proof,
        write: Proof,
        premise: Box<CSCDerivation>,
    },
}

impl CSCRule {
    pub fn name(&self) -> &'static str {
        use CSCRule::*;
        match self {
            CSCRefl => "CSCRefl",
            CSCUnion(..) => "CSCUnion",
            CSCContraction { .. } => "CSCContraction",
            CSCExchange { .. } => "CSCExchange",
            CSCAndL { .. } => "CSCAndL",
            CSCAndR1 { .. } => "CSCAndR1",
            CSCAndR2 { .. } => "CSCAndR2",
            CSCOrL1 { .. } => "CSCOrL1",
            CSCOrL2 { .. } => "CSCOrL2",
            CSCOrR1 { .. } => "CSCOrR1",
            CSCOrR2 { .. } => "CSCOrR2",
            CSCImpL1 { .. } => "CSCImpL1",
            CSCImpL2 { .. } => "CSCImpL2",
            CSCImpR { .. } => "CSCImpR",
            CSCForallL { .. } => "CSCForallL",
            CSCForallR { .. } => "CSCForallR",
            CSCExistsL { .. } => "CSCExistsL",
            CSCExistsR { .. } => "CSCExistsR",
            CSCSaysL { .. } => "CSCSaysL",
            CSCSaysR { .. } => "CSCSaysR",
            CSCSelfLIntro { .. } => "CSCSelfLIntro",
            CSCSelfLElim { .. } => "CSCSelfLElim",
            CSCSelfRIntro { .. } => "CSCSelfRIntro",
            CSCSelfRElim { .. } => "CSCSelfRElim",
            CSCVarL { .. } => "CSCVarL",
            CSCVarR { .. } => "CSCVarR",
            CSCFwdL { .. } => "CSCFwdL",
            CSCFwdR { .. } => "CSCFwdR",
        }
    }
}

impl CSCDerivation {
    /// The immediate sub-derivations: none for `CSCRefl`, two for
    /// `CSCUnion`, one for every step rule.
    pub fn premises(&self) -> Vec<&CSCDerivation> {
        use CSCRule::*;
        match &self.rule {
            CSCRefl => vec![],
            CSCUnion(a, b) => vec![a, b],
            CSCContraction { premise, .. }
            | CSCExchange { premise, .. }
            | CSCAndL { premise, .. }
            | CSCAndR1 { premise }
            | CSCAndR2 { premise }
            | CSCOrL1 { premise, .. }
            | CSCOrL2 { premise, .. }
            | CSCOrR1 { premise }
            | CSCOrR2 { premise }
            | CSCImpL1 { premise, .. }
            | CSCImpL2 { premise, .. }
            | CSCImpR { premise }
            | CSCForallL { premise, .. }
            | CSCForallR { premise, .. }
            | CSCExistsL { premise, .. }
            | CSCExistsR { premise, .. }
            | CSCSaysL { premise, .. }
            | CSCSaysR { premise }
            | CSCSelfLIntro { premise, .. }
            | CSCSelfLElim { premise, .. }
            | CSCSelfRIntro { premise, .. }
            | CSCSelfRElim { premise, .. }
            | CSCVarL { premise, .. }
            | CSCVarR { premise, .. }
            | CSCFwdL { premise, .. }
            | CSCFwdR { premise, .. } => vec![premise],
        }
    }
}

/// The kernel rule, premise branch, and side proofs behind a step rule.
fn step_to_kernel(rule: &CSCRule) -> Option<(RuleSpec, usize, Vec<&Proof>, &CSCDerivation)> {
    use CSCRule::*;
    Some(match rule {
        CSCRefl | CSCUnion(..) => return None,
        CSCContraction { i, premise } => (RuleSpec::Contraction { i: *i }, 0, vec![], premise),
        CSCExchange { i, premise } => (RuleSpec::Exchange { i: *i }, 0, vec![], premise),
        CSCAndL { i, premise } => (RuleSpec::AndL { i: *i }, 0, vec![], premise),
        CSCAndR1 { premise } => (RuleSpec::AndR, 0, vec![], premise),
        CSCAndR2 { premise } => (RuleSpec::AndR, 1, vec![], premise),
        CSCOrL1 { i, premise } => (RuleSpec::OrL { i: *i }, 0, vec![], premise),
        CSCOrL2 { i, premise } => (RuleSpec::OrL { i: *i }, 1, vec![], premise),
        CSCOrR1 { premise } => (RuleSpec::OrR1, 0, vec![], premise),
        CSCOrR2 { premise } => (RuleSpec::OrR2, 0, vec![], premise),
        CSCImpL1 { i, premise } => (RuleSpec::ImpL { i: *i }, 1, vec![], premise),
        CSCImpL2 { i, premise } => (RuleSpec::ImpL { i: *i }, 0, vec![], premise),
        CSCImpR { premise } => (RuleSpec::ImpR, 0, vec![], premise),
        CSCForallL { i, t, premise } => {
            (RuleSpec::ForallL { i: *i, t: t.clone() }, 0, vec![], premise)
        }
        CSCForallR { eigen, premise } => {
            (RuleSpec::ForallR { eigen: eigen.clone() }, 0, vec![], premise)
        }
        CSCExistsL { i, eigen, premise } => {
            (RuleSpec::ExistsL { i: *i, eigen: eigen.clone() }, 0, vec![], premise)
        }
        CSCExistsR { t, premise } => (RuleSpec::ExistsR { t: t.clone() }, 0, vec![], premise),
        CSCSaysL { i, premise } => (RuleSpec::SaysL { i: *i }, 0, vec![], premise),
        CSCSaysR { premise } => (RuleSpec::SaysR, 0, vec![], premise),
        CSCSelfLIntro { i, pos, premise } => {
            (RuleSpec::SelfLIntro { i: *i, pos: *pos }, 0, vec![], premise)
        }
        CSCSelfLElim { i, pos, premise } => {
            (RuleSpec::SelfLElim { i: *i, pos: *pos }, 0, vec![], premise)
        }
        CSCSelfRIntro { pos, premise } => {
            (RuleSpec::SelfRIntro { pos: *pos }, 0, vec![], premise)
        }
        CSCSelfRElim { pos, premise } => (RuleSpec::SelfRElim { pos: *pos }, 0, vec![], premise),
        CSCVarL { i, pos, l2, side, premise } => (
            RuleSpec::VarL { i: *i, pos: *pos, l2: l2.clone() },
            0,
            vec![side],
            premise,
        ),
        CSCVarR { pos, l2, side, premise } => {
            (RuleSpec::VarR { pos: *pos, l2: l2.clone() }, 0, vec![side], premise)
        }
        CSCFwdL { i, pos, q, read, write, premise } => (
            RuleSpec::FwdL { i: *i, pos: *pos, q: q.clone() },
            0,
            vec![read, write],
            premise,
        ),
        CSCFwdR { pos, p, read, write, premise } => (
            RuleSpec::FwdR { pos: *pos, p: p.clone() },
            0,
            vec![read, write],
            premise,
        ),
    })
}

/// Build the step rule that shadows a kernel rule toward premise `branch`,
/// carrying the given side proofs. `None` when no step rule shadows it.
pub(crate) fn step_from_kernel(
    spec: &RuleSpec,
    branch: usize,
    sides: Vec<Proof>,
    premise: Box<CSCDerivation>,
) -> Option<CSCRule> {
    use RuleSpec::*;
    Some(match (spec, branch) {
        (Contraction { i }, 0) => CSCRule::CSCContraction { i: *i, premise },
        (Exchange { i }, 0) => CSCRule::CSCExchange { i: *i, premise },
        (AndL { i }, 0) => CSCRule::CSCAndL { i: *i, premise },
        (AndR, 0) => CSCRule::CSCAndR1 { premise },
        (AndR, 1) => CSCRule::CSCAndR2 { premise },
        (OrL { i }, 0) => CSCRule::CSCOrL1 { i: *i, premise },
        (OrL { i }, 1) => CSCRule::CSCOrL2 { i: *i, premise },
        (OrR1, 0) => CSCRule::CSCOrR1 { premise },
        (OrR2, 0) => CSCRule::CSCOrR2 { premise },
        (ImpL { i }, 0) => CSCRule::CSCImpL2 { i: *i, premise },
        (ImpL { i }, 1) => CSCRule::CSCImpL1 { i: *i, premise },
        (ImpR, 0) => CSCRule::CSCImpR { premise },
        (ForallL { i, t }, 0) => CSCRule::CSCForallL { i: *i, t: t.clone(), premise },
        (ForallR { eigen }, 0) => CSCRule::CSCForallR { eigen: eigen.clone(), premise },
        (ExistsL { i, eigen }, 0) => {
            CSCRule::CSCExistsL { i: *i, eigen: eigen.clone(), premise }
        }
        (ExistsR { t }, 0) => CSCRule::CSCExistsR { t: t.clone(), premise },
        (SaysL { i }, 0) => CSCRule::CSCSaysL { i: *i, premise },
        (SaysR, 0) => CSCRule::CSCSaysR { premise },
        (SelfLIntro { i, pos }, 0) => CSCRule::CSCSelfLIntro { i: *i, pos: *pos, premise },
        (SelfLElim { i, pos }, 0) => CSCRule::CSCSelfLElim { i: *i, pos: *pos, premise },
        (SelfRIntro { pos }, 0) => CSCRule::CSCSelfRIntro { pos: *pos, premise },
        (SelfRElim { pos }, 0) => CSCRule::CSCSelfRElim { pos: *pos, premise },
        (VarL { i, pos, l2 }, 0) => {
            let [side]: [Proof; 1] = sides.try_into().ok()?;
            CSCRule::CSCVarL { i: *i, pos: *pos, l2: l2.clone(), side, premise }
        }
        (VarR { pos, l2 }, 0) => {
            let [side]: [Proof; 1] = sides.try_into().ok()?;
            CSCRule::CSCVarR { pos: *pos, l2: l2.clone(), side, premise }
        }
        (FwdL { i, pos, q }, 0) => {
            let [read, write]: [Proof; 2] = sides.try_into().ok()?;
            CSCRule::CSCFwdL { i: *i, pos: *pos, q: q.clone(), read, write, premise }
        }
        (FwdR { pos, p }, 0) => {
            let [read, write]: [Proof; 2] = sides.try_into().ok()?;
            CSCRule::CSCFwdR { pos: *pos, p: p.clone(), read, write, premise }
        }
        _ => return None,
    })
}

fn count_in(ctx: &Context, b: &crate::sequent::Belief) -> usize {
    ctx.iter().filter(|x| *x == b).count()
}

/// Multiset union of two contexts: per-belief maximum multiplicity, keeping
/// the left operand's order and appending the right operand's surplus.
pub fn union_contexts(a: &Context, b: &Context) -> Context {
    let mut out = a.clone();
    for (j, belief) in b.iter().enumerate() {
        let seen_in_b = b[..=j].iter().filter(|x| *x == belief).count();
        if seen_in_b > count_in(a, belief) {
            out.push(belief.clone());
        }
    }
    out
}

/// Multiset equality of contexts (order-insensitive, multiplicity-respecting).
pub fn multiset_eq(a: &Context, b: &Context) -> bool {
    a.len() == b.len() && a.iter().all(|x| count_in(a, x) == count_in(b, x))
}

/// Check a compatible-supercontext derivation. The report's invalid path
/// addresses sub-derivations by premise index (`0`, plus `1` for a union's
/// second premise); side-proof failures use the side's offset plus one.
pub fn check_csc(sig: &Signature, d: &CSCDerivation) -> CheckReport {
    let mut stats = ProofStats::default();
    let mut verdict = Verdict::Valid;
    if let Err(e) = check_sequent_wf(sig, &d.judgment.sequent) {
        verdict = Verdict::Invalid { path: vec![], reason: CheckReason::SortError(e.to_string()) };
    }
    for b in &d.judgment.delta {
        if !matches!(verdict, Verdict::Valid) {
            break;
        }
        let single = Sequent::new(vec![], b.clone());
        if let Err(e) = check_sequent_wf(sig, &single) {
            verdict =
                Verdict::Invalid { path: vec![], reason: CheckReason::SortError(e.to_string()) };
        }
    }
    let mut path = Vec::new();
    walk(sig, d, &mut path, &mut stats, &mut verdict);
    CheckReport { verdict, stats }
}

fn fail(verdict: &mut Verdict, path: &[usize], reason: CheckReason) {
    if matches!(verdict, Verdict::Valid) {
        *verdict = Verdict::Invalid { path: path.to_vec(), reason };
    }
}

fn walk(
    sig: &Signature,
    d: &CSCDerivation,
    path: &mut Vec<usize>,
    stats: &mut ProofStats,
    verdict: &mut Verdict,
) {
    if !matches!(verdict, Verdict::Valid) {
        return;
    }
    stats.nodes += 1;
    stats.depth = stats.depth.max(path.len() + 1);
    *stats.rules.entry(d.rule.name().to_string()).or_insert(0) += 1;
    match &d.rule {
        CSCRule::CSCRefl => {
            if d.judgment.delta != d.judgment.sequent.context {
                fail(
                    verdict,
                    path,
                    CheckReason::RuleMismatch(
                        "CSCRefl requires the supercontext to equal the context".into(),
                    ),
                );
            }
        }
        CSCRule::CSCUnion(a, b) => {
            if a.judgment.sequent != d.judgment.sequent || b.judgment.sequent != d.judgment.sequent
            {
                fail(
                    verdict,
                    path,
                    CheckReason::RuleMismatch(
                        "CSCUnion premises must share the conclusion's sequent".into(),
                    ),
                );
                return;
            }
            let union = union_contexts(&a.judgment.delta, &b.judgment.delta);
            if !multiset_eq(&d.judgment.delta, &union) {
                fail(
                    verdict,
                    path,
                    CheckReason::RuleMismatch(
                        "CSCUnion supercontext is not the union of its premises".into(),
                    ),
                );
                return;
            }
            for (k, sub) in [a, b].into_iter().enumerate() {
                path.push(k);
                walk(sig, sub, path, stats, verdict);
                path.pop();
            }
        }
        step => {
            let Some((spec, branch, sides, premise)) = step_to_kernel(step) else {
                unreachable!("all remaining constructors are step rules");
            };
            let prems = match premises(sig, &d.judgment.sequent, &spec) {
                Ok(p) => p,
                Err(reason) => {
                    fail(verdict, path, reason);
                    return;
                }
            };
            let Some(want) = prems.get(branch) else {
                fail(
                    verdict,
                    path,
                    CheckReason::AddressOutOfRange(format!(
                        "branch {branch} of {}",
                        spec.name()
                    )),
                );
                return;
            };
            if premise.judgment.sequent != *want {
                fail(
                    verdict,
                    path,
                    CheckReason::RuleMismatch(format!(
                        "{} premise sequent does not match the rewritten sequent",
                        step.name()
                    )),
                );
                return;
            }
            if premise.judgment.delta != d.judgment.delta {
                fail(
                    verdict,
                    path,
                    CheckReason::RuleMismatch(format!(
                        "{} must preserve the supercontext",
                        step.name()
                    )),
                );
                return;
            }
            if !sides.is_empty() {
                if prems.len() != 1 + sides.len() {
                    fail(
                        verdict,
                        path,
                        CheckReason::RuleMismatch(format!(
                            "{} side premise arity mismatch",
                            step.name()
                        )),
                    );
                    return;
                }
                for (si, (side, want_side)) in sides.iter().zip(prems[1..].iter()).enumerate() {
                    if side.conclusion != *want_side {
                        fail(
                            verdict,
                            path,
                            CheckReason::RuleMismatch(format!(
                                "{} side proof proves the wrong sequent",
                                step.name()
                            )),
                        );
                        return;
                    }
                    let rep = check_proof(sig, side);
                    if let Verdict::Invalid { path: inner, reason } = rep.verdict {
                        let mut full = path.clone();
                        full.push(si + 1);
                        full.extend(inner);
                        fail(verdict, &full, reason);
                        return;
                    }
                }
            }
            path.push(0);
            walk(sig, premise, path, stats, verdict);
            path.pop();
        }
    }
}

/// Join two derivations of supercontexts of the same sequent with a union
/// node. `None` when the sequents differ.
pub fn csc_union(d1: &CSCDerivation, d2: &CSCDerivation) -> Option<CSCDerivation> {
    if d1.judgment.sequent != d2.judgment.sequent {
        return None;
    }
    let delta = union_contexts(&d1.judgment.delta, &d2.judgment.delta);
    Some(CSCDerivation {
        judgment: CSCJudgment::new(delta, d1.judgment.sequent.clone()),
        rule: CSCRule::CSCUnion(Box::new(d1.clone()), Box::new(d2.clone())),
    })
}

/// Errors from replaying a proof path as a supercontext derivation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CSCError {
    #[error("path step {0} is out of range")]
    PathOutOfRange(usize),
    #[error("no supercontext rule covers {0}")]
    Unsupported(String),
    #[error("replay failed: {0}")]
    Replay(String),
}

/// Replay the path from a proof's root to one of its nodes as a derivation of
/// `Δ ≪ Γ ⊢ φ @ g`, where `Δ` is the node's context and `Γ ⊢ φ @ g` the
/// proof's end sequent. The input proof must be valid.
///
/// Goal desynchronization: steps with no context effect (transitivity of
/// flows, permission variance, relabel/forward side branches) are skipped;
/// past such a step the replayed goal may differ from the proof's, which only
/// context-independent rules can follow — guaranteed for valid proofs because
/// those subtrees keep atomic goals.
pub fn csc_of_path(
    sig: &Signature,
    root: &Proof,
    path: &[usize],
) -> Result<CSCDerivation, CSCError> {
    struct Step {
        concl: Sequent,
        spec: RuleSpec,
        branch: usize,
        sides: Vec<Proof>,
    }
    let mut steps: Vec<Step> = Vec::new();
    let mut js = root.conclusion.clone();
    let mut synced = true;
    let mut node = root;
    for (si, &k) in path.iter().enumerate() {
        let child = node.children.get(k).ok_or(CSCError::PathOutOfRange(si))?;
        use RuleSpec::*;
        let planned: Option<(RuleSpec, usize, Vec<Proof>)> = match &node.spec {
            Weakening { .. } | Unknown { .. } | Malformed { .. } => {
                return Err(CSCError::Unsupported(node.spec.name()))
            }
            Contraction { .. } | Exchange { .. } | AndL { .. } | ForallL { .. }
            | ExistsL { .. } | SaysL { .. } | SelfLIntro { .. } | SelfLElim { .. } => {
                Some((node.spec.clone(), 0, vec![]))
            }
            OrL { .. } | ImpL { .. } => Some((node.spec.clone(), k, vec![])),
            VarL { .. } => {
                if k == 0 {
                    Some((node.spec.clone(), 0, vec![node.children[1].clone()]))
                } else {
                    None
                }
            }
            FwdL { .. } => {
                if k == 0 {
                    Some((
                        node.spec.clone(),
                        0,
                        vec![node.children[1].clone(), node.children[2].clone()],
                    ))
                } else {
                    None
                }
            }
            ImpR => {
                if !synced {
                    return Err(CSCError::Unsupported(
                        "ImpR past a goal desynchronization".into(),
                    ));
                }
                Some((ImpR, 0, vec![]))
            }
            AndR => synced.then(|| (AndR, k, vec![])),
            OrR1 => synced.then(|| (OrR1, 0, vec![])),
            OrR2 => synced.then(|| (OrR2, 0, vec![])),
            ForallR { .. } | ExistsR { .. } | SaysR | SelfRIntro { .. } | SelfRElim { .. } => {
                synced.then(|| (node.spec.clone(), 0, vec![]))
            }
            VarR { .. } => (synced && k == 0)
                .then(|| (node.spec.clone(), 0, vec![node.children[1].clone()])),
            FwdR { .. } => (synced && k == 0).then(|| {
                (
                    node.spec.clone(),
                    0,
                    vec![node.children[1].clone(), node.children[2].clone()],
                )
            }),
            FlowsToTrans { .. } | CRVar { .. } | CWVar { .. } => None,
            Ax { .. } | TrueR | FalseL { .. } | FlowsToRefl => {
                return Err(CSCError::PathOutOfRange(si))
            }
        };
        match planned {
            Some((spec, branch, sides)) => {
                let prems = premises(sig, &js, &spec)
                    .map_err(|e| CSCError::Replay(format!("{}: {e}", spec.name())))?;
                let want = prems
                    .get(branch)
                    .ok_or_else(|| CSCError::Replay(format!("{} branch", spec.name())))?
                    .clone();
                steps.push(Step { concl: js.clone(), spec, branch, sides });
                // The implication's antecedent branch resets the goal, which
                // re-synchronizes the replay with the proof.
                if let RuleSpec::ImpL { .. } = &steps.last().unwrap().spec {
                    if branch == 0 {
                        synced = true;
                    }
                }
                js = want;
            }
            None => {
                synced = false;
            }
        }
        if js.context != child.conclusion.context {
            return Err(CSCError::Replay(
                "replayed context diverged from the proof".into(),
            ));
        }
        node = child;
    }
    let delta = node.conclusion.context.clone();
    let mut d = CSCDerivation {
        judgment: CSCJudgment::new(delta.clone(), js),
        rule: CSCRule::CSCRefl,
    };
    for step in steps.into_iter().rev() {
        let rule = step_from_kernel(&step.spec, step.branch, step.sides, Box::new(d))
            .ok_or_else(|| CSCError::Unsupported(step.spec.name()))?;
        d = CSCDerivation { judgment: CSCJudgment::new(delta.clone(), step.concl), rule };
    }
    Ok(d)
}

fn witness_terms(sig: &Signature, s: &Sequent, sort: &Sort) -> Vec<Term> {
    let mut out = sig.constants_of(sort);
    let mut fv = BTreeSet::new();
    s.free_vars(&mut fv);
    for (name, so) in fv {
        if so == *sort {
            out.push(Term::var(&name, so));
        }
    }
    out
}

fn fresh_eigen(sig: &Signature, s: &Sequent) -> String {
    let mut avoid: BTreeSet<String> = sig.funcs().map(|f| f.name.clone()).collect();
    let mut fv = BTreeSet::new();
    s.free_vars(&mut fv);
    avoid.extend(fv.into_iter().map(|(n, _)| n));
    fresh_name("w", &avoid)
}

fn expansion_candidates(sig: &Signature, js: &Sequent) -> Vec<(RuleSpec, usize)> {
    use RuleSpec::*;
    let mut out = Vec::new();
    for (i, b) in js.context.iter().enumerate() {
        out.push((Contraction { i }, 0));
        if i + 1 < js.context.len() {
            out.push((Exchange { i }, 0));
        }
        match &b.formula {
            Formula::And(..) => out.push((AndL { i }, 0)),
            Formula::Or(..) => {
                out.push((OrL { i }, 0));
                out.push((OrL { i }, 1));
            }
            Formula::Implies(..) => {
                out.push((ImpL { i }, 0));
                out.push((ImpL { i }, 1));
            }
            Formula::Forall(bind, _) => {
                for t in witness_terms(sig, js, &bind.sort) {
                    out.push((ForallL { i, t }, 0));
                }
            }
            Formula::Exists(..) => out.push((ExistsL { i, eigen: fresh_eigen(sig, js) }, 0)),
            Formula::Says(..) => out.push((SaysL { i }, 0)),
            _ => {}
        }
        let stack = &b.gp.stack;
        for pos in 0..stack.len() {
            if pos + 1 < stack.len() && stack[pos] == stack[pos + 1] {
                out.push((SelfLIntro { i, pos }, 0));
            }
            out.push((SelfLElim { i, pos }, 0));
        }
    }
    match &js.goal.formula {
        Formula::And(..) => {
            out.push((AndR, 0));
            out.push((AndR, 1));
        }
        Formula::Or(..) => {
            out.push((OrR1, 0));
            out.push((OrR2, 0));
        }
        Formula::Implies(..) => out.push((ImpR, 0)),
        Formula::Forall(..) => out.push((ForallR { eigen: fresh_eigen(sig, js) }, 0)),
        Formula::Exists(bind, _) => {
            for t in witness_terms(sig, js, &bind.sort) {
                out.push((ExistsR { t }, 0));
            }
        }
        Formula::Says(..) => out.push((SaysR, 0)),
        _ => {}
    }
    let gstack = &js.goal.gp.stack;
    for pos in 0..gstack.len() {
        if pos + 1 < gstack.len() && gstack[pos] == gstack[pos + 1] {
            out.push((SelfRIntro { pos }, 0));
        }
        out.push((SelfRElim { pos }, 0));
    }
    out
}

/// Cap on distinct judgments visited during enumeration, independent of the
/// depth bound.
const ENUMERATION_CAP: usize = 20_000;

/// Enumerate supercontexts of `s` derivable within `depth` step rules.
/// Relabelling and forwarding steps are not enumerated (each would require
/// synthesizing a kernel side proof); [`check_csc`] accepts them and
/// [`csc_of_path`] replays them from a hosting proof. Results are
/// deduplicated up to context multiset equality; the reflexive pair comes
/// first.
pub fn enumerate_cscs(
    sig: &Signature,
    s: &Sequent,
    depth: usize,
) -> Vec<(Context, CSCDerivation)> {
    struct Entry {
        js: Sequent,
        chain: Vec<(Sequent, RuleSpec, usize)>,
    }
    let mut queue: std::collections::VecDeque<Entry> = std::collections::VecDeque::new();
    let mut visited: Vec<Sequent> = vec![s.clone()];
    queue.push_back(Entry { js: s.clone(), chain: vec![] });
    let mut out: Vec<(Context, CSCDerivation)> = Vec::new();
    while let Some(entry) = queue.pop_front() {
        let delta = entry.js.context.clone();
        let mut d = CSCDerivation {
            judgment: CSCJudgment::new(delta.clone(), entry.js.clone()),
            rule: CSCRule::CSCRefl,
        };
        for (concl, spec, branch) in entry.chain.iter().rev() {
            let rule = step_from_kernel(spec, *branch, vec![], Box::new(d))
                .expect("enumerated steps always have a shadow rule");
            d = CSCDerivation {
                judgment: CSCJudgment::new(delta.clone(), concl.clone()),
                rule,
            };
        }
        if !out.iter().any(|(existing, _)| multiset_eq(existing, &delta)) {
            out.push((delta, d));
        }
        if entry.chain.len() >= depth || visited.len() >= ENUMERATION_CAP {
            continue;
        }
        for (spec, branch) in expansion_candidates(sig, &entry.js) {
            let Ok(prems) = premises(sig, &entry.js, &spec) else {
                continue;
            };
            let Some(next) = prems.get(branch) else {
                continue;
            };
            if visited.contains(next) {
                continue;
            }
            visited.push(next.clone());
            let mut chain = entry.chain.clone();
            chain.push((entry.js.clone(), spec, branch));
            queue.push_back(Entry { js: next.clone(), chain });
            if visited.len() >= ENUMERATION_CAP {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequent::{Belief, GenPrincipal};
    use crate::signature::{FuncDecl, RelDecl};

    fn sig() -> Signature {
        let mut s = Signature::new();
        for c in ["Pub", "Sec"] {
            s.add_func(FuncDecl { name: c.into(), args: vec![], result: Sort::label() })
                .unwrap();
        }
        for c in ["Alice", "Bob"] {
            s.add_func(FuncDecl { name: c.into(), args: vec![], result: Sort::principal() })
                .unwrap();
        }
        s.add_rel(RelDecl { name: "R".into(), args: vec![Sort::principal()] }).unwrap();
        s
    }

    fn c(n: &str) -> Term {
        Term::constant(n)
    }

    fn r(n: &str) -> Formula {
        Formula::rel("R", vec![c(n)])
    }

    fn gpub() -> GenPrincipal {
        GenPrincipal::ground_only(c("Pub"))
    }

    fn refl(s: &Sequent) -> CSCDerivation {
        CSCDerivation {
            judgment: CSCJudgment::new(s.context.clone(), s.clone()),
            rule: CSCRule::CSCRefl,
        }
    }

    #[test]
    fn refl_is_a_csc_and_requires_the_exact_context() {
        let s = sig();
        let seq = Sequent::new(
            vec![Belief::new(r("Alice"), gpub())],
            Belief::new(r("Bob"), gpub()),
        );
        assert!(check_csc(&s, &refl(&seq)).is_valid());

        let wrong = CSCDerivation {
            judgment: CSCJudgment::new(vec![], seq.clone()),
            rule: CSCRule::CSCRefl,
        };
        assert!(!check_csc(&s, &wrong).is_valid());
    }

    #[test]
    fn or_branches_are_discoverable_and_union_with_the_context() {
        let s = sig();
        let or_b = Belief::new(Formula::or(r("Alice"), r("Bob")), gpub());
        let goal = Belief::new(r("Alice"), gpub());
        let seq = Sequent::new(vec![or_b.clone()], goal.clone());

        // Direct branch: Δ = [R(Bob)].
        let branch_seq = Sequent::new(vec![Belief::new(r("Bob"), gpub())], goal.clone());
        let branch = CSCDerivation {
            judgment: CSCJudgment::new(branch_seq.context.clone(), seq.clone()),
            rule: CSCRule::CSCOrL2 { i: 0, premise: Box::new(refl(&branch_seq)) },
        };
        assert!(check_csc(&s, &branch).is_valid());

        // Union with reflexivity: Δ = Γ ∪ {R(Bob)}.
        let union = csc_union(&refl(&seq), &branch).expect("same sequent");
        assert!(check_csc(&s, &union).is_valid());
        assert!(multiset_eq(
            &union.judgment.delta,
            &vec![or_b, Belief::new(r("Bob"), gpub())]
        ));
    }

    #[test]
    fn union_rejects_mismatched_sequents() {
        let s = sig();
        let seq1 = Sequent::new(vec![], Belief::new(r("Alice"), gpub()));
        let seq2 = Sequent::new(vec![], Belief::new(r("Bob"), gpub()));
        assert!(csc_union(&refl(&seq1), &refl(&seq2)).is_none());
        let forged = CSCDerivation {
            judgment: CSCJudgment::new(vec![], seq1.clone()),
            rule: CSCRule::CSCUnion(Box::new(refl(&seq1)), Box::new(refl(&seq2))),
        };
        assert!(!check_csc(&s, &forged).is_valid());
    }

    #[test]
    fn implication_steps_reset_or_keep_the_goal() {
        let s = sig();
        let imp = Belief::new(Formula::implies(r("Alice"), c("Pub"), r("Bob")), gpub());
        let goal = Belief::new(r("Bob"), gpub());
        let seq = Sequent::new(vec![imp], goal.clone());

        // CSCImpL1 keeps the goal and swaps in the consequent.
        let kept = Sequent::new(vec![Belief::new(r("Bob"), gpub())], goal);
        let d1 = CSCDerivation {
            judgment: CSCJudgment::new(kept.context.clone(), seq.clone()),
            rule: CSCRule::CSCImpL1 { i: 0, premise: Box::new(refl(&kept)) },
        };
        assert!(check_csc(&s, &d1).is_valid());

        // CSCImpL2 discards the goal entirely and pursues the antecedent.
        let reset = Sequent::new(vec![], Belief::new(r("Alice"), gpub()));
        let d2 = CSCDerivation {
            judgment: CSCJudgment::new(vec![], seq.clone()),
            rule: CSCRule::CSCImpL2 { i: 0, premise: Box::new(refl(&reset)) },
        };
        assert!(check_csc(&s, &d2).is_valid());
    }

    #[test]
    fn forall_step_rejects_ill_sorted_witnesses() {
        let s = sig();
        let body = Formula::rel("R", vec![Term::Bound(0)]);
        let all = Belief::new(
            Formula::Forall(crate::formula::Binder::new("x", Sort::principal()), Box::new(body)),
            gpub(),
        );
        let goal = Belief::new(r("Alice"), gpub());
        let seq = Sequent::new(vec![all], goal.clone());
        let inst = Sequent::new(vec![Belief::new(r("Alice"), gpub())], goal.clone());
        let good = CSCDerivation {
            judgment: CSCJudgment::new(inst.context.clone(), seq.clone()),
            rule: CSCRule::CSCForallL { i: 0, t: c("Alice"), premise: Box::new(refl(&inst)) },
        };
        assert!(check_csc(&s, &good).is_valid());

        let bad = CSCDerivation {
            judgment: CSCJudgment::new(inst.context.clone(), seq.clone()),
            rule: CSCRule::CSCForallL { i: 0, t: c("Pub"), premise: Box::new(refl(&inst)) },
        };
        assert!(!check_csc(&s, &bad).is_valid());
    }

    fn var_over_or() -> (Signature, Proof) {
        let s = sig();
        let g_low = gpub().push(c("Bob"), c("Pub"));
        let g_high = gpub().push(c("Bob"), c("Sec"));
        let ctx = vec![
            Belief::new(r("Alice"), g_low.clone()),
            Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high.clone()),
        ];
        let or_f = Formula::or(r("Alice"), r("Bob"));
        let inner = Proof::leaf(
            Sequent::new(ctx.clone(), Belief::new(r("Alice"), g_low.clone())),
            RuleSpec::Ax { i: 0 },
        );
        let or_node = Proof::new(
            Sequent::new(ctx.clone(), Belief::new(or_f.clone(), g_low)),
            RuleSpec::OrR1,
            vec![inner],
        );
        let side = Proof::leaf(
            Sequent::new(
                ctx.clone(),
                Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high.clone()),
            ),
            RuleSpec::Ax { i: 1 },
        );
        let root = Proof::new(
            Sequent::new(ctx, Belief::new(or_f, g_high)),
            RuleSpec::VarR { pos: 0, l2: c("Pub") },
            vec![or_node, side],
        );
        assert!(check_proof(&s, &root).is_valid());
        (s, root)
    }

    #[test]
    fn path_replay_covers_or_elimination() {
        let s = sig();
        let or_b = Belief::new(Formula::or(r("Alice"), r("Bob")), gpub());
        let other = Belief::new(r("Alice"), gpub());
        let goal = Belief::new(r("Alice"), gpub());
        let ctx = vec![other.clone(), or_b.clone()];
        let b0 = Proof::leaf(
            Sequent::new(vec![other.clone(), Belief::new(r("Alice"), gpub())], goal.clone()),
            RuleSpec::Ax { i: 0 },
        );
        let b1 = Proof::leaf(
            Sequent::new(vec![other.clone(), Belief::new(r("Bob"), gpub())], goal.clone()),
            RuleSpec::Ax { i: 0 },
        );
        let p = Proof::new(Sequent::new(ctx, goal), RuleSpec::OrL { i: 1 }, vec![b0, b1]);
        assert!(check_proof(&s, &p).is_valid());
        for (k, want_branch) in [(0usize, r("Alice")), (1, r("Bob"))] {
            let d = csc_of_path(&s, &p, &[k]).expect("replays");
            assert!(check_csc(&s, &d).is_valid(), "branch {k}");
            assert_eq!(d.judgment.sequent, p.conclusion);
            assert_eq!(d.judgment.delta[1].formula, want_branch);
        }
    }

    #[test]
    fn path_replay_crosses_goal_rules_and_their_side_branches() {
        let (s, p) = var_over_or();
        // Main spine: VarR then OrR1 down to the axiom.
        let d = csc_of_path(&s, &p, &[0, 0]).expect("replays the spine");
        assert!(check_csc(&s, &d).is_valid());
        assert_eq!(d.judgment.delta, p.conclusion.context);
        assert_eq!(d.judgment.sequent, p.conclusion);
        // Side branch: skipped step, reflexive tail.
        let dside = csc_of_path(&s, &p, &[1]).expect("replays the side");
        assert!(check_csc(&s, &dside).is_valid());
        assert_eq!(dside.judgment.delta, p.conclusion.context);
    }

    #[test]
    fn enumeration_depth_zero_is_reflexivity_only() {
        let s = sig();
        let seq = Sequent::new(
            vec![Belief::new(r("Alice"), gpub())],
            Belief::new(r("Bob"), gpub()),
        );
        let got = enumerate_cscs(&s, &seq, 0);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, seq.context);
        assert_eq!(got[0].1.rule.name(), "CSCRefl");
    }

    #[test]
    fn enumeration_discovers_both_or_branches() {
        let s = sig();
        let or_b = Belief::new(Formula::or(r("Alice"), r("Bob")), gpub());
        let seq = Sequent::new(vec![or_b.clone()], Belief::new(r("Alice"), gpub()));
        let got = enumerate_cscs(&s, &seq, 2);
        let has = |delta: &Context| got.iter().any(|(d, _)| multiset_eq(d, delta));
        assert!(has(&vec![Belief::new(r("Alice"), gpub())]));
        assert!(has(&vec![Belief::new(r("Bob"), gpub())]));
        // Contraction then a branch yields the union-shaped supercontext.
        assert!(has(&vec![or_b.clone(), Belief::new(r("Alice"), gpub())]));
        assert!(has(&vec![or_b, Belief::new(r("Bob"), gpub())]));
        for (_, d) in &got {
            assert!(check_csc(&s, d).is_valid());
        }
    }

    #[test]
    fn enumerated_pairs_union_cleanly() {
        let s = sig();
        let or_b = Belief::new(Formula::or(r("Alice"), r("Bob")), gpub());
        let seq = Sequent::new(vec![or_b], Belief::new(r("Alice"), gpub()));
        let got = enumerate_cscs(&s, &seq, 1);
        assert!(got.len() >= 3);
        for (_, d1) in &got {
            for (_, d2) in &got {
                let u = csc_union(d1, d2).expect("same sequent");
                assert!(check_csc(&s, &u).is_valid());
            }
        }
    }
}
