//! Non-interference auditing.
//!
//! Given a valid proof of `Γ ⊢ ψ @ g₂` and the index of a *marked* belief
//! `φ @ g₁` in `Γ`, the auditor produces a checkable witness explaining the
//! marked belief's relationship to the conclusion:
//!
//! * [`NIWitness::Pruned`] — a proof of `Γ ∖ marked ⊢ ψ @ g₂`, showing the
//!   conclusion never needed the marked belief at all; or
//! * [`NIWitness::Influence`] — a compatible-supercontext derivation
//!   `Δ ≪ Γ ⊢ ψ @ g₂` together with principals `g₁′ ∈ 𝒢(φ @ g₁)` and
//!   `g₂′ ∈ 𝒢(ψ @ g₂)` and a derivation of `Δ ⊢ g₁′·g₁″ CanInfl g₂′`,
//!   naming exactly which voice of the marked belief was able to influence
//!   which voice of the goal.
//!
//! The influence witness is reconstructed from the proof itself: the auditor
//! locates the axiom that consumes the marked belief, replays the formula
//! rules along that path to obtain the supercontext `Δ`, and converts every
//! principal-manipulation step on the path (says unfolding, relabelling,
//! forwarding, voice duplication) into the corresponding speaks-for piece.
//! Chaining the pieces yields the CanInfl derivation, which is re-checked
//! before it is returned.
//!
//! [`audit_sf_only`] additionally discharges implication assumptions by
//! cutting caller-supplied proofs against the root context, guaranteeing
//! that the final influence derivation uses no implication-based trust step.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::csc::{check_csc, csc_union, step_from_kernel, CSCDerivation, CSCJudgment, CSCRule};
use crate::formula::Formula;
use crate::kernel::{check_proof, premises, Proof, RuleSpec};
use crate::matching::Bindings;
use crate::sequent::{Belief, Context, GenPrincipal, Sequent};
use crate::signature::Signature;
use crate::term::Term;
use crate::transform::{eliminate_cut, retarget_context, try_strengthen, weaken_insert};
use crate::trust::{
    check_ci, g_set, CIDerivation, CIJudgment, CIRule, SFDerivation, SFJudgment, SFRule,
};

/// Failures of the auditor.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    /// The proof does not check, or the marked index is out of range.
    #[error("invalid audit input: {0}")]
    InputInvalid(String),
    /// The marked belief reaches the goal through an implication assumption
    /// for which no discharging proof was supplied.
    #[error("implication not discharged: {0}")]
    ImplicationNotDischarged(String),
    /// The proof consumes the marked belief in a position the auditor cannot
    /// explain with a speaks-for witness.
    #[error("unsupported audit shape: {0}")]
    Unsupported(String),
    /// An internal reconstruction step produced an object that failed its
    /// own re-check; this indicates a bug in the auditor.
    #[error("internal audit failure: {0}")]
    Internal(String),
}

/// A checkable non-interference witness for one marked context belief.
#[derive(Debug, Clone, PartialEq)]
pub enum NIWitness {
    /// The conclusion holds without the marked belief: a valid proof of
    /// `Γ ∖ marked ⊢ ψ @ g₂`.
    Pruned(Proof),
    /// The marked belief influences the conclusion. All components re-check:
    /// `csc` derives `Δ ≪ Γ ⊢ ψ @ g₂`, and `ci` derives
    /// `Δ ⊢ g₁′·g₁″ CanInfl g₂′` where `g₁′` matches a pattern of
    /// `𝒢(φ @ g₁)` under `g1_binding` and `g₂′` matches a pattern of
    /// `𝒢(ψ @ g₂)` under `g2_binding`.
    Influence {
        /// The compatible supercontext in which the trust relation holds.
        delta: Context,
        /// Derivation of `Δ ≪ Γ ⊢ ψ @ g₂`.
        csc: CSCDerivation,
        /// The influencing voice of the marked belief.
        g1_prime: GenPrincipal,
        /// Substitution matching `g1_prime` against its `𝒢`-pattern.
        g1_binding: Bindings,
        /// Inactive extension pairs appended to `g1_prime` in the CanInfl
        /// judgment; the construction always yields the empty (shortest)
        /// extension.
        g1_ext: Vec<(Term, Term)>,
        /// The influenced voice of the goal.
        g2_prime: GenPrincipal,
        /// Substitution matching `g2_prime` against its `𝒢`-pattern.
        g2_binding: Bindings,
        /// Derivation of `Δ ⊢ g1_prime·g1_ext CanInfl g2_prime`.
        ci: CIDerivation,
    },
}

/// Audit a valid proof for the marked context belief.
///
/// Prefers a [`NIWitness::Pruned`] witness whenever the proof still goes
/// through without the belief; otherwise reconstructs an influence witness
/// from the axiom that consumes it. Influence that is mediated by an
/// implication assumption is reported as [`AuditError::Unsupported`]; use
/// [`audit_sf_only`] with discharging proofs to audit through implications.
pub fn audit(sig: &Signature, proof: &Proof, marked: usize) -> Result<NIWitness, AuditError> {
    validate(sig, proof, marked)?;
    if let Some(pruned) = try_strengthen(sig, proof, marked) {
        return Ok(NIWitness::Pruned(pruned));
    }
    match find_use(proof, marked)? {
        Found::Clean(path, use_idx) => build_influence(sig, proof, marked, &path, use_idx),
        Found::Crossed(imp) => Err(AuditError::Unsupported(format!(
            "the marked belief reaches the goal only through the implication assumption {}; \
             supply a discharging proof to audit_sf_only to audit past it",
            imp
        ))),
    }
}

/// Audit while refusing implication-based trust.
///
/// Every implication assumption the marked belief flows through must be
/// provable from the rest of the root context; `discharges` supplies those
/// proofs (each concluding `Γ ∖ j ⊢ Γ[j]` for the implication at `j`). The
/// auditor cuts them in, which removes the implication from the influence
/// path, and then audits the resulting proof. The returned witness is stated
/// over the original end sequent, and its CanInfl derivation contains no
/// implication step.
pub fn audit_sf_only(
    sig: &Signature,
    proof: &Proof,
    marked: usize,
    discharges: &[Proof],
) -> Result<NIWitness, AuditError> {
    validate(sig, proof, marked)?;
    let mut cur = proof.clone();
    let mut marked_cur = marked;
    // Stack of (position, belief, marked position) at each removal.
    let mut removed: Vec<(usize, Belief, usize)> = Vec::new();
    for _ in 0..=proof.conclusion.context.len() {
        if let Some(pruned) = try_strengthen(sig, &cur, marked_cur) {
            let out = restore_weakened(&pruned, &removed, true);
            return finish_pruned(sig, proof, marked, out);
        }
        match find_use(&cur, marked_cur)? {
            Found::Clean(..) => {
                let restored = restore_weakened(&cur, &removed, false);
                if restored.conclusion != proof.conclusion {
                    return Err(AuditError::Internal(
                        "restoring discharged assumptions changed the end sequent".into(),
                    ));
                }
                if let Some(pruned) = try_strengthen(sig, &restored, marked) {
                    return Ok(NIWitness::Pruned(pruned));
                }
                return match find_use(&restored, marked)? {
                    Found::Clean(path, use_idx) => {
                        build_influence(sig, &restored, marked, &path, use_idx)
                    }
                    Found::Crossed(..) => Err(AuditError::Internal(
                        "an implication crossing reappeared after discharging".into(),
                    )),
                };
            }
            Found::Crossed(imp) => {
                let ctx = &cur.conclusion.context;
                let j = ctx.iter().position(|b| *b == imp).ok_or_else(|| {
                    AuditError::ImplicationNotDischarged(format!(
                        "the mediating implication {imp} is not a root assumption"
                    ))
                })?;
                let mut reduced = ctx.clone();
                let bj = reduced.remove(j);
                let want = Sequent::new(reduced, bj.clone());
                let d = discharges
                    .iter()
                    .find(|d| d.conclusion == want)
                    .ok_or_else(|| {
                        AuditError::ImplicationNotDischarged(format!(
                            "no discharging proof concludes {want}"
                        ))
                    })?;
                let next = eliminate_cut(sig, d, &cur, j).map_err(|e| {
                    AuditError::Unsupported(format!("discharging the implication failed: {e}"))
                })?;
                if j == marked_cur {
                    // The marked belief itself was an implication that the
                    // discharge proves outright: the cut result is a proof
                    // without it, i.e. a pruning witness.
                    let out = restore_weakened(&next, &removed, true);
                    return finish_pruned(sig, proof, marked, out);
                }
                removed.push((j, bj, marked_cur));
                if j < marked_cur {
                    marked_cur -= 1;
                }
                cur = next;
            }
        }
    }
    Err(AuditError::Internal(
        "discharging implication assumptions did not terminate".into(),
    ))
}

/// Re-check a witness against the proof and marked index it was issued for.
///
/// Returns `Err` with a description of the first discrepancy: an invalid
/// component, a mismatched end sequent, or a principal that does not match
/// its recorded pattern binding.
pub fn verify_witness(
    sig: &Signature,
    proof: &Proof,
    marked: usize,
    witness: &NIWitness,
) -> Result<(), String> {
    let root = &proof.conclusion;
    if marked >= root.context.len() {
        return Err(format!(
            "marked index {marked} out of range for a context of {}",
            root.context.len()
        ));
    }
    match witness {
        NIWitness::Pruned(q) => {
            let mut ctx = root.context.clone();
            ctx.remove(marked);
            let want = Sequent::new(ctx, root.goal.clone());
            if q.conclusion != want {
                return Err(format!(
                    "pruned proof concludes {}, expected {want}",
                    q.conclusion
                ));
            }
            if !check_proof(sig, q).is_valid() {
                return Err("pruned proof does not check".into());
            }
            Ok(())
        }
        NIWitness::Influence {
            delta,
            csc,
            g1_prime,
            g1_binding,
            g1_ext,
            g2_prime,
            g2_binding,
            ci,
        } => {
            if csc.judgment.sequent != *root {
                return Err(format!(
                    "supercontext judgment targets {}, expected {root}",
                    csc.judgment.sequent
                ));
            }
            if csc.judgment.delta != *delta {
                return Err("supercontext judgment does not carry the stated delta".into());
            }
            if !check_csc(sig, csc).is_valid() {
                return Err("supercontext derivation does not check".into());
            }
            if ci.judgment.context != *delta {
                return Err("influence derivation is not stated over delta".into());
            }
            let mut want_g1 = g1_prime.clone();
            for (pt, lt) in g1_ext {
                want_g1 = want_g1.push(pt.clone(), lt.clone());
            }
            if ci.judgment.g1 != want_g1 {
                return Err("influence source is not g1_prime extended by g1_ext".into());
            }
            if ci.judgment.g2 != *g2_prime {
                return Err("influence target is not g2_prime".into());
            }
            if !check_ci(sig, ci).is_valid() {
                return Err("influence derivation does not check".into());
            }
            let b = &root.context[marked];
            if !g_set(&b.formula, &b.gp).member_with(sig, g1_prime, g1_binding) {
                return Err("g1_prime does not match a principal pattern of the marked belief"
                    .into());
            }
            if !g_set(&root.goal.formula, &root.goal.gp).member_with(sig, g2_prime, g2_binding) {
                return Err("g2_prime does not match a principal pattern of the goal".into());
            }
            Ok(())
        }
    }
}

fn validate(sig: &Signature, proof: &Proof, marked: usize) -> Result<(), AuditError> {
    let report = check_proof(sig, proof);
    if let crate::kernel::Verdict::Invalid { path, reason } = &report.verdict {
        return Err(AuditError::InputInvalid(format!(
            "the audited proof does not check at {path:?}: {reason}"
        )));
    }
    if marked >= proof.conclusion.context.len() {
        return Err(AuditError::InputInvalid(format!(
            "marked index {marked} out of range for a context of {}",
            proof.conclusion.context.len()
        )));
    }
    Ok(())
}

/// Outcome of searching the proof for the axiom that consumes the marked
/// belief's lineage.
enum Found {
    /// Path from the root and the context index consumed at the axiom.
    Clean(Vec<usize>, usize),
    /// The use path steps into the test premise of `ImpL` on the way; the
    /// crossed implication belief is recorded.
    Crossed(Belief),
}

struct SearchState {
    clean: Option<(Vec<usize>, usize)>,
    crossed: Option<Belief>,
    other: Option<String>,
}

/// Descendant indices of a lineage set in premise `k`, plus whether the
/// premise still proves (an ancestor of) the root goal.
fn child_lineage(spec: &RuleSpec, k: usize, s: &BTreeSet<usize>) -> (BTreeSet<usize>, bool) {
    use RuleSpec::*;
    let drop_at = |i: usize| -> BTreeSet<usize> {
        s.iter()
            .filter(|&&x| x != i)
            .map(|&x| if x > i { x - 1 } else { x })
            .collect()
    };
    let insert_after = |i: usize| -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &x in s {
            if x < i {
                out.insert(x);
            } else if x == i {
                out.insert(i);
                out.insert(i + 1);
            } else {
                out.insert(x + 1);
            }
        }
        out
    };
    match spec {
        Weakening { i } => (drop_at(*i), true),
        Contraction { i } | AndL { i } => (insert_after(*i), true),
        Exchange { i } => {
            let i = *i;
            (
                s.iter()
                    .map(|&x| {
                        if x == i {
                            i + 1
                        } else if x == i + 1 {
                            i
                        } else {
                            x
                        }
                    })
                    .collect(),
                true,
            )
        }
        ImpL { i } if k == 0 => (drop_at(*i), true),
        VarL { .. } | FwdL { .. } | VarR { .. } | FwdR { .. } if k > 0 => (s.clone(), false),
        FlowsToTrans { .. } | CRVar { .. } | CWVar { .. } => (s.clone(), false),
        _ => (s.clone(), true),
    }
}

fn search_uses(
    node: &Proof,
    s: &BTreeSet<usize>,
    synced: bool,
    imp: &Option<Belief>,
    path: &mut Vec<usize>,
    out: &mut SearchState,
) {
    if out.clean.is_some() || s.is_empty() {
        return;
    }
    match &node.spec {
        RuleSpec::Ax { i } if s.contains(i) => {
            if !synced {
                if out.other.is_none() {
                    out.other = Some(
                        "the marked belief is consumed inside a relabelling, forwarding, \
                         or permission side condition"
                            .into(),
                    );
                }
            } else if let Some(b) = imp {
                if out.crossed.is_none() {
                    out.crossed = Some(b.clone());
                }
            } else {
                out.clean = Some((path.clone(), *i));
            }
            return;
        }
        RuleSpec::FalseL { i } if s.contains(i) => {
            if out.other.is_none() {
                out.other = Some("the marked belief is consumed by falsum elimination".into());
            }
            return;
        }
        _ => {}
    }
    for (k, child) in node.children.iter().enumerate() {
        let (s2, sync2) = child_lineage(&node.spec, k, s);
        let imp2 = match &node.spec {
            RuleSpec::ImpL { i } if k == 0 => imp
                .clone()
                .or_else(|| Some(node.conclusion.context[*i].clone())),
            _ => imp.clone(),
        };
        path.push(k);
        search_uses(child, &s2, synced && sync2, &imp2, path, out);
        path.pop();
        if out.clean.is_some() {
            return;
        }
    }
}

fn find_use(proof: &Proof, marked: usize) -> Result<Found, AuditError> {
    let mut st = SearchState {
        clean: None,
        crossed: None,
        other: None,
    };
    let s: BTreeSet<usize> = std::iter::once(marked).collect();
    search_uses(proof, &s, true, &None, &mut Vec::new(), &mut st);
    if let Some((path, i)) = st.clean {
        return Ok(Found::Clean(path, i));
    }
    if let Some(b) = st.crossed {
        return Ok(Found::Crossed(b));
    }
    if let Some(msg) = st.other {
        return Err(AuditError::Unsupported(msg));
    }
    Err(AuditError::Internal(
        "the marked belief cannot be pruned, yet no consuming axiom was found".into(),
    ))
}

/// Pin down the single lineage index at each node of the use path via
/// depth-first search over the per-rule ancestor candidates.
fn trace_indices(
    proof: &Proof,
    path: &[usize],
    marked: usize,
    use_idx: usize,
) -> Option<Vec<usize>> {
    fn go(
        node: &Proof,
        path: &[usize],
        depth: usize,
        c: usize,
        use_idx: usize,
        acc: &mut Vec<usize>,
    ) -> bool {
        acc.push(c);
        if depth == path.len() {
            if c == use_idx {
                return true;
            }
            acc.pop();
            return false;
        }
        let k = path[depth];
        if let Some(child) = node.children.get(k) {
            for c2 in candidates_forward(&node.spec, k, c) {
                if go(child, path, depth + 1, c2, use_idx, acc) {
                    return true;
                }
            }
        }
        acc.pop();
        false
    }
    // Forward direction: premise indices a conclusion index can become.
    fn candidates_forward(spec: &RuleSpec, k: usize, c: usize) -> Vec<usize> {
        use RuleSpec::*;
        match spec {
            Weakening { i } => {
                if c == *i {
                    vec![]
                } else if c > *i {
                    vec![c - 1]
                } else {
                    vec![c]
                }
            }
            ImpL { i } if k == 0 => {
                if c == *i {
                    vec![]
                } else if c > *i {
                    vec![c - 1]
                } else {
                    vec![c]
                }
            }
            Contraction { i } | AndL { i } => {
                if c < *i {
                    vec![c]
                } else if c == *i {
                    vec![*i, *i + 1]
                } else {
                    vec![c + 1]
                }
            }
            Exchange { i } => {
                let i = *i;
                vec![if c == i {
                    i + 1
                } else if c == i + 1 {
                    i
                } else {
                    c
                }]
            }
            _ => vec![c],
        }
    }
    let mut acc = Vec::with_capacity(path.len() + 1);
    if go(proof, path, 0, marked, use_idx, &mut acc) {
        Some(acc)
    } else {
        None
    }
}

/// A principal-manipulation step applied to the marked belief's voice on the
/// way down the use path.
enum LEvent {
    /// Says unfolding pushed a `(p, l)` pair.
    Push(Term, Term),
    /// Relabelling of the pair at `pos` to label `l2`, justified by `side`.
    Var { pos: usize, l2: Term, side: Proof },
    /// Forwarding of the pair at `pos` to principal `q`, justified by the
    /// `read` and `write` permission proofs.
    Fwd {
        pos: usize,
        q: Term,
        read: Proof,
        write: Proof,
    },
    /// A doubled voice at `pos` was collapsed (premise keeps one copy).
    Dedup { pos: usize },
    /// The voice at `pos` was doubled (premise carries two copies).
    Dup { pos: usize },
}

/// The same, applied to the goal's voice.
enum REvent {
    Push(Term, Term),
    Var { pos: usize, l2: Term, side: Proof },
    Fwd {
        pos: usize,
        p: Term,
        read: Proof,
        write: Proof,
    },
    /// Conclusion carries a doubled voice at `pos`; the premise one copy.
    Dup { pos: usize },
    /// Conclusion carries one copy at `pos`; the premise a doubled voice.
    Dedup { pos: usize },
}

/// Wrap `base` in extension steps for every pair of `suffix`, all stated over
/// `delta`.
fn lift_ext(delta: &Context, base: SFDerivation, suffix: &[(Term, Term)]) -> SFDerivation {
    let mut d = base;
    for (pt, lt) in suffix {
        let g1 = d.judgment.g1.push(pt.clone(), lt.clone());
        let g2 = d.judgment.g2.push(pt.clone(), lt.clone());
        d = SFDerivation {
            judgment: SFJudgment::new(delta.clone(), g1, g2),
            rule: SFRule::ExtSF(Box::new(d)),
        };
    }
    d
}

/// Rebuild a context-indexed rule at the replay index `ji`.
fn respec(spec: &RuleSpec, ji: usize) -> RuleSpec {
    use RuleSpec::*;
    match spec {
        Contraction { .. } => Contraction { i: ji },
        AndL { .. } => AndL { i: ji },
        OrL { .. } => OrL { i: ji },
        ImpL { .. } => ImpL { i: ji },
        ForallL { t, .. } => ForallL {
            i: ji,
            t: t.clone(),
        },
        ExistsL { eigen, .. } => ExistsL {
            i: ji,
            eigen: eigen.clone(),
        },
        SaysL { .. } => SaysL { i: ji },
        other => other.clone(),
    }
}

fn internal(msg: &str) -> AuditError {
    AuditError::Internal(msg.into())
}

/// Reconstruct an influence witness from the clean use path `path` ending in
/// `Ax{use_idx}`.
fn build_influence(
    sig: &Signature,
    proof: &Proof,
    marked: usize,
    path: &[usize],
    use_idx: usize,
) -> Result<NIWitness, AuditError> {
    let root = &proof.conclusion;
    let trace = trace_indices(proof, path, marked, use_idx)
        .ok_or_else(|| internal("the use path has no consistent lineage trace"))?;

    // Walk the path once: collect voice events on both sides and replay the
    // formula rules to obtain the final supercontext sequent. `imap` maps
    // context positions of the walked node to positions of the replayed
    // sequent `js`, which skips weakenings, exchanges, and principal rules.
    let mut js = root.clone();
    let mut imap: Vec<usize> = (0..js.context.len()).collect();
    let mut chain: Vec<(Sequent, RuleSpec, usize)> = Vec::new();
    let mut levents: Vec<LEvent> = Vec::new();
    let mut revents: Vec<REvent> = Vec::new();
    let mut node = proof;
    for (depth, &k) in path.iter().enumerate() {
        let c = trace[depth];
        let concl = &node.conclusion;
        use RuleSpec::*;
        match &node.spec {
            SaysL { i } if *i == c => {
                let Formula::Says(sp, sl, _) = &concl.context[c].formula else {
                    return Err(internal("says unfolding of a non-says belief"));
                };
                levents.push(LEvent::Push(sp.clone(), sl.clone()));
            }
            VarL { i, pos, l2 } if *i == c && k == 0 => levents.push(LEvent::Var {
                pos: *pos,
                l2: l2.clone(),
                side: node.children[1].clone(),
            }),
            FwdL { i, pos, q } if *i == c && k == 0 => levents.push(LEvent::Fwd {
                pos: *pos,
                q: q.clone(),
                read: node.children[1].clone(),
                write: node.children[2].clone(),
            }),
            SelfLIntro { i, pos } if *i == c => levents.push(LEvent::Dedup { pos: *pos }),
            SelfLElim { i, pos } if *i == c => levents.push(LEvent::Dup { pos: *pos }),
            SaysR => {
                let Formula::Says(sp, sl, _) = &concl.goal.formula else {
                    return Err(internal("says introduction on a non-says goal"));
                };
                revents.push(REvent::Push(sp.clone(), sl.clone()));
            }
            VarR { pos, l2 } if k == 0 => revents.push(REvent::Var {
                pos: *pos,
                l2: l2.clone(),
                side: node.children[1].clone(),
            }),
            FwdR { pos, p } if k == 0 => revents.push(REvent::Fwd {
                pos: *pos,
                p: p.clone(),
                read: node.children[1].clone(),
                write: node.children[2].clone(),
            }),
            SelfRIntro { pos } => revents.push(REvent::Dup { pos: *pos }),
            SelfRElim { pos } => revents.push(REvent::Dedup { pos: *pos }),
            _ => {}
        }

        enum Plan {
            ReplayLeft(usize),
            ReplayRight,
            Skip,
            SkipExchange(usize),
            SkipWeakening(usize),
        }
        let plan = match &node.spec {
            Contraction { i } | AndL { i } | OrL { i } | ImpL { i } | ForallL { i, .. }
            | ExistsL { i, .. } | SaysL { i } => Plan::ReplayLeft(*i),
            Weakening { i } => Plan::SkipWeakening(*i),
            Exchange { i } => Plan::SkipExchange(*i),
            ImpR | AndR | OrR1 | OrR2 | ForallR { .. } | ExistsR { .. } | SaysR => {
                Plan::ReplayRight
            }
            SelfLIntro { .. } | SelfLElim { .. } | VarL { .. } | FwdL { .. }
            | SelfRIntro { .. } | SelfRElim { .. } | VarR { .. } | FwdR { .. }
            | FlowsToTrans { .. } | CRVar { .. } | CWVar { .. } => Plan::Skip,
            Ax { .. } | TrueR | FalseL { .. } | FlowsToRefl | Unknown { .. }
            | Malformed { .. } => {
                return Err(internal("the use path passes through a leaf rule"));
            }
        };
        match plan {
            Plan::ReplayLeft(i) => {
                if matches!(node.spec, ImpL { .. }) && k == 0 {
                    return Err(internal("a clean use path entered an implication test"));
                }
                let ji = *imap
                    .get(i)
                    .ok_or_else(|| internal("lineage index outside the replay map"))?;
                if js.context[ji].formula != concl.context[i].formula {
                    return Err(internal("replay lost formula synchronisation on the left"));
                }
                let spec = respec(&node.spec, ji);
                let prems = premises(sig, &js, &spec).map_err(|e| {
                    AuditError::Unsupported(format!(
                        "replaying {} over the supercontext failed: {e}",
                        spec.name()
                    ))
                })?;
                let branch = match &node.spec {
                    OrL { .. } | ImpL { .. } => k,
                    _ => 0,
                };
                let next = prems
                    .get(branch)
                    .cloned()
                    .ok_or_else(|| internal("replayed rule lacks the walked premise"))?;
                if matches!(node.spec, Contraction { .. } | AndL { .. }) {
                    let mut m2 = Vec::with_capacity(imap.len() + 1);
                    for (x, &v) in imap.iter().enumerate() {
                        m2.push(if v > ji { v + 1 } else { v });
                        if x == i {
                            m2.push(ji + 1);
                        }
                    }
                    imap = m2;
                }
                chain.push((js.clone(), spec, branch));
                js = next;
            }
            Plan::ReplayRight => {
                if js.goal.formula != concl.goal.formula {
                    return Err(internal("replay lost formula synchronisation on the right"));
                }
                let spec = node.spec.clone();
                let prems = premises(sig, &js, &spec).map_err(|e| {
                    AuditError::Unsupported(format!(
                        "replaying {} over the supercontext failed: {e}",
                        spec.name()
                    ))
                })?;
                let branch = if matches!(spec, AndR) { k } else { 0 };
                let next = prems
                    .get(branch)
                    .cloned()
                    .ok_or_else(|| internal("replayed rule lacks the walked premise"))?;
                if matches!(spec, ImpR) {
                    imap.push(js.context.len());
                }
                chain.push((js.clone(), spec, branch));
                js = next;
            }
            Plan::Skip => {}
            Plan::SkipExchange(i) => {
                if i + 1 >= imap.len() {
                    return Err(internal("exchange outside the replay map"));
                }
                imap.swap(i, i + 1);
            }
            Plan::SkipWeakening(i) => {
                if i >= imap.len() {
                    return Err(internal("weakening outside the replay map"));
                }
                imap.remove(i);
            }
        }
        node = &node.children[k];
    }

    let leaf = node;
    if !matches!(&leaf.spec, RuleSpec::Ax { i } if *i == use_idx) {
        return Err(internal("the use path does not end at the expected axiom"));
    }
    let leaf_gp = leaf.conclusion.goal.gp.clone();

    // The compatible supercontext: the replayed end context unioned with the
    // root context. The chain comes first so that its branch-specific
    // beliefs keep their positions and the root's surplus is appended.
    let refl_root = CSCDerivation {
        judgment: CSCJudgment::new(root.context.clone(), root.clone()),
        rule: CSCRule::CSCRefl,
    };
    let csc = if chain.is_empty() {
        refl_root
    } else {
        let chain_delta = js.context.clone();
        let mut d = CSCDerivation {
            judgment: CSCJudgment::new(chain_delta.clone(), js.clone()),
            rule: CSCRule::CSCRefl,
        };
        for (concl, spec, branch) in chain.into_iter().rev() {
            let rule = step_from_kernel(&spec, branch, Vec::new(), Box::new(d)).ok_or_else(
                || internal("a replayed rule has no supercontext constructor"),
            )?;
            d = CSCDerivation {
                judgment: CSCJudgment::new(chain_delta.clone(), concl),
                rule,
            };
        }
        csc_union(&d, &refl_root)
            .ok_or_else(|| internal("joining the supercontext with the root failed"))?
    };
    let delta = csc.judgment.delta.clone();

    let retarget = |p: &Proof, what: &str| -> Result<Proof, AuditError> {
        retarget_context(sig, p, &delta).ok_or_else(|| {
            AuditError::Unsupported(format!(
                "a {what} side proof does not transport to the supercontext"
            ))
        })
    };

    // Voices before and after the says pushes recorded on each side.
    let g1 = root.context[marked].gp.clone();
    let g2 = root.goal.gp.clone();
    let mut g1_prime = g1.clone();
    for ev in &levents {
        if let LEvent::Push(pt, lt) = ev {
            g1_prime = g1_prime.push(pt.clone(), lt.clone());
        }
    }
    let mut g2_prime = g2.clone();
    for ev in &revents {
        if let REvent::Push(pt, lt) = ev {
            g2_prime = g2_prime.push(pt.clone(), lt.clone());
        }
    }

    // Left chain: transform g1_prime step by step into the voice the axiom
    // consumed, emitting one speaks-for piece per manipulation.
    let mut pieces: Vec<SFDerivation> = Vec::new();
    let mut cur = g1_prime.clone();
    for ev in &levents {
        let before = cur.clone();
        let piece = match ev {
            LEvent::Push(..) => continue,
            LEvent::Var { pos, l2, side } => {
                let (pt, lt) = cur
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("relabelling position outside the voice"))?;
                let prefix = cur.prefix(*pos);
                let g1b = prefix.push(pt.clone(), lt.clone());
                let g2b = prefix.push(pt.clone(), l2.clone());
                let side = retarget(side, "relabelling")?;
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::VarSF(side),
                };
                let piece = lift_ext(&delta, base, &cur.stack[*pos + 1..]);
                cur.stack[*pos].1 = l2.clone();
                piece
            }
            LEvent::Fwd { pos, q, read, write } => {
                let (pt, lt) = cur
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("forwarding position outside the voice"))?;
                let prefix = cur.prefix(*pos);
                let g1b = prefix.push(pt.clone(), lt.clone());
                let g2b = prefix.push(q.clone(), lt.clone());
                let read = retarget(read, "read permission")?;
                let write = retarget(write, "write permission")?;
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::FwdSF(read, write),
                };
                let piece = lift_ext(&delta, base, &cur.stack[*pos + 1..]);
                cur.stack[*pos].0 = q.clone();
                piece
            }
            LEvent::Dedup { pos } => {
                let pair = cur
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("voice collapse outside the voice"))?;
                if cur.stack.get(*pos + 1) != Some(&pair) {
                    return Err(internal("voice collapse without a doubled voice"));
                }
                let g2b = cur.prefix(*pos).push(pair.0.clone(), pair.1.clone());
                let g1b = g2b.push(pair.0.clone(), pair.1.clone());
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::SelfRSF,
                };
                let piece = lift_ext(&delta, base, &cur.stack[*pos + 2..]);
                cur.stack.remove(*pos + 1);
                piece
            }
            LEvent::Dup { pos } => {
                let pair = cur
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("voice duplication outside the voice"))?;
                let g1b = cur.prefix(*pos).push(pair.0.clone(), pair.1.clone());
                let g2b = g1b.push(pair.0.clone(), pair.1.clone());
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::SelfLSF,
                };
                let piece = lift_ext(&delta, base, &cur.stack[*pos + 1..]);
                cur.stack.insert(*pos + 1, pair);
                piece
            }
        };
        if piece.judgment.g1 != before || piece.judgment.g2 != cur {
            return Err(internal("a left speaks-for piece does not span its step"));
        }
        pieces.push(piece);
    }
    let h_left = cur;

    // Right chain: the same walked forward from g2_prime; each piece speaks
    // from the premise voice to the conclusion voice, so the sequence is
    // reversed before composition.
    let mut rpieces: Vec<SFDerivation> = Vec::new();
    let mut curr = g2_prime.clone();
    for ev in &revents {
        let before = curr.clone();
        let piece = match ev {
            REvent::Push(..) => continue,
            REvent::Var { pos, l2, side } => {
                let (pt, lt) = curr
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("relabelling position outside the goal voice"))?;
                let prefix = curr.prefix(*pos);
                let g1b = prefix.push(pt.clone(), l2.clone());
                let g2b = prefix.push(pt.clone(), lt.clone());
                let side = retarget(side, "relabelling")?;
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::VarSF(side),
                };
                let piece = lift_ext(&delta, base, &curr.stack[*pos + 1..]);
                curr.stack[*pos].1 = l2.clone();
                piece
            }
            REvent::Fwd { pos, p, read, write } => {
                let (qt, lt) = curr
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("forwarding position outside the goal voice"))?;
                let prefix = curr.prefix(*pos);
                let g1b = prefix.push(p.clone(), lt.clone());
                let g2b = prefix.push(qt.clone(), lt.clone());
                let read = retarget(read, "read permission")?;
                let write = retarget(write, "write permission")?;
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::FwdSF(read, write),
                };
                let piece = lift_ext(&delta, base, &curr.stack[*pos + 1..]);
                curr.stack[*pos].0 = p.clone();
                piece
            }
            REvent::Dup { pos } => {
                let pair = curr
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("voice duplication outside the goal voice"))?;
                if curr.stack.get(*pos + 1) != Some(&pair) {
                    return Err(internal("goal voice duplication without a doubled voice"));
                }
                let g1b = curr.prefix(*pos).push(pair.0.clone(), pair.1.clone());
                let g2b = g1b.push(pair.0.clone(), pair.1.clone());
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::SelfLSF,
                };
                let piece = lift_ext(&delta, base, &curr.stack[*pos + 2..]);
                curr.stack.remove(*pos + 1);
                piece
            }
            REvent::Dedup { pos } => {
                let pair = curr
                    .stack
                    .get(*pos)
                    .cloned()
                    .ok_or_else(|| internal("voice collapse outside the goal voice"))?;
                let g2b = curr.prefix(*pos).push(pair.0.clone(), pair.1.clone());
                let g1b = g2b.push(pair.0.clone(), pair.1.clone());
                let base = SFDerivation {
                    judgment: SFJudgment::new(delta.clone(), g1b, g2b),
                    rule: SFRule::SelfRSF,
                };
                let piece = lift_ext(&delta, base, &curr.stack[*pos + 1..]);
                curr.stack.insert(*pos + 1, pair);
                piece
            }
        };
        if piece.judgment.g2 != before || piece.judgment.g1 != curr {
            return Err(internal("a right speaks-for piece does not span its step"));
        }
        rpieces.push(piece);
    }
    let h_right = curr;

    if h_left != leaf_gp || h_right != leaf_gp {
        return Err(internal("the voice chains do not meet at the consuming axiom"));
    }

    // If the axiom consumed a compound belief whose principal patterns
    // descend deeper (e.g. an unfolded says), extend both voices along the
    // leaf's own pattern so that the stated principals are members of their
    // pattern sets. The leaf goal and belief agree, so one extension serves
    // both sides.
    let gs_leaf = g_set(&leaf.conclusion.goal.formula, &leaf_gp);
    let ext: Vec<(Term, Term)> = match gs_leaf.patterns.first() {
        Some(pat)
            if pat.gp.ground == leaf_gp.ground
                && pat.gp.stack.len() >= leaf_gp.stack.len()
                && pat.gp.stack[..leaf_gp.stack.len()] == leaf_gp.stack[..] =>
        {
            pat.gp.stack[leaf_gp.stack.len()..].to_vec()
        }
        Some(_) => return Err(internal("the leaf pattern does not extend the leaf voice")),
        None => Vec::new(),
    };
    let extend = |g: &GenPrincipal| -> GenPrincipal {
        let mut out = g.clone();
        for (pt, lt) in &ext {
            out = out.push(pt.clone(), lt.clone());
        }
        out
    };
    let g1p = extend(&g1_prime);
    let g2p = extend(&g2_prime);
    let h_final = extend(&leaf_gp);
    let all_pieces: Vec<SFDerivation> = pieces
        .into_iter()
        .chain(rpieces.into_iter().rev())
        .map(|pc| lift_ext(&delta, pc, &ext))
        .collect();

    // Compose the pieces into one CanInfl derivation over delta.
    let ci = if all_pieces.is_empty() {
        if g1p != h_final || g2p != h_final {
            return Err(internal("an empty voice chain with distinct endpoints"));
        }
        CIDerivation::from_sf(SFDerivation::refl(delta.clone(), h_final))
    } else {
        let mut it = all_pieces.into_iter();
        let mut acc = CIDerivation::from_sf(it.next().expect("nonempty"));
        for piece in it {
            let next = CIDerivation::from_sf(piece);
            if acc.judgment.g2 != next.judgment.g1 {
                return Err(internal("adjacent influence pieces do not meet"));
            }
            let judgment =
                CIJudgment::new(delta.clone(), acc.judgment.g1.clone(), next.judgment.g2.clone());
            acc = CIDerivation {
                judgment,
                rule: CIRule::TransCI(Box::new(acc), Box::new(next)),
            };
        }
        if acc.judgment.g1 != g1p || acc.judgment.g2 != g2p {
            return Err(internal("the influence chain misses its endpoints"));
        }
        acc
    };

    let (_, g1_binding) = g_set(&root.context[marked].formula, &g1)
        .member(sig, &g1p)
        .ok_or_else(|| internal("the influencing voice escapes the marked belief's patterns"))?;
    let (_, g2_binding) = g_set(&root.goal.formula, &g2)
        .member(sig, &g2p)
        .ok_or_else(|| internal("the influenced voice escapes the goal's patterns"))?;

    let witness = NIWitness::Influence {
        delta,
        csc,
        g1_prime: g1p,
        g1_binding,
        g1_ext: Vec::new(),
        g2_prime: g2p,
        g2_binding,
        ci,
    };
    verify_witness(sig, proof, marked, &witness).map_err(AuditError::Internal)?;
    Ok(witness)
}

/// Weaken the removed beliefs back into `base`, restoring the removal stack
/// in reverse. With `skip_marked_slot` the positions are adjusted for a
/// context that no longer carries the marked belief.
fn restore_weakened(base: &Proof, removed: &[(usize, Belief, usize)], skip_marked_slot: bool) -> Proof {
    let mut out = base.clone();
    for (j, b, m) in removed.iter().rev() {
        let at = if skip_marked_slot && *m < *j { *j - 1 } else { *j };
        out = weaken_insert(&out, at, b.clone());
    }
    out
}

fn finish_pruned(
    sig: &Signature,
    proof: &Proof,
    marked: usize,
    out: Proof,
) -> Result<NIWitness, AuditError> {
    let mut ctx = proof.conclusion.context.clone();
    ctx.remove(marked);
    let expect = Sequent::new(ctx, proof.conclusion.goal.clone());
    if out.conclusion != expect || !check_proof(sig, &out).is_valid() {
        return Err(AuditError::Internal(
            "restoring the pruned proof after discharging failed".into(),
        ));
    }
    Ok(NIWitness::Pruned(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{FuncDecl, RelDecl, Sort};

    fn sig() -> Signature {
        let mut s = Signature::new();
        for c in ["Pub", "Sec"] {
            s.add_func(FuncDecl { name: c.into(), args: vec![], result: Sort::label() })
                .unwrap();
        }
        for c in ["Alice", "Bob", "Cathy"] {
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

    fn ax(s: Sequent, i: usize) -> Proof {
        Proof::leaf(s, RuleSpec::Ax { i })
    }

    fn sf_name(ci: &CIDerivation) -> &'static str {
        match &ci.rule {
            CIRule::SfCi(sf) => sf.rule.name(),
            _ => "not-an-sf-step",
        }
    }

    #[test]
    fn pruning_wins_when_the_belief_is_unused() {
        let s = sig();
        let ctx = vec![
            Belief::new(r("Bob"), gpub()),
            Belief::new(r("Alice"), gpub()),
        ];
        let p = ax(Sequent::new(ctx, Belief::new(r("Alice"), gpub())), 1);
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Pruned(q) = &w else { panic!("expected a pruned witness") };
        assert_eq!(q.conclusion.context, vec![Belief::new(r("Alice"), gpub())]);
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn says_unfolding_yields_a_reflexive_influence() {
        let s = sig();
        let inner = Belief::new(r("Alice"), gpub().push(c("Bob"), c("Pub")));
        let says = Belief::new(Formula::says(c("Bob"), c("Pub"), r("Alice")), gpub());
        let ctx = vec![says];
        let leaf = ax(Sequent::new(vec![inner.clone()], inner.clone()), 0);
        let p = Proof::new(
            Sequent::new(ctx, inner.clone()),
            RuleSpec::SaysL { i: 0 },
            vec![leaf],
        );
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { g1_prime, g2_prime, ci, delta, .. } = &w else {
            panic!("expected an influence witness");
        };
        let voice = gpub().push(c("Bob"), c("Pub"));
        assert_eq!(*g1_prime, voice);
        assert_eq!(*g2_prime, voice);
        assert_eq!(sf_name(ci), "ReflSF");
        // The supercontext is the root context plus the unfolded belief.
        assert!(delta.contains(&inner));
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn axiom_on_a_says_belief_extends_both_patterns() {
        let s = sig();
        let says = Belief::new(Formula::says(c("Bob"), c("Pub"), r("Alice")), gpub());
        let p = ax(Sequent::new(vec![says.clone()], says.clone()), 0);
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { g1_prime, g2_prime, ci, .. } = &w else {
            panic!("expected an influence witness");
        };
        let voice = gpub().push(c("Bob"), c("Pub"));
        assert_eq!(*g1_prime, voice);
        assert_eq!(*g2_prime, voice);
        assert_eq!(sf_name(ci), "ReflSF");
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn forwarding_composes_speaks_for_pieces() {
        let s = sig();
        // Reading a belief held in Alice's record through a forwarding of
        // the inner voice to Bob, then collapsing Bob's doubled voice.
        let g_bb = gpub().push(c("Bob"), c("Pub")).push(c("Bob"), c("Pub"));
        let g_bi = gpub().push(c("Bob"), c("Pub")).push(c("Cathy"), c("Pub"));
        let g_b = gpub().push(c("Bob"), c("Pub"));
        let b0 = Belief::new(r("Alice"), g_bi.clone());
        let b1 = Belief::new(Formula::canread(c("Bob"), c("Pub")), g_bi.clone());
        let b2 = Belief::new(Formula::canwrite(c("Cathy"), c("Pub")), g_bb.clone());
        let ctx = vec![b0.clone(), b1.clone(), b2.clone()];
        let goal = Belief::new(r("Alice"), g_b.clone());
        // FwdL moves the voice at position 1 from Cathy to Bob; SelfLIntro
        // then collapses the doubled (Bob,Pub) pair; Ax closes.
        let after_fwd = Belief::new(r("Alice"), g_bb.clone());
        let after_self = Belief::new(r("Alice"), g_b.clone());
        let inner_ctx = vec![after_fwd.clone(), b1.clone(), b2.clone()];
        let collapsed_ctx = vec![after_self.clone(), b1.clone(), b2.clone()];
        let leaf = ax(Sequent::new(collapsed_ctx, goal.clone()), 0);
        let selfl = Proof::new(
            Sequent::new(inner_ctx.clone(), goal.clone()),
            RuleSpec::SelfLIntro { i: 0, pos: 0 },
            vec![leaf],
        );
        let read = ax(
            Sequent::new(ctx.clone(), Belief::new(Formula::canread(c("Bob"), c("Pub")), g_bi.clone())),
            1,
        );
        let write = ax(
            Sequent::new(ctx.clone(), Belief::new(Formula::canwrite(c("Cathy"), c("Pub")), g_bb.clone())),
            2,
        );
        let p = Proof::new(
            Sequent::new(ctx, goal.clone()),
            RuleSpec::FwdL { i: 0, pos: 1, q: c("Bob") },
            vec![selfl, read, write],
        );
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { g1_prime, g2_prime, ci, delta, .. } = &w else {
            panic!("expected an influence witness");
        };
        assert_eq!(*g1_prime, g_bi);
        assert_eq!(*g2_prime, g_b);
        assert_eq!(*delta, p.conclusion.context);
        let CIRule::TransCI(lhs, rhs) = &ci.rule else { panic!("expected a composition") };
        assert_eq!(sf_name(lhs), "FwdSF");
        assert_eq!(sf_name(rhs), "SelfRSF");
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn or_branches_enter_the_supercontext() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let b1 = Belief::new(Formula::or(r("Bob"), r("Cathy")), gpub());
        let ctx = vec![b0.clone(), b1.clone()];
        let goal = b0.clone();
        let left_ctx = vec![b0.clone(), Belief::new(r("Bob"), gpub())];
        let right_ctx = vec![b0.clone(), Belief::new(r("Cathy"), gpub())];
        let p = Proof::new(
            Sequent::new(ctx.clone(), goal.clone()),
            RuleSpec::OrL { i: 1 },
            vec![
                ax(Sequent::new(left_ctx, goal.clone()), 0),
                ax(Sequent::new(right_ctx, goal.clone()), 0),
            ],
        );
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { delta, csc, ci, .. } = &w else {
            panic!("expected an influence witness");
        };
        // Delta is the root context extended with the first disjunct.
        let mut want = vec![b0.clone(), Belief::new(r("Bob"), gpub()), b1.clone()];
        want.sort_by_key(|b| format!("{b}"));
        let mut got = delta.clone();
        got.sort_by_key(|b| format!("{b}"));
        assert_eq!(got, want);
        let report = check_csc(&s, csc);
        assert!(report.is_valid());
        assert!(report.stats.rules.contains_key("CSCOrL1"));
        assert_eq!(sf_name(ci), "ReflSF");
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn disjunction_free_audits_avoid_branch_rules() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let b1 = Belief::new(r("Bob"), gpub());
        let and_goal = Belief::new(Formula::and(r("Alice"), r("Bob")), gpub());
        let ctx = vec![b0.clone(), b1.clone()];
        let p = Proof::new(
            Sequent::new(ctx.clone(), and_goal),
            RuleSpec::AndR,
            vec![
                ax(Sequent::new(ctx.clone(), b0.clone()), 0),
                ax(Sequent::new(ctx.clone(), b1.clone()), 1),
            ],
        );
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { csc, .. } = &w else { panic!("expected influence") };
        let report = check_csc(&s, csc);
        assert!(report.is_valid());
        assert!(!report.stats.rules.contains_key("CSCOrL1"));
        assert!(!report.stats.rules.contains_key("CSCOrL2"));
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn relabelling_on_the_goal_becomes_a_variance_piece() {
        let s = sig();
        let g_low = gpub().push(c("Bob"), c("Pub"));
        let g_high = gpub().push(c("Bob"), c("Sec"));
        let b0 = Belief::new(r("Alice"), g_low.clone());
        let b1 = Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high.clone());
        let ctx = vec![b0.clone(), b1.clone()];
        let goal = Belief::new(r("Alice"), g_high.clone());
        let main = ax(Sequent::new(ctx.clone(), Belief::new(r("Alice"), g_low.clone())), 0);
        let side = ax(Sequent::new(ctx.clone(), b1.clone()), 1);
        let p = Proof::new(
            Sequent::new(ctx, goal),
            RuleSpec::VarR { pos: 0, l2: c("Pub") },
            vec![main, side],
        );
        assert!(check_proof(&s, &p).is_valid());

        // Marking the relabelled belief yields a variance influence piece.
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { g1_prime, g2_prime, ci, .. } = &w else {
            panic!("expected influence");
        };
        assert_eq!(*g1_prime, g_low);
        assert_eq!(*g2_prime, g_high);
        assert_eq!(sf_name(ci), "VarSF");
        verify_witness(&s, &p, 0, &w).unwrap();

        // Marking the flows assumption, which is only consumed by the side
        // condition, is out of scope for witness reconstruction.
        assert!(matches!(audit(&s, &p, 1), Err(AuditError::Unsupported(_))));
    }

    #[test]
    fn weakening_on_the_path_is_tolerated() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let b1 = Belief::new(r("Bob"), gpub());
        let inner = ax(Sequent::new(vec![b0.clone()], b0.clone()), 0);
        let p = Proof::new(
            Sequent::new(vec![b0.clone(), b1.clone()], b0.clone()),
            RuleSpec::Weakening { i: 1 },
            vec![inner],
        );
        assert!(check_proof(&s, &p).is_valid());
        let w = audit(&s, &p, 0).unwrap();
        let NIWitness::Influence { delta, ci, .. } = &w else { panic!("expected influence") };
        assert_eq!(*delta, p.conclusion.context);
        assert_eq!(sf_name(ci), "ReflSF");
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn implication_mediation_is_rejected_then_discharged() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let imp = Belief::new(Formula::implies(r("Alice"), c("Pub"), r("Alice")), gpub());
        let ctx = vec![b0.clone(), imp.clone()];
        let goal = b0.clone();
        let test = ax(Sequent::new(vec![b0.clone()], b0.clone()), 0);
        let main = ax(Sequent::new(vec![b0.clone(), b0.clone()], goal.clone()), 1);
        let p = Proof::new(
            Sequent::new(ctx.clone(), goal.clone()),
            RuleSpec::ImpL { i: 1 },
            vec![test, main],
        );
        assert!(check_proof(&s, &p).is_valid());

        // Plain audit refuses to explain implication-mediated influence.
        assert!(matches!(audit(&s, &p, 0), Err(AuditError::Unsupported(_))));
        // Without a discharge the restricted audit names the obligation.
        assert!(matches!(
            audit_sf_only(&s, &p, 0, &[]),
            Err(AuditError::ImplicationNotDischarged(_))
        ));

        // The implication is provable from the rest of the context.
        let hyp = Belief::new(r("Alice"), gpub());
        let discharge = Proof::new(
            Sequent::new(vec![b0.clone()], imp.clone()),
            RuleSpec::ImpR,
            vec![ax(Sequent::new(vec![b0.clone(), hyp.clone()], b0.clone()), 0)],
        );
        assert!(check_proof(&s, &discharge).is_valid());
        let w = audit_sf_only(&s, &p, 0, &[discharge]).unwrap();
        let NIWitness::Influence { ci, .. } = &w else { panic!("expected influence") };
        assert!(!ci.rule_histogram().contains_key("ImpCI"));
        verify_witness(&s, &p, 0, &w).unwrap();
    }

    #[test]
    fn marked_implication_audits_through_its_consequent() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let imp = Belief::new(Formula::implies(r("Alice"), c("Pub"), r("Alice")), gpub());
        let ctx = vec![b0.clone(), imp.clone()];
        let goal = b0.clone();
        let test = ax(Sequent::new(vec![b0.clone()], b0.clone()), 0);
        let main = ax(Sequent::new(vec![b0.clone(), b0.clone()], goal.clone()), 1);
        let p = Proof::new(
            Sequent::new(ctx.clone(), goal.clone()),
            RuleSpec::ImpL { i: 1 },
            vec![test, main],
        );
        assert!(check_proof(&s, &p).is_valid());
        // The implication's own lineage runs through the main premise as its
        // consequent, which the axiom consumes directly: direct influence,
        // and the consequent's principal pattern covers the voice.
        let w = audit(&s, &p, 1).unwrap();
        let NIWitness::Influence { ci, .. } = &w else { panic!("expected influence") };
        assert_eq!(sf_name(ci), "ReflSF");
        verify_witness(&s, &p, 1, &w).unwrap();
    }

    #[test]
    fn nested_implication_discharges_to_sf_only() {
        let s = sig();
        // imp1 : Alice's record implies itself; imp2 : imp1 implies the goal.
        // The only use of imp1 sits inside the test premise of ImpL on imp2,
        // so auditing imp1 must either discharge imp2 or fail.
        let b0 = Belief::new(r("Alice"), gpub());
        let f_imp1 = Formula::implies(r("Alice"), c("Pub"), r("Alice"));
        let imp1 = Belief::new(f_imp1.clone(), gpub());
        let f_imp2 = Formula::implies(f_imp1.clone(), c("Pub"), r("Alice"));
        let imp2 = Belief::new(f_imp2.clone(), gpub());
        let ctx = vec![b0.clone(), imp1.clone(), imp2.clone()];
        let goal = b0.clone();
        let test = ax(
            Sequent::new(vec![b0.clone(), imp1.clone()], imp1.clone()),
            1,
        );
        let main = ax(
            Sequent::new(vec![b0.clone(), imp1.clone(), b0.clone()], goal.clone()),
            2,
        );
        let p = Proof::new(
            Sequent::new(ctx.clone(), goal.clone()),
            RuleSpec::ImpL { i: 2 },
            vec![test, main],
        );
        assert!(check_proof(&s, &p).is_valid());

        assert!(matches!(audit(&s, &p, 1), Err(AuditError::Unsupported(_))));
        assert!(matches!(
            audit_sf_only(&s, &p, 1, &[]),
            Err(AuditError::ImplicationNotDischarged(_))
        ));

        // Discharge imp2 from the remaining context: assume imp1, apply it.
        let hyp = Belief::new(f_imp1.clone(), gpub());
        let inner_ctx = vec![b0.clone(), imp1.clone(), hyp.clone()];
        let inner = Proof::new(
            Sequent::new(inner_ctx.clone(), b0.clone()),
            RuleSpec::ImpL { i: 2 },
            vec![
                ax(Sequent::new(vec![b0.clone(), imp1.clone()], b0.clone()), 0),
                ax(
                    Sequent::new(vec![b0.clone(), imp1.clone(), b0.clone()], b0.clone()),
                    2,
                ),
            ],
        );
        let discharge = Proof::new(
            Sequent::new(vec![b0.clone(), imp1.clone()], imp2.clone()),
            RuleSpec::ImpR,
            vec![inner],
        );
        assert!(check_proof(&s, &discharge).is_valid());

        let w = audit_sf_only(&s, &p, 1, &[discharge]).unwrap();
        verify_witness(&s, &p, 1, &w).unwrap();
        if let NIWitness::Influence { ci, .. } = &w {
            assert!(!ci.rule_histogram().contains_key("ImpCI"));
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let s = sig();
        let b0 = Belief::new(r("Alice"), gpub());
        let p = ax(Sequent::new(vec![b0.clone()], b0.clone()), 0);
        assert!(matches!(audit(&s, &p, 3), Err(AuditError::InputInvalid(_))));
        let bogus = ax(Sequent::new(vec![b0.clone()], Belief::new(r("Bob"), gpub())), 0);
        assert!(matches!(audit(&s, &bogus, 0), Err(AuditError::InputInvalid(_))));
    }
}
