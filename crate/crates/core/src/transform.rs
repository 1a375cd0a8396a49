//! Proof-to-proof transformations.
//!
//! Every operation in this module consumes checked proof trees and produces a
//! new tree that is re-checked against the kernel before it is returned:
//!
//! - [`simulate`] replays a proof under a simulated principal, rewriting every
//!   belief and every rule application;
//! - [`normalize`] permutes connective rules toward the root so that the
//!   result satisfies the first normal form ([`classify_normal_form`]);
//! - [`eliminate_cut`] composes a proof of a belief with a proof that assumes
//!   it, removing the assumption;
//! - [`unsays_r`] peels a top-level `says` off a proven goal;
//! - [`sf_eliminate`] transports a proven belief along a speaks-for
//!   derivation;
//! - [`extract_disjunct`] reports which disjunct a normalized proof of a
//!   disjunction actually establishes.
//!
//! All transformations are fuel-bounded where termination is not structural;
//! running out of fuel is reported explicitly and never loops.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::{fresh_name, Formula};
use crate::kernel::{check_proof, premises, CheckReport, Proof, RuleSpec};
use crate::sequent::{Belief, Context, Sequent};
use crate::signature::{Signature, Sort};
use crate::term::{sort_check_expect, Term};
use crate::trust::{SFDerivation, SFRule};

/// Default fuel budget for cut elimination.
pub const DEFAULT_CUT_FUEL: usize = 1_000_000;

/// Errors raised by proof transformations.
#[derive(Debug, Error)]
pub enum TransformError {
    /// An input proof or derivation does not check.
    #[error("invalid input: {0}")]
    InputInvalid(String),
    /// The inputs do not fit together (contexts or indices disagree).
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    /// The fuel budget ran out before the transformation finished.
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(usize),
    /// The instance falls outside the supported fragment.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The transformation produced a proof that failed to re-check. This
    /// indicates a bug in the transformation, never in the input.
    #[error("internal error: {0}")]
    Internal(String),
}

fn invalid_report(report: &CheckReport, which: &str) -> TransformError {
    TransformError::InputInvalid(format!("{which} does not check: {:?}", report.verdict))
}

// ---------------------------------------------------------------------------
// Normal forms
// ---------------------------------------------------------------------------

/// Where a proof sits relative to the two normal forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalFormTag {
    /// Connective rules appear only in a region containing the root: every
    /// non-connective node has connective-free subtrees above it.
    FirstNF,
    /// No connective rules at all.
    SecondNF,
    /// Neither: the path addresses the first (pre-order) non-connective node
    /// with a connective rule somewhere above it.
    NotNormal(Vec<usize>),
}

/// Whether a rule manipulates a logical connective.
pub fn is_manip(spec: &RuleSpec) -> bool {
    matches!(
        spec,
        RuleSpec::AndL { .. }
            | RuleSpec::AndR
            | RuleSpec::OrL { .. }
            | RuleSpec::OrR1
            | RuleSpec::OrR2
            | RuleSpec::ImpL { .. }
            | RuleSpec::ImpR
            | RuleSpec::ForallL { .. }
            | RuleSpec::ForallR { .. }
            | RuleSpec::ExistsL { .. }
            | RuleSpec::ExistsR { .. }
            | RuleSpec::SaysL { .. }
            | RuleSpec::SaysR
    )
}

fn contains_manip(p: &Proof) -> bool {
    is_manip(&p.spec) || p.children.iter().any(contains_manip)
}

fn is_second_nf(p: &Proof) -> bool {
    !contains_manip(p)
}

/// Classify a proof against the two normal forms.
pub fn classify_normal_form(p: &Proof) -> NormalFormTag {
    if is_second_nf(p) {
        return NormalFormTag::SecondNF;
    }
    let mut path = Vec::new();
    if let Some(v) = first_violation(p, &mut path) {
        return NormalFormTag::NotNormal(v);
    }
    NormalFormTag::FirstNF
}

fn first_violation(p: &Proof, path: &mut Vec<usize>) -> Option<Vec<usize>> {
    if !is_manip(&p.spec) && p.children.iter().any(contains_manip) {
        return Some(path.clone());
    }
    for (k, ch) in p.children.iter().enumerate() {
        path.push(k);
        if let Some(v) = first_violation(ch, path) {
            path.pop();
            return Some(v);
        }
        path.pop();
    }
    None
}

// ---------------------------------------------------------------------------
// Substitution and renaming over whole proofs
// ---------------------------------------------------------------------------

fn subst_spec(spec: &RuleSpec, name: &str, t: &Term) -> RuleSpec {
    use RuleSpec::*;
    match spec {
        ForallL { i, t: w } => ForallL { i: *i, t: w.subst(name, t) },
        ExistsR { t: w } => ExistsR { t: w.subst(name, t) },
        VarL { i, pos, l2 } => VarL { i: *i, pos: *pos, l2: l2.subst(name, t) },
        VarR { pos, l2 } => VarR { pos: *pos, l2: l2.subst(name, t) },
        FwdL { i, pos, q } => FwdL { i: *i, pos: *pos, q: q.subst(name, t) },
        FwdR { pos, p } => FwdR { pos: *pos, p: p.subst(name, t) },
        FlowsToTrans { mid } => FlowsToTrans { mid: mid.subst(name, t) },
        CRVar { via } => CRVar { via: via.subst(name, t) },
        CWVar { via } => CWVar { via: via.subst(name, t) },
        other => other.clone(),
    }
}

fn subst_proof_raw(p: &Proof, name: &str, t: &Term) -> Proof {
    Proof::new(
        p.conclusion.subst(name, t),
        subst_spec(&p.spec, name, t),
        p.children.iter().map(|c| subst_proof_raw(c, name, t)).collect(),
    )
}

fn term_names(t: &Term, out: &mut BTreeSet<String>) {
    let mut fv = BTreeSet::new();
    t.free_vars(&mut fv);
    out.extend(fv.into_iter().map(|(n, _)| n));
}

/// Collect every variable name that occurs anywhere in the proof: free
/// variables of sequents, rule parameters, and eigenvariables.
fn proof_names(p: &Proof, out: &mut BTreeSet<String>) {
    let mut fv = BTreeSet::new();
    p.conclusion.free_vars(&mut fv);
    out.extend(fv.into_iter().map(|(n, _)| n));
    use RuleSpec::*;
    match &p.spec {
        ForallR { eigen } => {
            out.insert(eigen.clone());
        }
        ExistsL { eigen, .. } => {
            out.insert(eigen.clone());
        }
        ForallL { t, .. } | ExistsR { t } => term_names(t, out),
        VarL { l2: t, .. } | VarR { l2: t, .. } => term_names(t, out),
        FwdL { q: t, .. } | FwdR { p: t, .. } => term_names(t, out),
        FlowsToTrans { mid: t } | CRVar { via: t } | CWVar { via: t } => term_names(t, out),
        _ => {}
    }
    for c in &p.children {
        proof_names(c, out);
    }
}

fn eigen_sort_of(p: &Proof) -> Option<Sort> {
    match &p.spec {
        RuleSpec::ForallR { .. } => match &p.conclusion.goal.formula {
            Formula::Forall(b, _) => Some(b.sort.clone()),
            _ => None,
        },
        RuleSpec::ExistsL { i, .. } => match p.conclusion.context.get(*i).map(|b| &b.formula) {
            Some(Formula::Exists(b, _)) => Some(b.sort.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// Rename every eigenvariable whose name collides with `avoid`, bottom-up.
fn rename_eigens_avoiding(sig: &Signature, p: &Proof, avoid: &BTreeSet<String>) -> Proof {
    let children: Vec<Proof> =
        p.children.iter().map(|c| rename_eigens_avoiding(sig, c, avoid)).collect();
    let mut spec = p.spec.clone();
    let mut children = children;
    let eigen = match &spec {
        RuleSpec::ForallR { eigen } => Some(eigen.clone()),
        RuleSpec::ExistsL { eigen, .. } => Some(eigen.clone()),
        _ => None,
    };
    if let Some(e) = eigen {
        if avoid.contains(&e) {
            if let Some(sort) = eigen_sort_of(p) {
                let mut names = avoid.clone();
                {
                    let mut fv = BTreeSet::new();
                    p.conclusion.free_vars(&mut fv);
                    names.extend(fv.into_iter().map(|(n, _)| n));
                }
                for c in &children {
                    proof_names(c, &mut names);
                }
                for f in sig.funcs() {
                    names.insert(f.name.clone());
                }
                let fresh = fresh_name(&e, &names);
                let fresh_term = Term::var(&fresh, sort);
                children =
                    children.iter().map(|c| subst_proof_raw(c, &e, &fresh_term)).collect();
                match &mut spec {
                    RuleSpec::ForallR { eigen } => *eigen = fresh,
                    RuleSpec::ExistsL { eigen, .. } => *eigen = fresh,
                    _ => unreachable!(),
                }
            }
        }
    }
    Proof::new(p.conclusion.clone(), spec, children)
}

/// Substitute a term for a free variable throughout a proof, renaming
/// eigenvariables first so nothing is captured.
pub fn subst_proof_var(sig: &Signature, p: &Proof, name: &str, t: &Term) -> Proof {
    let mut avoid = BTreeSet::new();
    avoid.insert(name.to_string());
    term_names(t, &mut avoid);
    let renamed = rename_eigens_avoiding(sig, p, &avoid);
    subst_proof_raw(&renamed, name, t)
}

// ---------------------------------------------------------------------------
// Context surgery: weakening in, strengthening out, retargeting
// ---------------------------------------------------------------------------

/// Wrap a proof in a weakening that inserts `b` at context position `at`.
pub(crate) fn weaken_insert(p: &Proof, at: usize, b: Belief) -> Proof {
    let mut ctx = p.conclusion.context.clone();
    let at = at.min(ctx.len());
    ctx.insert(at, b);
    let concl = Sequent::new(ctx, p.conclusion.goal.clone());
    Proof::new(concl, RuleSpec::Weakening { i: at }, vec![p.clone()])
}

/// Re-address a rule after deleting conclusion context position `j`.
/// `None` when the rule acts on `j` itself (or cannot be re-addressed).
fn shift_spec_down(spec: &RuleSpec, j: usize) -> Option<RuleSpec> {
    use RuleSpec::*;
    let sh = |i: &usize| -> Option<usize> {
        match (*i).cmp(&j) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(*i - 1),
            std::cmp::Ordering::Less => Some(*i),
        }
    };
    Some(match spec {
        Ax { i } => Ax { i: sh(i)? },
        Weakening { i } => Weakening { i: sh(i)? },
        Contraction { i } => Contraction { i: sh(i)? },
        Exchange { i } => {
            if j == *i || j == *i + 1 {
                return None;
            }
            Exchange { i: if *i > j { *i - 1 } else { *i } }
        }
        FalseL { i } => FalseL { i: sh(i)? },
        AndL { i } => AndL { i: sh(i)? },
        OrL { i } => OrL { i: sh(i)? },
        ImpL { i } => ImpL { i: sh(i)? },
        ForallL { i, t } => ForallL { i: sh(i)?, t: t.clone() },
        ExistsL { i, eigen } => ExistsL { i: sh(i)?, eigen: eigen.clone() },
        SaysL { i } => SaysL { i: sh(i)? },
        SelfLIntro { i, pos } => SelfLIntro { i: sh(i)?, pos: *pos },
        SelfLElim { i, pos } => SelfLElim { i: sh(i)?, pos: *pos },
        VarL { i, pos, l2 } => VarL { i: sh(i)?, pos: *pos, l2: l2.clone() },
        FwdL { i, pos, q } => FwdL { i: sh(i)?, pos: *pos, q: q.clone() },
        Unknown { .. } | Malformed { .. } => return None,
        other => other.clone(),
    })
}

fn removal_candidates(cur: &Context, want: &Context) -> Vec<usize> {
    if cur.len() != want.len() + 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for r in 0..cur.len() {
        let mut v = cur.clone();
        v.remove(r);
        if v == *want {
            out.push(r);
        }
    }
    out
}

/// Remove context belief `j` from a proof's conclusion, rebuilding the tree.
/// Fails when the proof genuinely uses the belief.
pub(crate) fn try_strengthen(sig: &Signature, p: &Proof, j: usize) -> Option<Proof> {
    let ctx = &p.conclusion.context;
    if j >= ctx.len() {
        return None;
    }
    match &p.spec {
        RuleSpec::Weakening { i } if *i == j => return Some(p.children.first()?.clone()),
        RuleSpec::Contraction { i } if *i == j => {
            let once = try_strengthen(sig, p.children.first()?, j)?;
            return try_strengthen(sig, &once, j);
        }
        RuleSpec::Exchange { i } if *i == j => {
            return try_strengthen(sig, p.children.first()?, j + 1)
        }
        RuleSpec::Exchange { i } if *i + 1 == j => {
            let other = *i;
            return try_strengthen(sig, p.children.first()?, other);
        }
        _ => {}
    }
    let spec2 = shift_spec_down(&p.spec, j)?;
    let mut target_ctx = ctx.clone();
    target_ctx.remove(j);
    let target = Sequent::new(target_ctx, p.conclusion.goal.clone());
    let wants = premises(sig, &target, &spec2).ok()?;
    if wants.len() != p.children.len() {
        return None;
    }
    let mut kids = Vec::with_capacity(wants.len());
    for (ch, want) in p.children.iter().zip(wants.iter()) {
        if ch.conclusion == *want {
            kids.push(ch.clone());
            continue;
        }
        if ch.conclusion.goal != want.goal {
            return None;
        }
        let mut found = None;
        for r in removal_candidates(&ch.conclusion.context, &want.context) {
            if let Some(k2) = try_strengthen(sig, ch, r) {
                if k2.conclusion == *want {
                    found = Some(k2);
                    break;
                }
            }
        }
        kids.push(found?);
    }
    Some(Proof::new(target, spec2, kids))
}

/// Transport a proof to a different context by strengthening away beliefs not
/// in `target` and weakening in the missing ones, aligned on a longest common
/// subsequence.
pub(crate) fn retarget_context(sig: &Signature, p: &Proof, target: &Context) -> Option<Proof> {
    let cur = &p.conclusion.context;
    if cur == target {
        return Some(p.clone());
    }
    let n = cur.len();
    let m = target.len();
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if cur[i] == target[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let mut keep_cur = vec![false; n];
    let mut keep_tgt = vec![false; m];
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if cur[i] == target[j] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            keep_cur[i] = true;
            keep_tgt[j] = true;
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let mut q = p.clone();
    for r in (0..n).rev() {
        if !keep_cur[r] {
            q = try_strengthen(sig, &q, r)?;
        }
    }
    for (jj, b) in target.iter().enumerate() {
        if !keep_tgt[jj] {
            q = weaken_insert(&q, jj, b.clone());
        }
    }
    debug_assert_eq!(q.conclusion.context, *target);
    Some(q)
}

/// Construct a node and verify it against the kernel's premise computation.
fn build_checked(
    sig: &Signature,
    concl: Sequent,
    spec: RuleSpec,
    kids: Vec<Proof>,
) -> Result<Proof, TransformError> {
    let want = premises(sig, &concl, &spec).map_err(|e| {
        TransformError::Internal(format!("constructed an ill-formed {} node: {e}", spec.name()))
    })?;
    if want.len() != kids.len() {
        return Err(TransformError::Internal(format!(
            "constructed {} node has {} premises, expected {}",
            spec.name(),
            kids.len(),
            want.len()
        )));
    }
    for (w, k) in want.iter().zip(kids.iter()) {
        if *w != k.conclusion {
            return Err(TransformError::Internal(format!(
                "constructed {} node does not match its premises",
                spec.name()
            )));
        }
    }
    Ok(Proof::new(concl, spec, kids))
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Rewrite a formula as believed by simulated principal `q` at label `l`:
/// implication premises get wrapped in `q says[l] _`, all other connectives
/// (including `says` bodies) are mapped structurally.
pub fn simulate_formula(q: &Term, l: &Term, phi: &Formula) -> Formula {
    match phi {
        Formula::Rel(..) | Formula::True | Formula::False => phi.clone(),
        Formula::And(a, b) => {
            Formula::and(simulate_formula(q, l, a), simulate_formula(q, l, b))
        }
        Formula::Or(a, b) => Formula::or(simulate_formula(q, l, a), simulate_formula(q, l, b)),
        Formula::Implies(a, lab, b) => Formula::implies(
            Formula::says(q.clone(), l.clone(), simulate_formula(q, l, a)),
            lab.clone(),
            simulate_formula(q, l, b),
        ),
        Formula::Forall(bind, body) => {
            Formula::Forall(bind.clone(), Box::new(simulate_formula(q, l, body)))
        }
        Formula::Exists(bind, body) => {
            Formula::Exists(bind.clone(), Box::new(simulate_formula(q, l, body)))
        }
        Formula::Says(r, l2, body) => {
            Formula::Says(r.clone(), l2.clone(), Box::new(simulate_formula(q, l, body)))
        }
    }
}

/// Rewrite a belief for the simulation: transform the formula and push the
/// simulated pair onto the bottom of the stack.
pub fn simulate_belief(q: &Term, l: &Term, b: &Belief) -> Belief {
    let mut gp = b.gp.clone();
    gp.stack.insert(0, (q.clone(), l.clone()));
    Belief::new(simulate_formula(q, l, &b.formula), gp)
}

/// Rewrite every belief of a sequent for the simulation.
pub fn simulate_sequent(q: &Term, l: &Term, s: &Sequent) -> Sequent {
    Sequent::new(
        s.context.iter().map(|b| simulate_belief(q, l, b)).collect(),
        simulate_belief(q, l, &s.goal),
    )
}

fn bump_gp_positions(spec: &RuleSpec) -> RuleSpec {
    use RuleSpec::*;
    match spec {
        SelfLIntro { i, pos } => SelfLIntro { i: *i, pos: pos + 1 },
        SelfLElim { i, pos } => SelfLElim { i: *i, pos: pos + 1 },
        SelfRIntro { pos } => SelfRIntro { pos: pos + 1 },
        SelfRElim { pos } => SelfRElim { pos: pos + 1 },
        VarL { i, pos, l2 } => VarL { i: *i, pos: pos + 1, l2: l2.clone() },
        VarR { pos, l2 } => VarR { pos: pos + 1, l2: l2.clone() },
        FwdL { i, pos, q } => FwdL { i: *i, pos: pos + 1, q: q.clone() },
        FwdR { pos, p } => FwdR { pos: pos + 1, p: p.clone() },
        other => other.clone(),
    }
}

/// Replay a proof as observed by simulated principal `q` at label `l`.
///
/// The result proves the simulated sequent ([`simulate_sequent`] of the
/// input's conclusion). Implication rules absorb the simulation by pairing
/// with a `says` rule; every other rule is replayed in place with stack
/// positions shifted past the inserted pair.
pub fn simulate(
    sig: &Signature,
    p: &Proof,
    q: &Term,
    l: &Term,
) -> Result<Proof, TransformError> {
    let report = check_proof(sig, p);
    if !report.is_valid() {
        return Err(invalid_report(&report, "the input proof"));
    }
    let mut env = std::collections::BTreeMap::new();
    sort_check_expect(sig, &mut env, q, &Sort::principal())
        .map_err(|e| TransformError::InputInvalid(format!("simulated principal: {e}")))?;
    sort_check_expect(sig, &mut env, l, &Sort::label())
        .map_err(|e| TransformError::InputInvalid(format!("simulation label: {e}")))?;
    let mut avoid = BTreeSet::new();
    term_names(q, &mut avoid);
    term_names(l, &mut avoid);
    let p = rename_eigens_avoiding(sig, p, &avoid);
    let out = sim_proof(sig, &p, q, l)?;
    let rep = check_proof(sig, &out);
    if !rep.is_valid() {
        return Err(TransformError::Internal(format!(
            "simulation produced a proof that does not check: {:?}",
            rep.verdict
        )));
    }
    Ok(out)
}

fn sim_proof(sig: &Signature, p: &Proof, q: &Term, l: &Term) -> Result<Proof, TransformError> {
    let concl = simulate_sequent(q, l, &p.conclusion);
    let arity_err =
        || TransformError::InputInvalid("a rule has the wrong number of children".into());
    match &p.spec {
        RuleSpec::ImpR => {
            let inner = sim_proof(sig, p.children.first().ok_or_else(arity_err)?, q, l)?;
            let mut prems = premises(sig, &concl, &RuleSpec::ImpR)
                .map_err(|e| TransformError::Internal(format!("simulated ImpR: {e}")))?;
            let mid = prems.swap_remove(0);
            let unfold_at = mid.context.len() - 1;
            let says_node = build_checked(
                sig,
                mid,
                RuleSpec::SaysL { i: unfold_at },
                vec![inner],
            )?;
            Ok(Proof::new(concl, RuleSpec::ImpR, vec![says_node]))
        }
        RuleSpec::ImpL { i } => {
            if p.children.len() != 2 {
                return Err(arity_err());
            }
            let test = sim_proof(sig, &p.children[0], q, l)?;
            let main = sim_proof(sig, &p.children[1], q, l)?;
            let prems = premises(sig, &concl, &RuleSpec::ImpL { i: *i })
                .map_err(|e| TransformError::Internal(format!("simulated ImpL: {e}")))?;
            let says_node = build_checked(sig, prems[0].clone(), RuleSpec::SaysR, vec![test])?;
            Ok(Proof::new(concl, RuleSpec::ImpL { i: *i }, vec![says_node, main]))
        }
        spec => {
            let kids = p
                .children
                .iter()
                .map(|c| sim_proof(sig, c, q, l))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Proof::new(concl, bump_gp_positions(spec), kids))
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Permute connective rules toward the root until the proof is in first
/// normal form. The end sequent is preserved and the result re-checks.
pub fn normalize(sig: &Signature, p: &Proof) -> Result<Proof, TransformError> {
    let report = check_proof(sig, p);
    if !report.is_valid() {
        return Err(invalid_report(&report, "the input proof"));
    }
    let out = norm(sig, p)?;
    if out.conclusion != p.conclusion {
        return Err(TransformError::Internal("normalization changed the end sequent".into()));
    }
    let rep = check_proof(sig, &out);
    if !rep.is_valid() {
        return Err(TransformError::Internal(format!(
            "normalization produced a proof that does not check: {:?}",
            rep.verdict
        )));
    }
    Ok(out)
}

fn norm(sig: &Signature, p: &Proof) -> Result<Proof, TransformError> {
    let children: Vec<Proof> =
        p.children.iter().map(|c| norm(sig, c)).collect::<Result<_, _>>()?;
    let node = Proof::new(p.conclusion.clone(), p.spec.clone(), children);
    if is_manip(&node.spec) {
        Ok(node)
    } else {
        norm_nonmanip(sig, node)
    }
}

fn main_child_index(spec: &RuleSpec) -> Option<usize> {
    use RuleSpec::*;
    match spec {
        Weakening { .. } | Contraction { .. } | Exchange { .. } | SelfLIntro { .. }
        | SelfLElim { .. } | SelfRIntro { .. } | SelfRElim { .. } | VarL { .. }
        | FwdL { .. } | VarR { .. } | FwdR { .. } => Some(0),
        _ => None,
    }
}

fn norm_nonmanip(sig: &Signature, node: Proof) -> Result<Proof, TransformError> {
    if node.children.is_empty() || node.children.iter().all(is_second_nf) {
        return Ok(node);
    }
    let Some(mi) = main_child_index(&node.spec) else {
        return Err(TransformError::Unsupported(format!(
            "connective rules above a premise of {}",
            node.spec.name()
        )));
    };
    for (k, ch) in node.children.iter().enumerate() {
        if k != mi && !is_second_nf(ch) {
            return Err(TransformError::Unsupported(format!(
                "connective rules above a side premise of {}",
                node.spec.name()
            )));
        }
    }
    let commuted = commute(sig, &node)?;
    let kids = commuted
        .children
        .iter()
        .map(|ch| {
            if is_manip(&ch.spec) {
                Ok(ch.clone())
            } else {
                norm_nonmanip(sig, ch.clone())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Proof::new(commuted.conclusion, commuted.spec, kids))
}

/// Map an index in the premise context of `n_spec` back into its conclusion
/// context. `None` when the premise belief has no stable conclusion image.
fn premise_to_conclusion_index(n_spec: &RuleSpec, x: usize) -> Option<usize> {
    use RuleSpec::*;
    match n_spec {
        Weakening { i } => Some(if x >= *i { x + 1 } else { x }),
        Contraction { i } => {
            if x == *i || x == *i + 1 {
                None
            } else if x > *i + 1 {
                Some(x - 1)
            } else {
                Some(x)
            }
        }
        Exchange { i } => Some(if x == *i {
            *i + 1
        } else if x == *i + 1 {
            *i
        } else {
            x
        }),
        SelfLIntro { .. } | SelfLElim { .. } | VarL { .. } | FwdL { .. } | SelfRIntro { .. }
        | SelfRElim { .. } | VarR { .. } | FwdR { .. } => Some(x),
        _ => None,
    }
}

/// Re-address a connective rule from the premise context of `n_spec` into its
/// conclusion context.
fn remap_manip_into_conclusion(m_spec: &RuleSpec, n_spec: &RuleSpec) -> Option<RuleSpec> {
    use RuleSpec::*;
    let gp_clash = |x: usize| match n_spec {
        SelfLIntro { i, .. } | SelfLElim { i, .. } | VarL { i, .. } | FwdL { i, .. } => *i == x,
        _ => false,
    };
    let map = |i: &usize| -> Option<usize> {
        if gp_clash(*i) {
            return None;
        }
        premise_to_conclusion_index(n_spec, *i)
    };
    Some(match m_spec {
        AndL { i } => AndL { i: map(i)? },
        OrL { i } => OrL { i: map(i)? },
        ImpL { i } => ImpL { i: map(i)? },
        ForallL { i, t } => ForallL { i: map(i)?, t: t.clone() },
        ExistsL { i, eigen } => ExistsL { i: map(i)?, eigen: eigen.clone() },
        SaysL { i } => SaysL { i: map(i)? },
        AndR | OrR1 | OrR2 | ImpR | SaysR | ForallR { .. } | ExistsR { .. } => m_spec.clone(),
        _ => return None,
    })
}

/// Does the inner (non-connective) rule reappear in branch `k` of the
/// commuted connective rule? Goal-directed rules vanish on the test branch of
/// an implication, whose goal is reset.
fn inner_rule_applies(n_spec: &RuleSpec, root_spec: &RuleSpec, k: usize) -> bool {
    use RuleSpec::*;
    let goal_directed = matches!(
        n_spec,
        SelfRIntro { .. } | SelfRElim { .. } | VarR { .. } | FwdR { .. }
    );
    if goal_directed {
        if let ImpL { .. } = root_spec {
            return k != 0;
        }
    }
    true
}

/// Adjust the inner rule's context index for branch `k` of the commuted rule.
fn branch_adjust_n_spec(n_spec: &RuleSpec, root_spec: &RuleSpec, k: usize) -> Option<RuleSpec> {
    use RuleSpec::*;
    let adj = |j: usize| -> usize {
        match root_spec {
            AndL { i } => {
                if j > *i {
                    j + 1
                } else {
                    j
                }
            }
            ImpL { i } if k == 0 => {
                if j > *i {
                    j - 1
                } else {
                    j
                }
            }
            _ => j,
        }
    };
    Some(match n_spec {
        Weakening { i } => Weakening { i: adj(*i) },
        Contraction { i } => Contraction { i: adj(*i) },
        Exchange { i } => Exchange { i: adj(*i) },
        SelfLIntro { i, pos } => SelfLIntro { i: adj(*i), pos: *pos },
        SelfLElim { i, pos } => SelfLElim { i: adj(*i), pos: *pos },
        VarL { i, pos, l2 } => VarL { i: adj(*i), pos: *pos, l2: l2.clone() },
        FwdL { i, pos, q } => FwdL { i: adj(*i), pos: *pos, q: q.clone() },
        SelfRIntro { .. } | SelfRElim { .. } | VarR { .. } | FwdR { .. } => n_spec.clone(),
        _ => return None,
    })
}

/// Swap a non-connective node `n` with the connective rule at its main
/// premise, producing an equivalent tree whose root is the connective rule.
fn commute(sig: &Signature, n: &Proof) -> Result<Proof, TransformError> {
    let n_spec = n.spec.clone();
    let mut m = n.children[0].clone();
    let m_name = m.spec.name();
    let n_name = n_spec.name();
    let unsupported = move |detail: &str| {
        TransformError::Unsupported(format!("cannot commute {m_name} below {n_name}: {detail}"))
    };
    if !is_manip(&m.spec) {
        return Err(unsupported("the main premise does not end in a connective rule"));
    }
    // The connective rule may bind an eigenvariable that is free in the new
    // conclusion; rename it away first.
    if matches!(&m.spec, RuleSpec::ForallR { .. } | RuleSpec::ExistsL { .. }) {
        let mut fv = BTreeSet::new();
        n.conclusion.free_vars(&mut fv);
        let fv_names: BTreeSet<String> = fv.into_iter().map(|(x, _)| x).collect();
        let eigen = match &m.spec {
            RuleSpec::ForallR { eigen } => eigen.clone(),
            RuleSpec::ExistsL { eigen, .. } => eigen.clone(),
            _ => unreachable!(),
        };
        if fv_names.contains(&eigen) {
            m = rename_eigens_avoiding(sig, &m, &fv_names);
        }
    }
    let root_spec = remap_manip_into_conclusion(&m.spec, &n_spec)
        .ok_or_else(|| unsupported("the rules act on the same belief"))?;
    let c0 = n.conclusion.clone();
    let root_prems = premises(sig, &c0, &root_spec)
        .map_err(|e| unsupported(&format!("the commuted rule does not apply: {e}")))?;
    if root_prems.len() != m.children.len() {
        return Err(unsupported("premise arity mismatch"));
    }
    let sides: Vec<Proof> = n.children[1..].to_vec();
    let mut new_children = Vec::with_capacity(root_prems.len());
    for (k, rp) in root_prems.iter().enumerate() {
        let mc = &m.children[k];
        if !inner_rule_applies(&n_spec, &root_spec, k) {
            if mc.conclusion != *rp {
                return Err(unsupported("a reset branch does not line up"));
            }
            new_children.push(mc.clone());
            continue;
        }
        let n2_spec = branch_adjust_n_spec(&n_spec, &root_spec, k)
            .ok_or_else(|| unsupported("the inner rule cannot be re-addressed"))?;
        let mut branch_sides = Vec::with_capacity(sides.len());
        for s in &sides {
            let t = retarget_context(sig, s, &rp.context)
                .ok_or_else(|| unsupported("a side premise cannot cross the commuted rule"))?;
            branch_sides.push(t);
        }
        let want = premises(sig, rp, &n2_spec)
            .map_err(|e| unsupported(&format!("the inner rule does not re-apply: {e}")))?;
        if want.len() != 1 + branch_sides.len() {
            return Err(unsupported("inner premise arity mismatch"));
        }
        if want[0] != mc.conclusion {
            return Err(unsupported("the main premise does not line up after commuting"));
        }
        for (s, w) in branch_sides.iter().zip(want[1..].iter()) {
            if s.conclusion != *w {
                return Err(unsupported("a side premise does not line up after commuting"));
            }
        }
        let mut kids = vec![mc.clone()];
        kids.extend(branch_sides);
        new_children.push(Proof::new(rp.clone(), n2_spec, kids));
    }
    Ok(Proof::new(c0, root_spec, new_children))
}

// ---------------------------------------------------------------------------
// Cut elimination
// ---------------------------------------------------------------------------

/// Eliminate a cut with the default fuel budget: given `p1 : Γ ⊢ B` and
/// `p2 : Γ with B at index ⊢ φ`, produce a proof of `Γ ⊢ φ`.
pub fn eliminate_cut(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    index: usize,
) -> Result<Proof, TransformError> {
    eliminate_cut_with_fuel(sig, p1, p2, index, DEFAULT_CUT_FUEL)
}

/// [`eliminate_cut`] with an explicit fuel budget.
pub fn eliminate_cut_with_fuel(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    index: usize,
    fuel: usize,
) -> Result<Proof, TransformError> {
    let r1 = check_proof(sig, p1);
    if !r1.is_valid() {
        return Err(invalid_report(&r1, "the first input proof"));
    }
    let r2 = check_proof(sig, p2);
    if !r2.is_valid() {
        return Err(invalid_report(&r2, "the second input proof"));
    }
    let ctx2 = &p2.conclusion.context;
    if index >= ctx2.len() {
        return Err(TransformError::ContextMismatch(format!(
            "cut index {index} out of range for a context of length {}",
            ctx2.len()
        )));
    }
    let cut_b = &ctx2[index];
    let mut reduced = ctx2.clone();
    reduced.remove(index);
    if reduced != p1.conclusion.context {
        return Err(TransformError::ContextMismatch(
            "the second proof's context minus the cut belief must equal the first proof's context"
                .into(),
        ));
    }
    if *cut_b != p1.conclusion.goal {
        return Err(TransformError::ContextMismatch(
            "the first proof must prove the belief being cut".into(),
        ));
    }
    let p1n = match classify_normal_form(p1) {
        NormalFormTag::NotNormal(_) => normalize(sig, p1).unwrap_or_else(|_| p1.clone()),
        _ => p1.clone(),
    };
    let p2n = match classify_normal_form(p2) {
        NormalFormTag::NotNormal(_) => normalize(sig, p2).unwrap_or_else(|_| p2.clone()),
        _ => p2.clone(),
    };
    // Keep the two proofs' bound names apart so commuted rules never trip
    // over each other's eigenvariables.
    let mut avoid = BTreeSet::new();
    proof_names(&p2n, &mut avoid);
    let p1n = rename_eigens_avoiding(sig, &p1n, &avoid);
    let mut avoid1 = BTreeSet::new();
    proof_names(&p1n, &mut avoid1);
    let p2n = rename_eigens_avoiding(sig, &p2n, &avoid1);
    let mut gas = fuel;
    let out = cut(sig, &p1n, &p2n, index, &mut gas).map_err(|e| match e {
        TransformError::FuelExhausted(_) => TransformError::FuelExhausted(fuel),
        other => other,
    })?;
    let expected = Sequent::new(p1.conclusion.context.clone(), p2.conclusion.goal.clone());
    if out.conclusion != expected {
        return Err(TransformError::Internal("cut elimination changed the end sequent".into()));
    }
    let rep = check_proof(sig, &out);
    if !rep.is_valid() {
        return Err(TransformError::Internal(format!(
            "cut elimination produced a proof that does not check: {:?}",
            rep.verdict
        )));
    }
    Ok(out)
}

fn cut(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    c: usize,
    gas: &mut usize,
) -> Result<Proof, TransformError> {
    if *gas == 0 {
        return Err(TransformError::FuelExhausted(0));
    }
    *gas -= 1;

    // Fast path: the right proof may not need the cut belief at all.
    if let Some(s) = try_strengthen(sig, p2, c) {
        return Ok(s);
    }

    use RuleSpec::*;
    if let Ax { i } = &p2.spec {
        if *i == c {
            return Ok(p1.clone());
        }
    }

    let cut_b = p2.conclusion.context[c].clone();
    let mut target_ctx = p2.conclusion.context.clone();
    target_ctx.remove(c);

    match p2.spec.clone() {
        Contraction { i } if i == c => {
            let lifted = weaken_insert(p1, c, cut_b.clone());
            let r1 = cut(sig, &lifted, &p2.children[0], c + 1, gas)?;
            cut(sig, p1, &r1, c, gas)
        }
        Exchange { i } if i == c => cut(sig, p1, &p2.children[0], c + 1, gas),
        Exchange { i } if i + 1 == c => cut(sig, p1, &p2.children[0], i, gas),
        VarL { i, pos, l2: _ } if i == c => {
            let side = cut(sig, p1, &p2.children[1], c, gas)?;
            let main = &p2.children[0];
            let new_goal = main.conclusion.context[c].clone();
            let orig_label = cut_b.gp.stack[pos].1.clone();
            let wrap = build_checked(
                sig,
                Sequent::new(target_ctx, new_goal),
                VarR { pos, l2: orig_label },
                vec![p1.clone(), side],
            )?;
            cut(sig, &wrap, main, c, gas)
        }
        FwdL { i, pos, q: _ } if i == c => {
            let read = cut(sig, p1, &p2.children[1], c, gas)?;
            let write = cut(sig, p1, &p2.children[2], c, gas)?;
            let main = &p2.children[0];
            let new_goal = main.conclusion.context[c].clone();
            let orig_p = cut_b.gp.stack[pos].0.clone();
            let wrap = build_checked(
                sig,
                Sequent::new(target_ctx, new_goal),
                FwdR { pos, p: orig_p },
                vec![p1.clone(), read, write],
            )?;
            cut(sig, &wrap, main, c, gas)
        }
        SelfLIntro { i, pos } if i == c => {
            let main = &p2.children[0];
            let new_goal = main.conclusion.context[c].clone();
            let wrap = build_checked(
                sig,
                Sequent::new(target_ctx, new_goal),
                SelfRElim { pos },
                vec![p1.clone()],
            )?;
            cut(sig, &wrap, main, c, gas)
        }
        SelfLElim { i, pos } if i == c => {
            let main = &p2.children[0];
            let new_goal = main.conclusion.context[c].clone();
            let wrap = build_checked(
                sig,
                Sequent::new(target_ctx, new_goal),
                SelfRIntro { pos },
                vec![p1.clone()],
            )?;
            cut(sig, &wrap, main, c, gas)
        }
        FalseL { i } if i == c => replace_false_goal(sig, p1, &p2.conclusion.goal),
        AndL { i } | OrL { i } | ImpL { i } | ForallL { i, .. } | ExistsL { i, .. }
        | SaysL { i }
            if i == c =>
        {
            principal_left(sig, p1, p2, c, gas)
        }
        _ => right_commute(sig, p1, p2, c, gas),
    }
}

/// The right proof's last rule does not touch the cut belief: rebuild it on
/// the reduced context and push the cut into each premise.
fn right_commute(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    c: usize,
    gas: &mut usize,
) -> Result<Proof, TransformError> {
    let cut_b = p2.conclusion.context[c].clone();
    let mut target_ctx = p2.conclusion.context.clone();
    target_ctx.remove(c);
    let target = Sequent::new(target_ctx, p2.conclusion.goal.clone());
    let spec2 = shift_spec_down(&p2.spec, c).ok_or_else(|| {
        TransformError::Unsupported(format!("cannot push a cut past {}", p2.spec.name()))
    })?;
    let wants = premises(sig, &target, &spec2).map_err(|e| {
        TransformError::Unsupported(format!("cut commute through {}: {e}", p2.spec.name()))
    })?;
    if wants.len() != p2.children.len() {
        return Err(TransformError::Unsupported("cut commute arity mismatch".into()));
    }
    let mut kids = Vec::with_capacity(wants.len());
    for (ch, want) in p2.children.iter().zip(wants.iter()) {
        if ch.conclusion == *want {
            kids.push(ch.clone());
            continue;
        }
        if ch.conclusion.goal != want.goal {
            return Err(TransformError::Unsupported(
                "cut commute changed a premise goal".into(),
            ));
        }
        let mut done: Option<Proof> = None;
        let mut last_err: Option<TransformError> = None;
        for r in removal_candidates(&ch.conclusion.context, &want.context) {
            if ch.conclusion.context[r] != cut_b {
                continue;
            }
            let Some(p1t) = retarget_context(sig, p1, &want.context) else {
                last_err = Some(TransformError::Unsupported(
                    "cannot transport the left proof into a premise".into(),
                ));
                continue;
            };
            match cut(sig, &p1t, ch, r, gas) {
                Ok(res) => {
                    if res.conclusion == *want {
                        done = Some(res);
                        break;
                    }
                    last_err = Some(TransformError::Internal(
                        "cut commute produced a misaligned premise".into(),
                    ));
                }
                Err(e @ TransformError::FuelExhausted(_)) => return Err(e),
                Err(e) => last_err = Some(e),
            }
        }
        match done {
            Some(d) => kids.push(d),
            None => {
                return Err(last_err.unwrap_or_else(|| {
                    TransformError::Unsupported(format!(
                        "no premise of {} carries the cut belief",
                        p2.spec.name()
                    ))
                }))
            }
        }
    }
    Ok(Proof::new(target, spec2, kids))
}

/// The right proof's last rule is a left rule principal on the cut belief;
/// dispatch on the left proof's last rule.
fn principal_left(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    c: usize,
    gas: &mut usize,
) -> Result<Proof, TransformError> {
    use RuleSpec::*;
    match &p1.spec {
        Ax { i } => embed_via_contraction(sig, p2, c, *i),
        FalseL { .. } | AndR | OrR1 | OrR2 | ImpR | ForallR { .. } | ExistsR { .. } | SaysR => {
            principal_reduce(sig, p1, p2, c, gas)
        }
        VarR { .. } | FwdR { .. } | SelfRIntro { .. } | SelfRElim { .. } => {
            if let SaysL { .. } = &p2.spec {
                let inv = invert_says(sig, p1)?;
                cut(sig, &inv, &p2.children[0], c, gas)
            } else {
                Err(TransformError::Unsupported(format!(
                    "cut of a proof ending in {} against {} principal on the cut belief",
                    p1.spec.name(),
                    p2.spec.name()
                )))
            }
        }
        Weakening { .. } | Contraction { .. } | Exchange { .. } | AndL { .. } | OrL { .. }
        | ImpL { .. } | ForallL { .. } | ExistsL { .. } | SaysL { .. } | SelfLIntro { .. }
        | SelfLElim { .. } | VarL { .. } | FwdL { .. } => left_commute(sig, p1, p2, c, gas),
        other => Err(TransformError::Unsupported(format!(
            "cut with a left proof ending in {}",
            other.name()
        ))),
    }
}

/// The cut belief already sits in the shared context (the left proof is an
/// axiom at index `k`): contract it and shuttle the copy to the cut position.
fn embed_via_contraction(
    sig: &Signature,
    p2: &Proof,
    c: usize,
    k: usize,
) -> Result<Proof, TransformError> {
    let mut target_ctx = p2.conclusion.context.clone();
    target_ctx.remove(c);
    let concl = Sequent::new(target_ctx, p2.conclusion.goal.clone());
    let mut specs: Vec<RuleSpec> = vec![RuleSpec::Contraction { i: k }];
    if c <= k {
        for t in (c..k).rev() {
            specs.push(RuleSpec::Exchange { i: t });
        }
    } else {
        for t in (k + 1)..c {
            specs.push(RuleSpec::Exchange { i: t });
        }
    }
    wrap_chain(sig, concl, &specs, p2.clone())
}

fn wrap_chain(
    sig: &Signature,
    concl: Sequent,
    specs: &[RuleSpec],
    top: Proof,
) -> Result<Proof, TransformError> {
    let Some((head, rest)) = specs.split_first() else {
        if top.conclusion != concl {
            return Err(TransformError::Internal("axiom embedding misaligned".into()));
        }
        return Ok(top);
    };
    let mut prems = premises(sig, &concl, head)
        .map_err(|e| TransformError::Internal(format!("axiom embedding: {e}")))?;
    let inner = wrap_chain(sig, prems.swap_remove(0), rest, top)?;
    Ok(Proof::new(concl, head.clone(), vec![inner]))
}

/// Fabricate a leaf proof of `want` from a left proof that concludes by
/// exploding a false context belief.
fn falsum_component(
    sig: &Signature,
    p1: &Proof,
    want: Sequent,
) -> Result<Proof, TransformError> {
    if let RuleSpec::FalseL { i } = &p1.spec {
        build_checked(sig, want, RuleSpec::FalseL { i: *i }, vec![])
    } else {
        Err(TransformError::Internal("falsum fabrication on a non-falsum proof".into()))
    }
}

/// Principal reduction: the left proof introduces the cut connective, the
/// right proof consumes it.
fn principal_reduce(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    c: usize,
    gas: &mut usize,
) -> Result<Proof, TransformError> {
    use RuleSpec::*;
    let cut_b = p2.conclusion.context[c].clone();
    let mut target_ctx = p2.conclusion.context.clone();
    target_ctx.remove(c);
    let mismatch = || {
        TransformError::Unsupported(format!(
            "principal reduction between {} and {}",
            p1.spec.name(),
            p2.spec.name()
        ))
    };
    match &p2.spec {
        AndL { .. } => {
            let main = &p2.children[0];
            let Formula::And(fa, fb) = &cut_b.formula else {
                return Err(mismatch());
            };
            let ba = Belief::new((**fa).clone(), cut_b.gp.clone());
            let bb = Belief::new((**fb).clone(), cut_b.gp.clone());
            let (pa, pb) = match &p1.spec {
                AndR => (p1.children[0].clone(), p1.children[1].clone()),
                FalseL { .. } => (
                    falsum_component(sig, p1, Sequent::new(target_ctx.clone(), ba.clone()))?,
                    falsum_component(sig, p1, Sequent::new(target_ctx.clone(), bb.clone()))?,
                ),
                _ => return Err(mismatch()),
            };
            let pb_lifted = weaken_insert(&pb, c, ba);
            let r1 = cut(sig, &pb_lifted, main, c + 1, gas)?;
            cut(sig, &pa, &r1, c, gas)
        }
        OrL { .. } => match &p1.spec {
            OrR1 => cut(sig, &p1.children[0], &p2.children[0], c, gas),
            OrR2 => cut(sig, &p1.children[0], &p2.children[1], c, gas),
            FalseL { .. } => {
                let Formula::Or(fa, _) = &cut_b.formula else {
                    return Err(mismatch());
                };
                let ba = Belief::new((**fa).clone(), cut_b.gp.clone());
                let pa = falsum_component(sig, p1, Sequent::new(target_ctx.clone(), ba))?;
                cut(sig, &pa, &p2.children[0], c, gas)
            }
            _ => Err(mismatch()),
        },
        ImpL { .. } => {
            let test = &p2.children[0];
            let main = &p2.children[1];
            match &p1.spec {
                ImpR => {
                    let inner = &p1.children[0];
                    let r1 = cut(sig, test, inner, target_ctx.len(), gas)?;
                    cut(sig, &r1, main, c, gas)
                }
                FalseL { .. } => {
                    let Formula::Implies(_, _, fb) = &cut_b.formula else {
                        return Err(mismatch());
                    };
                    let bb = Belief::new((**fb).clone(), cut_b.gp.clone());
                    let pb = falsum_component(sig, p1, Sequent::new(target_ctx.clone(), bb))?;
                    cut(sig, &pb, main, c, gas)
                }
                _ => Err(mismatch()),
            }
        }
        ForallL { t, .. } => {
            let main = &p2.children[0];
            match &p1.spec {
                ForallR { eigen } => {
                    let inst = subst_proof_var(sig, &p1.children[0], eigen, t);
                    cut(sig, &inst, main, c, gas)
                }
                FalseL { .. } => {
                    let want = main.conclusion.context[c].clone();
                    let pi =
                        falsum_component(sig, p1, Sequent::new(target_ctx.clone(), want))?;
                    cut(sig, &pi, main, c, gas)
                }
                _ => Err(mismatch()),
            }
        }
        ExistsL { eigen, .. } => {
            let main = &p2.children[0];
            match &p1.spec {
                ExistsR { t } => {
                    let minst = subst_proof_var(sig, main, eigen, t);
                    cut(sig, &p1.children[0], &minst, c, gas)
                }
                FalseL { .. } => {
                    let want = main.conclusion.context[c].clone();
                    let pi =
                        falsum_component(sig, p1, Sequent::new(target_ctx.clone(), want))?;
                    cut(sig, &pi, main, c, gas)
                }
                _ => Err(mismatch()),
            }
        }
        SaysL { .. } => {
            let main = &p2.children[0];
            match &p1.spec {
                SaysR => cut(sig, &p1.children[0], main, c, gas),
                FalseL { .. } => {
                    let want = main.conclusion.context[c].clone();
                    let pi =
                        falsum_component(sig, p1, Sequent::new(target_ctx.clone(), want))?;
                    cut(sig, &pi, main, c, gas)
                }
                _ => Err(mismatch()),
            }
        }
        _ => Err(mismatch()),
    }
}

/// The left proof's last rule acts on the shared context: rebuild it below
/// the cut and push the cut into each main premise.
fn left_commute(
    sig: &Signature,
    p1: &Proof,
    p2: &Proof,
    c: usize,
    gas: &mut usize,
) -> Result<Proof, TransformError> {
    let cut_b = p2.conclusion.context[c].clone();
    let mut target_ctx = p2.conclusion.context.clone();
    target_ctx.remove(c);
    let new_concl = Sequent::new(target_ctx, p2.conclusion.goal.clone());
    let wants = premises(sig, &new_concl, &p1.spec).map_err(|e| {
        TransformError::Unsupported(format!("left commute through {}: {e}", p1.spec.name()))
    })?;
    if wants.len() != p1.children.len() {
        return Err(TransformError::Unsupported("left commute arity mismatch".into()));
    }
    let mut kids = Vec::with_capacity(wants.len());
    for (ch, want) in p1.children.iter().zip(wants.iter()) {
        if ch.conclusion == *want {
            kids.push(ch.clone());
            continue;
        }
        if ch.conclusion.goal != cut_b || ch.conclusion.context != want.context {
            return Err(TransformError::Unsupported(
                "left commute branch does not line up".into(),
            ));
        }
        let mut ext = ch.conclusion.context.clone();
        ext.push(cut_b.clone());
        let p2t = retarget_context(sig, p2, &ext).ok_or_else(|| {
            TransformError::Unsupported(
                "cannot transport the right proof across the left rule".into(),
            )
        })?;
        let r = cut(sig, ch, &p2t, ext.len() - 1, gas)?;
        if r.conclusion != *want {
            return Err(TransformError::Internal(
                "left commute produced a misaligned branch".into(),
            ));
        }
        kids.push(r);
    }
    Ok(Proof::new(new_concl, p1.spec.clone(), kids))
}

/// Invert a proof of a `says` goal into a proof of its body on the extended
/// stack. Supported for proofs whose goal-spine uses no connective rules
/// other than a final says introduction.
fn invert_says(sig: &Signature, p: &Proof) -> Result<Proof, TransformError> {
    let goal = &p.conclusion.goal;
    let Formula::Says(q, l, phi) = &goal.formula else {
        return Err(TransformError::Internal("says inversion on a non-says goal".into()));
    };
    let new_goal = Belief::new((**phi).clone(), goal.gp.push(q.clone(), l.clone()));
    let concl = Sequent::new(p.conclusion.context.clone(), new_goal);
    use RuleSpec::*;
    match &p.spec {
        SaysR => Ok(p.children[0].clone()),
        Ax { i } => {
            let mut prems = premises(sig, &concl, &SaysL { i: *i })
                .map_err(|e| TransformError::Internal(format!("says inversion: {e}")))?;
            let leaf = build_checked(sig, prems.swap_remove(0), Ax { i: *i }, vec![])?;
            build_checked(sig, concl, SaysL { i: *i }, vec![leaf])
        }
        FalseL { i } => build_checked(sig, concl, FalseL { i: *i }, vec![]),
        Weakening { .. } | Contraction { .. } | Exchange { .. } | SelfLIntro { .. }
        | SelfLElim { .. } | VarL { .. } | FwdL { .. } | SelfRIntro { .. } | SelfRElim { .. }
        | VarR { .. } | FwdR { .. } => {
            let wants = premises(sig, &concl, &p.spec).map_err(|e| {
                TransformError::Unsupported(format!(
                    "says inversion through {}: {e}",
                    p.spec.name()
                ))
            })?;
            if wants.len() != p.children.len() {
                return Err(TransformError::Unsupported("says inversion arity mismatch".into()));
            }
            let mut kids = Vec::with_capacity(wants.len());
            for (ch, want) in p.children.iter().zip(wants.iter()) {
                if ch.conclusion == *want {
                    kids.push(ch.clone());
                    continue;
                }
                let inv = invert_says(sig, ch)?;
                if inv.conclusion != *want {
                    return Err(TransformError::Unsupported(
                        "says inversion misaligned".into(),
                    ));
                }
                kids.push(inv);
            }
            Ok(Proof::new(concl, p.spec.clone(), kids))
        }
        other => Err(TransformError::Unsupported(format!(
            "cannot invert a says goal under {}",
            other.name()
        ))),
    }
}

/// Turn a proof of `Γ ⊢ false @ g'` into a proof of `Γ ⊢ goal` for any goal
/// whose principal extends `g'`, by re-pointing the falsum explosion.
fn replace_false_goal(
    sig: &Signature,
    p: &Proof,
    new_goal: &Belief,
) -> Result<Proof, TransformError> {
    let concl = Sequent::new(p.conclusion.context.clone(), new_goal.clone());
    use RuleSpec::*;
    match &p.spec {
        Ax { i } | FalseL { i } => build_checked(sig, concl, FalseL { i: *i }, vec![]),
        Weakening { .. } | Contraction { .. } | Exchange { .. } | AndL { .. } | OrL { .. }
        | ImpL { .. } | ForallL { .. } | ExistsL { .. } | SaysL { .. } | SelfLIntro { .. }
        | SelfLElim { .. } | VarL { .. } | FwdL { .. } => {
            let wants = premises(sig, &concl, &p.spec).map_err(|e| {
                TransformError::Unsupported(format!(
                    "goal replacement through {}: {e}",
                    p.spec.name()
                ))
            })?;
            if wants.len() != p.children.len() {
                return Err(TransformError::Unsupported(
                    "goal replacement arity mismatch".into(),
                ));
            }
            let mut kids = Vec::with_capacity(wants.len());
            for (ch, want) in p.children.iter().zip(wants.iter()) {
                if ch.conclusion == *want {
                    kids.push(ch.clone());
                    continue;
                }
                if ch.conclusion.goal.formula != Formula::False
                    || ch.conclusion.context != want.context
                {
                    return Err(TransformError::Unsupported(
                        "goal replacement branch does not line up".into(),
                    ));
                }
                kids.push(replace_false_goal(sig, ch, &want.goal)?);
            }
            Ok(Proof::new(concl, p.spec.clone(), kids))
        }
        other => Err(TransformError::Unsupported(format!(
            "cannot replace a false goal under {}",
            other.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Says unfolding and speaks-for elimination
// ---------------------------------------------------------------------------

fn unsays_core(sig: &Signature, p: &Proof) -> Result<Proof, TransformError> {
    let goal = &p.conclusion.goal;
    let Formula::Says(q, l, phi) = &goal.formula else {
        return Err(TransformError::InputInvalid(
            "the proof must conclude a says formula".into(),
        ));
    };
    let says_b = goal.clone();
    let inner_goal = Belief::new((**phi).clone(), goal.gp.push(q.clone(), l.clone()));
    let mut ctx = p.conclusion.context.clone();
    let n = ctx.len();
    ctx.push(says_b);
    let concl2 = Sequent::new(ctx, inner_goal);
    let mut prems = premises(sig, &concl2, &RuleSpec::SaysL { i: n })
        .map_err(|e| TransformError::Internal(format!("says unfolding: {e}")))?;
    let ax = build_checked(sig, prems.swap_remove(0), RuleSpec::Ax { i: n }, vec![])?;
    let p2 = build_checked(sig, concl2, RuleSpec::SaysL { i: n }, vec![ax])?;
    let p1n = match classify_normal_form(p) {
        NormalFormTag::NotNormal(_) => normalize(sig, p).unwrap_or_else(|_| p.clone()),
        _ => p.clone(),
    };
    let mut gas = DEFAULT_CUT_FUEL;
    cut(sig, &p1n, &p2, n, &mut gas).map_err(|e| match e {
        TransformError::FuelExhausted(_) => TransformError::FuelExhausted(DEFAULT_CUT_FUEL),
        other => other,
    })
}

/// From a proof of `Γ ⊢ (q says[l] φ) @ g`, derive `Γ ⊢ φ @ g·(q,l)`.
pub fn unsays_r(sig: &Signature, p: &Proof) -> Result<Proof, TransformError> {
    let report = check_proof(sig, p);
    if !report.is_valid() {
        return Err(invalid_report(&report, "the input proof"));
    }
    let out = unsays_core(sig, p)?;
    let rep = check_proof(sig, &out);
    if !rep.is_valid() {
        return Err(TransformError::Internal(format!(
            "says unfolding produced a proof that does not check: {:?}",
            rep.verdict
        )));
    }
    Ok(out)
}

/// Transport a proven belief along a speaks-for derivation: from
/// `Γ ⊢ φ @ g₁` and a derivation of `Γ ⊢ g₁ speaksfor g₂`, derive
/// `Γ ⊢ φ @ g₂`.
pub fn sf_eliminate(
    sig: &Signature,
    p: &Proof,
    d: &SFDerivation,
) -> Result<Proof, TransformError> {
    let report = check_proof(sig, p);
    if !report.is_valid() {
        return Err(invalid_report(&report, "the input proof"));
    }
    let drep = crate::trust::check_sf(sig, d);
    if !drep.is_valid() {
        return Err(invalid_report(&drep, "the speaks-for derivation"));
    }
    if d.judgment.context != p.conclusion.context {
        return Err(TransformError::ContextMismatch(
            "the derivation's context must match the proof's context".into(),
        ));
    }
    if d.judgment.g1 != p.conclusion.goal.gp {
        return Err(TransformError::ContextMismatch(
            "the derivation's source principal must match the proof's goal".into(),
        ));
    }
    let out = sf_elim_rec(sig, p, d)?;
    let rep = check_proof(sig, &out);
    if !rep.is_valid() {
        return Err(TransformError::Internal(format!(
            "speaks-for elimination produced a proof that does not check: {:?}",
            rep.verdict
        )));
    }
    Ok(out)
}

fn sf_elim_rec(
    sig: &Signature,
    p: &Proof,
    d: &SFDerivation,
) -> Result<Proof, TransformError> {
    let ctx = p.conclusion.context.clone();
    let phi = p.conclusion.goal.formula.clone();
    let short = |what: &str| TransformError::Internal(format!("speaks-for elimination: {what}"));
    match &d.rule {
        SFRule::ReflSF => Ok(p.clone()),
        SFRule::TransSF(a, b) => {
            let r = sf_elim_rec(sig, p, a)?;
            sf_elim_rec(sig, &r, b)
        }
        SFRule::ExtSF(inner) => {
            let (pr, lb) = d
                .judgment
                .g1
                .stack
                .last()
                .cloned()
                .ok_or_else(|| short("extension with an empty stack"))?;
            let says_goal = Belief::new(
                Formula::says(pr, lb, phi),
                inner.judgment.g1.clone(),
            );
            let wrapped =
                build_checked(sig, Sequent::new(ctx, says_goal), RuleSpec::SaysR, vec![p.clone()])?;
            let moved = sf_elim_rec(sig, &wrapped, inner)?;
            unsays_core(sig, &moved)
        }
        SFRule::SelfLSF => {
            let pos = d
                .judgment
                .g2
                .stack
                .len()
                .checked_sub(2)
                .ok_or_else(|| short("self introduction on a short stack"))?;
            let goal2 = Belief::new(phi, d.judgment.g2.clone());
            build_checked(sig, Sequent::new(ctx, goal2), RuleSpec::SelfRIntro { pos }, vec![
                p.clone(),
            ])
        }
        SFRule::SelfRSF => {
            let pos = d
                .judgment
                .g1
                .stack
                .len()
                .checked_sub(2)
                .ok_or_else(|| short("self elimination on a short stack"))?;
            let goal2 = Belief::new(phi, d.judgment.g2.clone());
            build_checked(sig, Sequent::new(ctx, goal2), RuleSpec::SelfRElim { pos }, vec![
                p.clone(),
            ])
        }
        SFRule::VarSF(side) => {
            let pos = d
                .judgment
                .g2
                .stack
                .len()
                .checked_sub(1)
                .ok_or_else(|| short("variance on an empty stack"))?;
            let l1 = d
                .judgment
                .g1
                .stack
                .last()
                .ok_or_else(|| short("variance on an empty stack"))?
                .1
                .clone();
            let goal2 = Belief::new(phi, d.judgment.g2.clone());
            build_checked(sig, Sequent::new(ctx, goal2), RuleSpec::VarR { pos, l2: l1 }, vec![
                p.clone(),
                side.clone(),
            ])
        }
        SFRule::FwdSF(read, write) => {
            let pos = d
                .judgment
                .g2
                .stack
                .len()
                .checked_sub(1)
                .ok_or_else(|| short("forwarding on an empty stack"))?;
            let p_orig = d
                .judgment
                .g1
                .stack
                .last()
                .ok_or_else(|| short("forwarding on an empty stack"))?
                .0
                .clone();
            let goal2 = Belief::new(phi, d.judgment.g2.clone());
            build_checked(sig, Sequent::new(ctx, goal2), RuleSpec::FwdR { pos, p: p_orig }, vec![
                p.clone(),
                read.clone(),
                write.clone(),
            ])
        }
    }
}

// ---------------------------------------------------------------------------
// Disjunct extraction
// ---------------------------------------------------------------------------

/// On a proof of a disjunction, report which disjunct the normalized proof
/// introduces (1 or 2) together with the subproof of that disjunct.
pub fn extract_disjunct(sig: &Signature, p: &Proof) -> Result<(usize, Proof), TransformError> {
    let report = check_proof(sig, p);
    if !report.is_valid() {
        return Err(invalid_report(&report, "the input proof"));
    }
    if !matches!(&p.conclusion.goal.formula, Formula::Or(..)) {
        return Err(TransformError::InputInvalid("the goal is not a disjunction".into()));
    }
    let pn = match classify_normal_form(p) {
        NormalFormTag::NotNormal(_) => normalize(sig, p)?,
        _ => p.clone(),
    };
    match &pn.spec {
        RuleSpec::OrR1 => Ok((1, pn.children[0].clone())),
        RuleSpec::OrR2 => Ok((2, pn.children[0].clone())),
        other => Err(TransformError::Unsupported(format!(
            "the normalized proof ends in {}, not a disjunction introduction",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequent::GenPrincipal;
    use crate::signature::{FuncDecl, RelDecl};
    use crate::trust::SFJudgment;

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

    /// A valid proof whose root is a goal-variance rule over a disjunction
    /// introduction: context `[R(Alice)@⟨Pub⟩·(Bob,Pub), flows(Pub,Sec)@⟨Pub⟩·(Bob,Sec)]`,
    /// goal `(R(Alice) ∨ R(Bob)) @ ⟨Pub⟩·(Bob,Sec)`.
    fn var_over_or() -> (Signature, Proof) {
        let s = sig();
        let g_low = gpub().push(c("Bob"), c("Pub"));
        let g_high = gpub().push(c("Bob"), c("Sec"));
        let ctx = vec![
            Belief::new(r("Alice"), g_low.clone()),
            Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high.clone()),
        ];
        let or_f = Formula::or(r("Alice"), r("Bob"));
        let inner = ax(Sequent::new(ctx.clone(), Belief::new(r("Alice"), g_low.clone())), 0);
        let or_node = Proof::new(
            Sequent::new(ctx.clone(), Belief::new(or_f.clone(), g_low)),
            RuleSpec::OrR1,
            vec![inner],
        );
        let side = ax(
            Sequent::new(
                ctx.clone(),
                Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high.clone()),
            ),
            1,
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
    fn classify_tags_basic_shapes() {
        let s = sig();
        let ctx = vec![Belief::new(r("Alice"), gpub())];
        let p = ax(Sequent::new(ctx.clone(), Belief::new(r("Alice"), gpub())), 0);
        assert_eq!(classify_normal_form(&p), NormalFormTag::SecondNF);

        let says_f = Formula::says(c("Bob"), c("Sec"), r("Alice"));
        let inner_gp = gpub().push(c("Bob"), c("Sec"));
        let ctx2 = vec![Belief::new(r("Alice"), inner_gp.clone())];
        let inner = ax(Sequent::new(ctx2.clone(), Belief::new(r("Alice"), inner_gp)), 0);
        let says = Proof::new(
            Sequent::new(ctx2, Belief::new(says_f, gpub())),
            RuleSpec::SaysR,
            vec![inner],
        );
        assert!(check_proof(&s, &says).is_valid());
        assert_eq!(classify_normal_form(&says), NormalFormTag::FirstNF);

        let (_, var) = var_over_or();
        assert_eq!(classify_normal_form(&var), NormalFormTag::NotNormal(vec![]));
    }

    #[test]
    fn normalize_permutes_a_goal_rule_below_a_disjunction() {
        let (s, p) = var_over_or();
        let out = normalize(&s, &p).expect("normalizes");
        assert_eq!(out.conclusion, p.conclusion);
        assert_eq!(out.spec, RuleSpec::OrR1);
        assert!(check_proof(&s, &out).is_valid());
        assert_ne!(
            std::mem::discriminant(&classify_normal_form(&out)),
            std::mem::discriminant(&NormalFormTag::NotNormal(vec![]))
        );
    }

    #[test]
    fn normalize_is_idempotent() {
        let (s, p) = var_over_or();
        let once = normalize(&s, &p).unwrap();
        let twice = normalize(&s, &once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn simulate_wraps_a_leaf() {
        let s = sig();
        let p = Proof::leaf(
            Sequent::new(vec![], Belief::new(Formula::True, gpub())),
            RuleSpec::TrueR,
        );
        let out = simulate(&s, &p, &c("Bob"), &c("Sec")).expect("simulates");
        assert_eq!(out.conclusion, simulate_sequent(&c("Bob"), &c("Sec"), &p.conclusion));
        assert_eq!(out.conclusion.goal.gp.stack, vec![(c("Bob"), c("Sec"))]);
    }

    #[test]
    fn simulate_descends_into_says_bodies() {
        // The transformation must rewrite underneath says, not freeze it.
        let inner = Formula::implies(r("Alice"), c("Pub"), r("Bob"));
        let phi = Formula::says(c("Bob"), c("Pub"), inner);
        let got = simulate_formula(&c("Cathy"), &c("Sec"), &phi);
        let want = Formula::says(
            c("Bob"),
            c("Pub"),
            Formula::implies(
                Formula::says(c("Cathy"), c("Sec"), r("Alice")),
                c("Pub"),
                r("Bob"),
            ),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn simulate_lifts_implication_rules() {
        let s = sig();
        // ImpR: ⊢ (R(Alice) →[Pub] R(Alice)) @ ⟨Pub⟩ from an axiom.
        let hyp = Belief::new(r("Alice"), gpub());
        let inner = ax(Sequent::new(vec![hyp.clone()], hyp.clone()), 0);
        let imp = Formula::implies(r("Alice"), c("Pub"), r("Alice"));
        let p = Proof::new(
            Sequent::new(vec![], Belief::new(imp.clone(), gpub())),
            RuleSpec::ImpR,
            vec![inner],
        );
        assert!(check_proof(&s, &p).is_valid());
        let out = simulate(&s, &p, &c("Cathy"), &c("Sec")).expect("simulates");
        assert_eq!(out.conclusion, simulate_sequent(&c("Cathy"), &c("Sec"), &p.conclusion));
        let report = check_proof(&s, &out);
        assert!(report.is_valid());
        assert_eq!(report.stats.rules.get("SaysL"), Some(&1));

        // ImpL: [R(Alice), R(Alice)→[Pub]R(Bob)] ⊢ R(Bob).
        let ctx = vec![
            Belief::new(r("Alice"), gpub()),
            Belief::new(Formula::implies(r("Alice"), c("Pub"), r("Bob")), gpub()),
        ];
        let test = ax(
            Sequent::new(vec![ctx[0].clone()], Belief::new(r("Alice"), gpub())),
            0,
        );
        let main = ax(
            Sequent::new(
                vec![ctx[0].clone(), Belief::new(r("Bob"), gpub())],
                Belief::new(r("Bob"), gpub()),
            ),
            1,
        );
        let p2 = Proof::new(
            Sequent::new(ctx, Belief::new(r("Bob"), gpub())),
            RuleSpec::ImpL { i: 1 },
            vec![test, main],
        );
        assert!(check_proof(&s, &p2).is_valid());
        let out2 = simulate(&s, &p2, &c("Cathy"), &c("Sec")).expect("simulates");
        assert_eq!(out2.conclusion, simulate_sequent(&c("Cathy"), &c("Sec"), &p2.conclusion));
        let rep2 = check_proof(&s, &out2);
        assert!(rep2.is_valid());
        assert_eq!(rep2.stats.rules.get("SaysR"), Some(&1));
    }

    #[test]
    fn cut_axiom_against_axiom() {
        let s = sig();
        let b = Belief::new(r("Alice"), gpub());
        let p1 = ax(Sequent::new(vec![b.clone()], b.clone()), 0);
        let p2 = ax(Sequent::new(vec![b.clone(), b.clone()], b.clone()), 0);
        let out = eliminate_cut(&s, &p1, &p2, 1).expect("eliminates");
        assert_eq!(out.conclusion, Sequent::new(vec![b.clone()], b));
        assert!(check_proof(&s, &out).is_valid());
    }

    #[test]
    fn cut_reduces_a_conjunction_principal_pair() {
        let s = sig();
        let ba = Belief::new(r("Alice"), gpub());
        let bb = Belief::new(r("Bob"), gpub());
        let conj = Belief::new(Formula::and(r("Alice"), r("Bob")), gpub());
        let base = vec![ba.clone(), bb.clone()];
        let p1 = Proof::new(
            Sequent::new(base.clone(), conj.clone()),
            RuleSpec::AndR,
            vec![
                ax(Sequent::new(base.clone(), ba.clone()), 0),
                ax(Sequent::new(base.clone(), bb.clone()), 1),
            ],
        );
        assert!(check_proof(&s, &p1).is_valid());
        let mut ctx2 = base.clone();
        ctx2.push(conj.clone());
        let split = vec![ba.clone(), bb.clone(), ba.clone(), bb.clone()];
        let p2 = Proof::new(
            Sequent::new(ctx2, ba.clone()),
            RuleSpec::AndL { i: 2 },
            vec![ax(Sequent::new(split, ba.clone()), 2)],
        );
        assert!(check_proof(&s, &p2).is_valid());
        let out = eliminate_cut(&s, &p1, &p2, 2).expect("eliminates");
        assert_eq!(out.conclusion, Sequent::new(base, ba));
        assert!(check_proof(&s, &out).is_valid());
    }

    #[test]
    fn cut_through_an_implication() {
        let s = sig();
        let ba = Belief::new(r("Alice"), gpub());
        let imp = Belief::new(Formula::implies(r("Alice"), c("Pub"), r("Alice")), gpub());
        // p1: [R(Alice)] ⊢ R(Alice)→R(Alice) by ImpR.
        let inner = ax(Sequent::new(vec![ba.clone(), ba.clone()], ba.clone()), 0);
        let p1 = Proof::new(
            Sequent::new(vec![ba.clone()], imp.clone()),
            RuleSpec::ImpR,
            vec![inner],
        );
        assert!(check_proof(&s, &p1).is_valid());
        // p2: [R(Alice), imp] ⊢ R(Alice) by ImpL.
        let hyp_gp = Belief::new(r("Alice"), GenPrincipal::ground_only(c("Pub")));
        let test = ax(Sequent::new(vec![ba.clone()], hyp_gp), 0);
        let main = ax(Sequent::new(vec![ba.clone(), ba.clone()], ba.clone()), 1);
        let p2 = Proof::new(
            Sequent::new(vec![ba.clone(), imp.clone()], ba.clone()),
            RuleSpec::ImpL { i: 1 },
            vec![test, main],
        );
        assert!(check_proof(&s, &p2).is_valid());
        let out = eliminate_cut(&s, &p1, &p2, 1).expect("eliminates");
        assert_eq!(out.conclusion, Sequent::new(vec![ba.clone()], ba));
        assert!(check_proof(&s, &out).is_valid());
    }

    #[test]
    fn cut_fuel_exhaustion_is_reported() {
        let s = sig();
        let ba = Belief::new(r("Alice"), gpub());
        let bb = Belief::new(r("Bob"), gpub());
        let conj = Belief::new(Formula::and(r("Alice"), r("Bob")), gpub());
        let base = vec![ba.clone(), bb.clone()];
        let p1 = Proof::new(
            Sequent::new(base.clone(), conj.clone()),
            RuleSpec::AndR,
            vec![
                ax(Sequent::new(base.clone(), ba.clone()), 0),
                ax(Sequent::new(base.clone(), bb.clone()), 1),
            ],
        );
        let mut ctx2 = base.clone();
        ctx2.push(conj.clone());
        let split = vec![ba.clone(), bb.clone(), ba.clone(), bb.clone()];
        let p2 = Proof::new(
            Sequent::new(ctx2, ba.clone()),
            RuleSpec::AndL { i: 2 },
            vec![ax(Sequent::new(split, ba.clone()), 2)],
        );
        match eliminate_cut_with_fuel(&s, &p1, &p2, 2, 1) {
            Err(TransformError::FuelExhausted(1)) => {}
            other => panic!("expected fuel exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn cut_rejects_mismatched_contexts() {
        let s = sig();
        let ba = Belief::new(r("Alice"), gpub());
        let bb = Belief::new(r("Bob"), gpub());
        let p1 = ax(Sequent::new(vec![bb.clone()], bb.clone()), 0);
        let p2 = ax(Sequent::new(vec![ba.clone(), ba.clone()], ba), 0);
        match eliminate_cut(&s, &p1, &p2, 1) {
            Err(TransformError::ContextMismatch(_)) => {}
            other => panic!("expected a context mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unsays_r_peels_a_says_introduction() {
        let s = sig();
        let inner_gp = gpub().push(c("Bob"), c("Sec"));
        let body = Belief::new(r("Alice"), inner_gp.clone());
        let ctx = vec![body.clone()];
        let inner = ax(Sequent::new(ctx.clone(), body.clone()), 0);
        let says = Belief::new(Formula::says(c("Bob"), c("Sec"), r("Alice")), gpub());
        let p = Proof::new(Sequent::new(ctx.clone(), says), RuleSpec::SaysR, vec![inner]);
        assert!(check_proof(&s, &p).is_valid());
        let out = unsays_r(&s, &p).expect("unsays");
        assert_eq!(out.conclusion, Sequent::new(ctx, body));
        assert!(check_proof(&s, &out).is_valid());
    }

    #[test]
    fn sf_eliminate_handles_refl_and_variance() {
        let (s, p) = {
            // reuse the variance fixture context, but keep the proof in
            // second normal form: goal R(Alice)@⟨Pub⟩·(Bob,Pub) by axiom.
            let s = sig();
            let g_low = gpub().push(c("Bob"), c("Pub"));
            let g_high = gpub().push(c("Bob"), c("Sec"));
            let ctx = vec![
                Belief::new(r("Alice"), g_low.clone()),
                Belief::new(Formula::flows(c("Pub"), c("Sec")), g_high),
            ];
            let p = ax(Sequent::new(ctx, Belief::new(r("Alice"), g_low)), 0);
            (s, p)
        };
        let g1 = p.conclusion.goal.gp.clone();
        let refl = SFDerivation {
            judgment: SFJudgment {
                context: p.conclusion.context.clone(),
                g1: g1.clone(),
                g2: g1.clone(),
            },
            rule: SFRule::ReflSF,
        };
        let same = sf_eliminate(&s, &p, &refl).expect("refl elimination");
        assert_eq!(same, p);

        let g2 = gpub().push(c("Bob"), c("Sec"));
        let side = ax(
            Sequent::new(
                p.conclusion.context.clone(),
                Belief::new(Formula::flows(c("Pub"), c("Sec")), g2.clone()),
            ),
            1,
        );
        let var = SFDerivation {
            judgment: SFJudgment {
                context: p.conclusion.context.clone(),
                g1,
                g2: g2.clone(),
            },
            rule: SFRule::VarSF(side),
        };
        assert!(crate::trust::check_sf(&s, &var).is_valid());
        let moved = sf_eliminate(&s, &p, &var).expect("variance elimination");
        assert_eq!(moved.conclusion.goal.gp, g2);
        assert_eq!(moved.conclusion.goal.formula, r("Alice"));
        assert!(check_proof(&s, &moved).is_valid());
    }

    #[test]
    fn extract_disjunct_reads_the_introduced_branch() {
        let (s, p) = var_over_or();
        let (idx, sub) = extract_disjunct(&s, &p).expect("extracts");
        assert_eq!(idx, 1);
        assert_eq!(sub.conclusion.goal.formula, r("Alice"));
        assert!(check_proof(&s, &sub).is_valid());
    }

    #[test]
    fn strengthen_removes_an_unused_belief() {
        let s = sig();
        let ba = Belief::new(r("Alice"), gpub());
        let bb = Belief::new(r("Bob"), gpub());
        let p = ax(Sequent::new(vec![ba.clone(), bb.clone()], ba.clone()), 0);
        let out = try_strengthen(&s, &p, 1).expect("strengthens");
        assert_eq!(out.conclusion, Sequent::new(vec![ba.clone()], ba.clone()));
        assert!(try_strengthen(&s, &p, 0).is_none());

        let widened = retarget_context(&s, &out, &vec![bb.clone(), ba.clone()])
            .expect("retargets");
        assert_eq!(widened.conclusion.context, vec![bb, ba]);
        assert!(check_proof(&s, &widened).is_valid());
    }
}
