//! Trust relations between generalized principals: speaks-for,
//! can-influence, and the principal-set operator behind them.
//!
//! Speaks-for (`SF`) captures every safe belief-transfer pathway between
//! generalized principals: variance along a label flow, forwarding between
//! principals, introspection (duplicating or collapsing a self pair),
//! extension by a common pair, reflexivity, and transitivity. A derivation
//! carries its own kernel side proofs (a flows-to proof for variance,
//! read/write permission proofs for forwarding), so [`check_sf`] never
//! searches; it only validates shapes and re-checks the embedded proofs.
//!
//! Can-influence (`CanInfl`) extends speaks-for with the implicit trust
//! created by implications: an implication belief lets beliefs of any
//! principal mentioned by its premise (at the implication's label) influence
//! beliefs of any principal mentioned by its consequent. "Mentioned by" is
//! computed by [`g_set`], which pushes says modalities into the principal,
//! unions across conjunction and disjunction, projects implications to their
//! consequents, and descends under quantifiers by introducing a *generic
//! variable* (a pattern variable standing for every term of the bound sort).
//! Membership of a concrete principal in such a set is one-way matching with
//! sort-correct instantiation of the generic variables.
//!
//! [`search_sf`] performs bounded search for a speaks-for derivation,
//! discharging side conditions with the proof-search oracle at a
//! caller-supplied depth. [`sf_closure`] / [`ci_closure`] compute all
//! derivable edges over a finite universe of generalized principals, which
//! the test suite compares against an independent fixpoint.

use std::collections::{BTreeMap, BTreeSet};

use crate::formula::Formula;
use crate::kernel::{check_proof, CheckReason, CheckReport, Proof, ProofStats, Verdict};
use crate::matching::{apply_bindings_gp, match_gp, Bindings};
use crate::search::{bounded_prove, SearchConfig, SearchOutcome};
use crate::sequent::{Belief, Context, GenPrincipal, Sequent};
use crate::signature::{Signature, Sort, CANREAD, CANWRITE, FLOWS};
use crate::term::{sort_check_expect, Term};

// ---------------------------------------------------------------------------
// Generalized-principal sets
// ---------------------------------------------------------------------------

/// One member pattern of a [`GPSet`], with the generic variables (name and
/// sort) introduced by quantifier descent that occur in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GPPattern {
    pub gp: GenPrincipal,
    pub generics: BTreeMap<String, Sort>,
}

impl GPPattern {
    /// Does `g` instantiate this pattern? Returns the witnessing bindings
    /// for the generic variables, sort-checked against their declared sorts.
    pub fn matches(&self, sig: &Signature, g: &GenPrincipal) -> Option<Bindings> {
        let vars: Vec<String> = self.generics.keys().cloned().collect();
        let mut binds = Bindings::new();
        if !match_gp(&self.gp, g, &vars, &mut binds) {
            return None;
        }
        for (name, value) in &binds {
            let sort = self.generics.get(name)?;
            sort_check_expect(sig, &mut BTreeMap::new(), value, sort).ok()?;
        }
        Some(binds)
    }

    /// Validate a claimed instantiation: applying `witness` (restricted to
    /// this pattern's generics) must produce exactly `g`.
    pub fn matches_with(&self, sig: &Signature, g: &GenPrincipal, witness: &Bindings) -> bool {
        let mut restricted = Bindings::new();
        for (name, sort) in &self.generics {
            if let Some(value) = witness.get(name) {
                if sort_check_expect(sig, &mut BTreeMap::new(), value, sort).is_err() {
                    return false;
                }
                restricted.insert(name.clone(), value.clone());
            }
        }
        apply_bindings_gp(&self.gp, &restricted) == *g
    }
}

impl std::fmt::Display for GPPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.gp)
    }
}

/// A finite set of generalized-principal patterns; see [`g_set`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GPSet {
    pub patterns: Vec<GPPattern>,
}

impl GPSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// First pattern that `g` instantiates, with its witnessing bindings.
    pub fn member(&self, sig: &Signature, g: &GenPrincipal) -> Option<(usize, Bindings)> {
        self.patterns
            .iter()
            .enumerate()
            .find_map(|(i, p)| p.matches(sig, g).map(|b| (i, b)))
    }

    /// Validate a claimed membership against explicit term witnesses.
    pub fn member_with(&self, sig: &Signature, g: &GenPrincipal, witness: &Bindings) -> bool {
        self.patterns.iter().any(|p| p.matches_with(sig, g, witness))
    }
}

impl std::fmt::Display for GPSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// The set of generalized principals referenced by the belief `phi @ g`.
///
/// Case analysis on `phi`:
/// - `p says[l] body` descends into `body` at `g.[p:l]`;
/// - conjunction and disjunction take the union of both sides;
/// - an implication contributes only its consequent's principals;
/// - quantifiers descend with a fresh generic variable of the bound sort
///   standing for every term of that sort (membership is by matching);
/// - anything else contributes `{g}`.
pub fn g_set(phi: &Formula, g: &GenPrincipal) -> GPSet {
    fn go(
        phi: &Formula,
        g: GenPrincipal,
        scope: &mut Vec<(String, Sort)>,
        counter: &mut usize,
        out: &mut Vec<GPPattern>,
    ) {
        match phi {
            Formula::Says(p, l, body) => {
                let inner = g.push(p.clone(), l.clone());
                go(body, inner, scope, counter, out);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                go(a, g.clone(), scope, counter, out);
                go(b, g, scope, counter, out);
            }
            Formula::Implies(_, _, b) => go(b, g, scope, counter, out),
            Formula::Forall(binder, body) | Formula::Exists(binder, body) => {
                let name = format!("?g{counter}");
                *counter += 1;
                let var = Term::var(&name, binder.sort.clone());
                scope.push((name, binder.sort.clone()));
                go(&body.open(&var), g, scope, counter, out);
                scope.pop();
            }
            _ => {
                let mut fv = BTreeSet::new();
                g.free_vars(&mut fv);
                let generics: BTreeMap<String, Sort> = scope
                    .iter()
                    .filter(|(n, s)| fv.contains(&(n.clone(), s.clone())))
                    .cloned()
                    .collect();
                let pat = GPPattern { gp: g, generics };
                if !out.contains(&pat) {
                    out.push(pat);
                }
            }
        }
    }
    let mut out = Vec::new();
    go(phi, g.clone(), &mut Vec::new(), &mut 0, &mut out);
    GPSet { patterns: out }
}

// ---------------------------------------------------------------------------
// Speaks-for derivations
// ---------------------------------------------------------------------------

/// A claimed judgment `Γ ⊢ g1 SF g2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SFJudgment {
    pub context: Context,
    pub g1: GenPrincipal,
    pub g2: GenPrincipal,
}

impl SFJudgment {
    pub fn new(context: Context, g1: GenPrincipal, g2: GenPrincipal) -> SFJudgment {
        SFJudgment { context, g1, g2 }
    }
}

impl std::fmt::Display for SFJudgment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} SF {}", self.g1, self.g2)
    }
}

/// One speaks-for derivation node; the rule names follow the trust calculus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SFRule {
    /// `g SF g`.
    ReflSF,
    /// From `g1 SF g2` conclude `g1.[p:l] SF g2.[p:l]`.
    ExtSF(Box<SFDerivation>),
    /// `g.[p:l] SF g.[p:l].[p:l]`.
    SelfLSF,
    /// `g.[p:l].[p:l] SF g.[p:l]`.
    SelfRSF,
    /// `g.[p:l] SF g.[p:l2]` given a proof of `flows(l, l2) @ g.[p:l2]`.
    VarSF(Proof),
    /// `g.[p:l] SF g.[q:l]` given proofs of `canread(q, l) @ g.[p:l]` and
    /// `canwrite(p, l) @ g.[q:l]`.
    FwdSF(Proof, Proof),
    /// Transitivity.
    TransSF(Box<SFDerivation>, Box<SFDerivation>),
}

impl SFRule {
    pub fn name(&self) -> &'static str {
        match self {
            SFRule::ReflSF => "ReflSF",
            SFRule::ExtSF(_) => "ExtSF",
            SFRule::SelfLSF => "SelfLSF",
            SFRule::SelfRSF => "SelfRSF",
            SFRule::VarSF(_) => "VarSF",
            SFRule::FwdSF(_, _) => "FwdSF",
            SFRule::TransSF(_, _) => "TransSF",
        }
    }
}

/// A speaks-for derivation tree; every node stores its claimed judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SFDerivation {
    pub judgment: SFJudgment,
    pub rule: SFRule,
}

impl SFDerivation {
    pub fn refl(context: Context, g: GenPrincipal) -> SFDerivation {
        SFDerivation {
            judgment: SFJudgment::new(context, g.clone(), g),
            rule: SFRule::ReflSF,
        }
    }

    fn sub_derivations(&self) -> Vec<&SFDerivation> {
        match &self.rule {
            SFRule::ExtSF(c) => vec![c],
            SFRule::TransSF(a, b) => vec![a, b],
            _ => vec![],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .sub_derivations()
            .iter()
            .map(|d| d.node_count())
            .sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .sub_derivations()
            .iter()
            .map(|d| d.depth())
            .max()
            .unwrap_or(0)
    }
}

fn gp_last(g: &GenPrincipal) -> Option<&(Term, Term)> {
    g.stack.last()
}

fn gp_pop(g: &GenPrincipal) -> GenPrincipal {
    let mut g = g.clone();
    g.stack.pop();
    g
}

fn wf_reason(sig: &Signature, ctx: &Context, gps: &[&GenPrincipal]) -> Option<CheckReason> {
    for b in ctx {
        let seq = Sequent::new(vec![], b.clone());
        if let Err(e) = crate::sequent::check_sequent_wf(sig, &seq) {
            return Some(CheckReason::SortError(e.to_string()));
        }
    }
    for g in gps {
        if let Err(e) = g.sort_check(sig, &mut BTreeMap::new()) {
            return Some(CheckReason::SortError(e.to_string()));
        }
    }
    None
}

/// Check a single speaks-for node's schema, including its embedded kernel
/// side proofs (which must conclude exactly the required side sequents).
fn check_sf_node(sig: &Signature, d: &SFDerivation) -> Result<(), CheckReason> {
    let j = &d.judgment;
    let mismatch = |msg: String| Err(CheckReason::RuleMismatch(msg));
    match &d.rule {
        SFRule::ReflSF => {
            if j.g1 != j.g2 {
                return mismatch(format!("ReflSF: {} differs from {}", j.g1, j.g2));
            }
            Ok(())
        }
        SFRule::ExtSF(c) => {
            let (Some(p1), Some(p2)) = (gp_last(&j.g1), gp_last(&j.g2)) else {
                return mismatch("ExtSF: both principals need a nonempty stack".into());
            };
            if p1 != p2 {
                return mismatch("ExtSF: the extension pairs differ".into());
            }
            if c.judgment.context != j.context {
                return mismatch("ExtSF: premise context differs".into());
            }
            if c.judgment.g1 != gp_pop(&j.g1) || c.judgment.g2 != gp_pop(&j.g2) {
                return mismatch("ExtSF: premise principals are not the popped forms".into());
            }
            Ok(())
        }
        SFRule::SelfLSF => {
            if gp_last(&j.g1).is_none() {
                return mismatch("SelfLSF: left principal needs a nonempty stack".into());
            }
            let dup = j.g1.push(
                j.g1.stack.last().unwrap().0.clone(),
                j.g1.stack.last().unwrap().1.clone(),
            );
            if j.g2 != dup {
                return mismatch(format!(
                    "SelfLSF: expected right principal {} but found {}",
                    dup, j.g2
                ));
            }
            Ok(())
        }
        SFRule::SelfRSF => {
            if gp_last(&j.g2).is_none() {
                return mismatch("SelfRSF: right principal needs a nonempty stack".into());
            }
            let dup = j.g2.push(
                j.g2.stack.last().unwrap().0.clone(),
                j.g2.stack.last().unwrap().1.clone(),
            );
            if j.g1 != dup {
                return mismatch(format!(
                    "SelfRSF: expected left principal {} but found {}",
                    dup, j.g1
                ));
            }
            Ok(())
        }
        SFRule::VarSF(side) => {
            let (Some((p1, l1)), Some((p2, l2))) = (gp_last(&j.g1), gp_last(&j.g2)) else {
                return mismatch("VarSF: both principals need a nonempty stack".into());
            };
            if gp_pop(&j.g1) != gp_pop(&j.g2) || p1 != p2 {
                return mismatch(
                    "VarSF: principals must differ only in the final label".into(),
                );
            }
            let want = Sequent::new(
                j.context.clone(),
                Belief::new(
                    Formula::rel(FLOWS, vec![l1.clone(), l2.clone()]),
                    j.g2.clone(),
                ),
            );
            if side.conclusion != want {
                return mismatch(format!(
                    "VarSF: side proof concludes {} but must conclude {}",
                    side.conclusion, want
                ));
            }
            match check_proof(sig, side).verdict {
                Verdict::Valid => Ok(()),
                Verdict::Invalid { reason, .. } => Err(reason),
            }
        }
        SFRule::FwdSF(read, write) => {
            let (Some((p, l1)), Some((q, l2))) = (gp_last(&j.g1), gp_last(&j.g2)) else {
                return mismatch("FwdSF: both principals need a nonempty stack".into());
            };
            if gp_pop(&j.g1) != gp_pop(&j.g2) || l1 != l2 {
                return mismatch(
                    "FwdSF: principals must differ only in the final principal".into(),
                );
            }
            let want_read = Sequent::new(
                j.context.clone(),
                Belief::new(
                    Formula::rel(CANREAD, vec![q.clone(), l1.clone()]),
                    j.g1.clone(),
                ),
            );
            let want_write = Sequent::new(
                j.context.clone(),
                Belief::new(
                    Formula::rel(CANWRITE, vec![p.clone(), l1.clone()]),
                    j.g2.clone(),
                ),
            );
            if read.conclusion != want_read {
                return mismatch(format!(
                    "FwdSF: read proof concludes {} but must conclude {}",
                    read.conclusion, want_read
                ));
            }
            if write.conclusion != want_write {
                return mismatch(format!(
                    "FwdSF: write proof concludes {} but must conclude {}",
                    write.conclusion, want_write
                ));
            }
            if let Verdict::Invalid { reason, .. } = check_proof(sig, read).verdict {
                return Err(reason);
            }
            if let Verdict::Invalid { reason, .. } = check_proof(sig, write).verdict {
                return Err(reason);
            }
            Ok(())
        }
        SFRule::TransSF(a, b) => {
            if a.judgment.context != j.context || b.judgment.context != j.context {
                return mismatch("TransSF: premise contexts differ".into());
            }
            if a.judgment.g1 != j.g1 {
                return mismatch("TransSF: first premise starts elsewhere".into());
            }
            if a.judgment.g2 != b.judgment.g1 {
                return mismatch("TransSF: premises do not meet in the middle".into());
            }
            if b.judgment.g2 != j.g2 {
                return mismatch("TransSF: second premise ends elsewhere".into());
            }
            Ok(())
        }
    }
}

/// Check a speaks-for derivation: well-sortedness at the root, then every
/// node's schema and side proofs, pre-order. Statistics are always computed.
pub fn check_sf(sig: &Signature, d: &SFDerivation) -> CheckReport {
    let mut stats = ProofStats::default();
    let mut verdict = Verdict::Valid;
    if let Some(reason) = wf_reason(sig, &d.judgment.context, &[&d.judgment.g1, &d.judgment.g2]) {
        verdict = Verdict::Invalid {
            path: vec![],
            reason,
        };
    }
    fn walk(
        sig: &Signature,
        d: &SFDerivation,
        path: &mut Vec<usize>,
        stats: &mut ProofStats,
        verdict: &mut Verdict,
    ) {
        stats.nodes += 1;
        *stats.rules.entry(d.rule.name().to_string()).or_insert(0) += 1;
        if matches!(verdict, Verdict::Valid) {
            if let Err(reason) = check_sf_node(sig, d) {
                *verdict = Verdict::Invalid {
                    path: path.clone(),
                    reason,
                };
            }
        }
        for (i, c) in d.sub_derivations().into_iter().enumerate() {
            path.push(i);
            walk(sig, c, path, stats, verdict);
            path.pop();
        }
    }
    walk(sig, d, &mut Vec::new(), &mut stats, &mut verdict);
    stats.depth = d.depth();
    CheckReport { verdict, stats }
}

// ---------------------------------------------------------------------------
// Can-influence derivations
// ---------------------------------------------------------------------------

/// A claimed judgment `Γ ⊢ g1 CanInfl g2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CIJudgment {
    pub context: Context,
    pub g1: GenPrincipal,
    pub g2: GenPrincipal,
}

impl CIJudgment {
    pub fn new(context: Context, g1: GenPrincipal, g2: GenPrincipal) -> CIJudgment {
        CIJudgment { context, g1, g2 }
    }
}

impl std::fmt::Display for CIJudgment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} CanInfl {}", self.g1, self.g2)
    }
}

/// One can-influence derivation node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CIRule {
    /// Speaks-for implies can-influence.
    SfCi(SFDerivation),
    /// From `g1 CanInfl g2` conclude `g1.g' CanInfl g2.g'` for a common
    /// (possibly multi-pair) extension `g'`.
    ExtCI(Box<CIDerivation>),
    /// Transitivity.
    TransCI(Box<CIDerivation>, Box<CIDerivation>),
    /// An implication belief `phi ->[l] psi @ g` at `index` in the context
    /// lets any `g1` in `g_set(phi @ <l>)` influence any `g2` in
    /// `g_set(psi @ g)`. The bindings witness the two memberships.
    ImpCI {
        index: usize,
        g1_witness: Bindings,
        g2_witness: Bindings,
    },
}

impl CIRule {
    pub fn name(&self) -> &'static str {
        match self {
            CIRule::SfCi(_) => "SF-CI",
            CIRule::ExtCI(_) => "ExtCI",
            CIRule::TransCI(_, _) => "TransCI",
            CIRule::ImpCI { .. } => "ImpCI",
        }
    }
}

/// A can-influence derivation tree; every node stores its claimed judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CIDerivation {
    pub judgment: CIJudgment,
    pub rule: CIRule,
}

impl CIDerivation {
    /// Wrap a speaks-for derivation as a can-influence derivation.
    pub fn from_sf(sf: SFDerivation) -> CIDerivation {
        CIDerivation {
            judgment: CIJudgment::new(
                sf.judgment.context.clone(),
                sf.judgment.g1.clone(),
                sf.judgment.g2.clone(),
            ),
            rule: CIRule::SfCi(sf),
        }
    }

    fn sub_derivations(&self) -> Vec<&CIDerivation> {
        match &self.rule {
            CIRule::ExtCI(c) => vec![c],
            CIRule::TransCI(a, b) => vec![a, b],
            _ => vec![],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .sub_derivations()
            .iter()
            .map(|d| d.node_count())
            .sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .sub_derivations()
            .iter()
            .map(|d| d.depth())
            .max()
            .unwrap_or(0)
    }

    /// Every rule name used anywhere in the derivation (including inside
    /// embedded speaks-for trees), with counts.
    pub fn rule_histogram(&self) -> BTreeMap<String, usize> {
        fn sf_walk(d: &SFDerivation, out: &mut BTreeMap<String, usize>) {
            *out.entry(d.rule.name().to_string()).or_insert(0) += 1;
            for c in d.sub_derivations() {
                sf_walk(c, out);
            }
        }
        fn ci_walk(d: &CIDerivation, out: &mut BTreeMap<String, usize>) {
            *out.entry(d.rule.name().to_string()).or_insert(0) += 1;
            if let CIRule::SfCi(sf) = &d.rule {
                sf_walk(sf, out);
            }
            for c in d.sub_derivations() {
                ci_walk(c, out);
            }
        }
        let mut out = BTreeMap::new();
        ci_walk(self, &mut out);
        out
    }
}

fn check_ci_node(sig: &Signature, d: &CIDerivation) -> Result<(), CheckReason> {
    let j = &d.judgment;
    let mismatch = |msg: String| Err(CheckReason::RuleMismatch(msg));
    match &d.rule {
        CIRule::SfCi(sf) => {
            if sf.judgment.context != j.context
                || sf.judgment.g1 != j.g1
                || sf.judgment.g2 != j.g2
            {
                return mismatch("SF-CI: embedded judgment differs".into());
            }
            match check_sf(sig, sf).verdict {
                Verdict::Valid => Ok(()),
                Verdict::Invalid { reason, .. } => Err(reason),
            }
        }
        CIRule::ExtCI(c) => {
            if c.judgment.context != j.context {
                return mismatch("ExtCI: premise context differs".into());
            }
            let n1 = c.judgment.g1.stack.len();
            let n2 = c.judgment.g2.stack.len();
            if !c.judgment.g1.is_prefix_of(&j.g1) || !c.judgment.g2.is_prefix_of(&j.g2) {
                return mismatch("ExtCI: premise principals are not prefixes".into());
            }
            if j.g1.stack[n1..] != j.g2.stack[n2..] {
                return mismatch("ExtCI: the two extensions differ".into());
            }
            Ok(())
        }
        CIRule::TransCI(a, b) => {
            if a.judgment.context != j.context || b.judgment.context != j.context {
                return mismatch("TransCI: premise contexts differ".into());
            }
            if a.judgment.g1 != j.g1 {
                return mismatch("TransCI: first premise starts elsewhere".into());
            }
            if a.judgment.g2 != b.judgment.g1 {
                return mismatch("TransCI: premises do not meet in the middle".into());
            }
            if b.judgment.g2 != j.g2 {
                return mismatch("TransCI: second premise ends elsewhere".into());
            }
            Ok(())
        }
        CIRule::ImpCI {
            index,
            g1_witness,
            g2_witness,
        } => {
            let Some(b) = j.context.get(*index) else {
                return Err(CheckReason::AddressOutOfRange(format!(
                    "ImpCI: context index {index} out of range (context has {} beliefs)",
                    j.context.len()
                )));
            };
            let Formula::Implies(prem, label, cons) = &b.formula else {
                return mismatch(format!(
                    "ImpCI: belief {index} is not an implication: {}",
                    b.formula
                ));
            };
            let gs1 = g_set(prem, &GenPrincipal::ground_only(label.clone()));
            let gs2 = g_set(cons, &b.gp);
            if !gs1.member_with(sig, &j.g1, g1_witness) {
                return mismatch(format!(
                    "ImpCI: {} is not in the premise principal set {}",
                    j.g1, gs1
                ));
            }
            if !gs2.member_with(sig, &j.g2, g2_witness) {
                return mismatch(format!(
                    "ImpCI: {} is not in the consequent principal set {}",
                    j.g2, gs2
                ));
            }
            Ok(())
        }
    }
}

/// Check a can-influence derivation; embedded speaks-for derivations are
/// validated with [`check_sf`].
pub fn check_ci(sig: &Signature, d: &CIDerivation) -> CheckReport {
    let mut stats = ProofStats::default();
    let mut verdict = Verdict::Valid;
    if let Some(reason) = wf_reason(sig, &d.judgment.context, &[&d.judgment.g1, &d.judgment.g2]) {
        verdict = Verdict::Invalid {
            path: vec![],
            reason,
        };
    }
    fn walk(
        sig: &Signature,
        d: &CIDerivation,
        path: &mut Vec<usize>,
        stats: &mut ProofStats,
        verdict: &mut Verdict,
    ) {
        stats.nodes += 1;
        *stats.rules.entry(d.rule.name().to_string()).or_insert(0) += 1;
        if matches!(verdict, Verdict::Valid) {
            if let Err(reason) = check_ci_node(sig, d) {
                *verdict = Verdict::Invalid {
                    path: path.clone(),
                    reason,
                };
            }
        }
        for (i, c) in d.sub_derivations().into_iter().enumerate() {
            path.push(i);
            walk(sig, c, path, stats, verdict);
            path.pop();
        }
    }
    walk(sig, d, &mut Vec::new(), &mut stats, &mut verdict);
    stats.depth = d.depth();
    CheckReport { verdict, stats }
}

// ---------------------------------------------------------------------------
// Bounded speaks-for search
// ---------------------------------------------------------------------------

/// Candidate one-step moves from `g`, in canonical order. Side conditions
/// are discharged with the proof-search oracle at depth `oracle_depth`.
fn sf_one_steps(
    sig: &Signature,
    ctx: &Context,
    g: &GenPrincipal,
    target_len: usize,
    oracle_depth: usize,
) -> Vec<SFDerivation> {
    let mut out = Vec::new();
    let Some((p, l)) = gp_last(g).cloned() else {
        return out;
    };
    let base = gp_pop(g);
    // Introspection collapse.
    if g.stack.len() >= 2 && g.stack[g.stack.len() - 2] == (p.clone(), l.clone()) {
        out.push(SFDerivation {
            judgment: SFJudgment::new(ctx.clone(), g.clone(), base.clone()),
            rule: SFRule::SelfRSF,
        });
    }
    let oracle_cfg = SearchConfig::with_signature_constants(sig, oracle_depth);
    // Forwarding to another principal at the same label.
    for q in sig.constants_of(&Sort::principal()) {
        if q == p {
            continue;
        }
        let g2 = base.push(q.clone(), l.clone());
        let read_goal = Sequent::new(
            ctx.clone(),
            Belief::new(Formula::rel(CANREAD, vec![q.clone(), l.clone()]), g.clone()),
        );
        let write_goal = Sequent::new(
            ctx.clone(),
            Belief::new(Formula::rel(CANWRITE, vec![p.clone(), l.clone()]), g2.clone()),
        );
        let SearchOutcome::Found(read) = bounded_prove(sig, &read_goal, &oracle_cfg) else {
            continue;
        };
        let SearchOutcome::Found(write) = bounded_prove(sig, &write_goal, &oracle_cfg) else {
            continue;
        };
        out.push(SFDerivation {
            judgment: SFJudgment::new(ctx.clone(), g.clone(), g2),
            rule: SFRule::FwdSF(read, write),
        });
    }
    // Variance to another label for the same principal.
    for l2 in sig.constants_of(&Sort::label()) {
        if l2 == l {
            continue;
        }
        let g2 = base.push(p.clone(), l2.clone());
        let flow_goal = Sequent::new(
            ctx.clone(),
            Belief::new(Formula::rel(FLOWS, vec![l.clone(), l2.clone()]), g2.clone()),
        );
        let SearchOutcome::Found(side) = bounded_prove(sig, &flow_goal, &oracle_cfg) else {
            continue;
        };
        out.push(SFDerivation {
            judgment: SFJudgment::new(ctx.clone(), g.clone(), g2),
            rule: SFRule::VarSF(side),
        });
    }
    // Introspection duplication, guarded so the stack cannot grow without
    // bound during search.
    if g.stack.len() < target_len + 2 {
        out.push(SFDerivation {
            judgment: SFJudgment::new(ctx.clone(), g.clone(), g.push(p, l)),
            rule: SFRule::SelfLSF,
        });
    }
    out
}

fn search_sf_rec(
    sig: &Signature,
    ctx: &Context,
    g1: &GenPrincipal,
    g2: &GenPrincipal,
    depth: usize,
    oracle_depth: usize,
    seen: &mut BTreeSet<GenPrincipal>,
) -> Option<SFDerivation> {
    if g1 == g2 {
        return Some(SFDerivation::refl(ctx.clone(), g1.clone()));
    }
    if depth == 0 {
        return None;
    }
    // Peel a common final pair.
    if let (Some(a), Some(b)) = (gp_last(g1), gp_last(g2)) {
        if a == b {
            if let Some(inner) = search_sf_rec(
                sig,
                ctx,
                &gp_pop(g1),
                &gp_pop(g2),
                depth - 1,
                oracle_depth,
                seen,
            ) {
                return Some(SFDerivation {
                    judgment: SFJudgment::new(ctx.clone(), g1.clone(), g2.clone()),
                    rule: SFRule::ExtSF(Box::new(inner)),
                });
            }
        }
    }
    for step in sf_one_steps(sig, ctx, g1, g2.stack.len(), oracle_depth) {
        let next = step.judgment.g2.clone();
        if next == *g2 {
            return Some(step);
        }
        if !seen.insert(next.clone()) {
            continue;
        }
        let rest = search_sf_rec(sig, ctx, &next, g2, depth - 1, oracle_depth, seen);
        seen.remove(&next);
        if let Some(rest) = rest {
            return Some(SFDerivation {
                judgment: SFJudgment::new(ctx.clone(), g1.clone(), g2.clone()),
                rule: SFRule::TransSF(Box::new(step), Box::new(rest)),
            });
        }
    }
    None
}

/// Bounded search for a derivation of `Γ ⊢ g1 SF g2`. `depth` bounds both
/// the number of chained speaks-for steps and the proof-search depth used to
/// discharge side conditions. Any returned derivation passes [`check_sf`];
/// `None` is not a disproof.
pub fn search_sf(
    sig: &Signature,
    ctx: &Context,
    g1: &GenPrincipal,
    g2: &GenPrincipal,
    depth: usize,
) -> Option<SFDerivation> {
    let mut seen = BTreeSet::new();
    seen.insert(g1.clone());
    let found = search_sf_rec(sig, ctx, g1, g2, depth, depth, &mut seen)?;
    debug_assert!(check_sf(sig, &found).is_valid());
    Some(found)
}

// ---------------------------------------------------------------------------
// Closures over a finite universe
// ---------------------------------------------------------------------------

/// All derivable speaks-for edges between members of `gps`, as a map from
/// `(from, to)` index pairs to derivations. Edges are found by one-step
/// enumeration (side conditions discharged at `depth`) and then closed under
/// extension and transitivity within the universe.
pub fn sf_closure(
    sig: &Signature,
    ctx: &Context,
    gps: &[GenPrincipal],
    depth: usize,
) -> BTreeMap<(usize, usize), SFDerivation> {
    let index: BTreeMap<&GenPrincipal, usize> =
        gps.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut edges: BTreeMap<(usize, usize), SFDerivation> = BTreeMap::new();
    for (i, g) in gps.iter().enumerate() {
        edges.insert((i, i), SFDerivation::refl(ctx.clone(), g.clone()));
        for step in sf_one_steps(sig, ctx, g, g.stack.len(), depth) {
            if let Some(&j) = index.get(&step.judgment.g2) {
                edges.entry((i, j)).or_insert(step);
            }
        }
    }
    loop {
        let mut added: Vec<((usize, usize), SFDerivation)> = Vec::new();
        // Extension: an edge survives appending a common pair.
        for (&(i, j), d) in &edges {
            for (i2, gi2) in gps.iter().enumerate() {
                if gi2.stack.is_empty()
                    || !gps[i].is_prefix_of(gi2)
                    || gi2.stack.len() != gps[i].stack.len() + 1
                {
                    continue;
                }
                let pair = gi2.stack.last().unwrap().clone();
                let gj2 = gps[j].push(pair.0.clone(), pair.1.clone());
                if let Some(&j2) = index.get(&gj2) {
                    if !edges.contains_key(&(i2, j2)) {
                        added.push((
                            (i2, j2),
                            SFDerivation {
                                judgment: SFJudgment::new(
                                    ctx.clone(),
                                    gi2.clone(),
                                    gj2.clone(),
                                ),
                                rule: SFRule::ExtSF(Box::new(d.clone())),
                            },
                        ));
                    }
                }
            }
        }
        // Transitivity.
        let keys: Vec<(usize, usize)> = edges.keys().cloned().collect();
        for &(i, j) in &keys {
            for &(j2, k) in &keys {
                if j2 != j || edges.contains_key(&(i, k)) || i == k {
                    continue;
                }
                if added.iter().any(|(key, _)| *key == (i, k)) {
                    continue;
                }
                let a = edges[&(i, j)].clone();
                let b = edges[&(j, k)].clone();
                added.push((
                    (i, k),
                    SFDerivation {
                        judgment: SFJudgment::new(ctx.clone(), gps[i].clone(), gps[k].clone()),
                        rule: SFRule::TransSF(Box::new(a), Box::new(b)),
                    },
                ));
            }
        }
        if added.is_empty() {
            break;
        }
        for (k, v) in added {
            edges.entry(k).or_insert(v);
        }
    }
    edges
}

/// All derivable can-influence edges between members of `gps`: speaks-for
/// edges, implication edges, closed under extension and transitivity within
/// the universe.
pub fn ci_closure(
    sig: &Signature,
    ctx: &Context,
    gps: &[GenPrincipal],
    depth: usize,
) -> BTreeMap<(usize, usize), CIDerivation> {
    let index: BTreeMap<&GenPrincipal, usize> =
        gps.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut edges: BTreeMap<(usize, usize), CIDerivation> = BTreeMap::new();
    for ((i, j), sf) in sf_closure(sig, ctx, gps, depth) {
        edges.insert((i, j), CIDerivation::from_sf(sf));
    }
    for (bi, b) in ctx.iter().enumerate() {
        let Formula::Implies(prem, label, cons) = &b.formula else {
            continue;
        };
        let gs1 = g_set(prem, &GenPrincipal::ground_only(label.clone()));
        let gs2 = g_set(cons, &b.gp);
        for (i, gi) in gps.iter().enumerate() {
            let Some((_, w1)) = gs1.member(sig, gi) else {
                continue;
            };
            for (j, gj) in gps.iter().enumerate() {
                if edges.contains_key(&(i, j)) {
                    continue;
                }
                let Some((_, w2)) = gs2.member(sig, gj) else {
                    continue;
                };
                edges.insert(
                    (i, j),
                    CIDerivation {
                        judgment: CIJudgment::new(ctx.clone(), gi.clone(), gj.clone()),
                        rule: CIRule::ImpCI {
                            index: bi,
                            g1_witness: w1.clone(),
                            g2_witness: w2,
                        },
                    },
                );
            }
        }
    }
    loop {
        let mut added: Vec<((usize, usize), CIDerivation)> = Vec::new();
        for (&(i, j), d) in &edges {
            for (i2, gi2) in gps.iter().enumerate() {
                if gi2.stack.is_empty()
                    || !gps[i].is_prefix_of(gi2)
                    || gi2.stack.len() != gps[i].stack.len() + 1
                {
                    continue;
                }
                let pair = gi2.stack.last().unwrap().clone();
                let gj2 = gps[j].push(pair.0.clone(), pair.1.clone());
                if let Some(&j2) = index.get(&gj2) {
                    if !edges.contains_key(&(i2, j2)) {
                        added.push((
                            (i2, j2),
                            CIDerivation {
                                judgment: CIJudgment::new(
                                    ctx.clone(),
                                    gi2.clone(),
                                    gj2.clone(),
                                ),
                                rule: CIRule::ExtCI(Box::new(d.clone())),
                            },
                        ));
                    }
                }
            }
        }
        let keys: Vec<(usize, usize)> = edges.keys().cloned().collect();
        for &(i, j) in &keys {
            for &(j2, k) in &keys {
                if j2 != j || edges.contains_key(&(i, k)) || i == k {
                    continue;
                }
                if added.iter().any(|(key, _)| *key == (i, k)) {
                    continue;
                }
                let a = edges[&(i, j)].clone();
                let b = edges[&(j, k)].clone();
                added.push((
                    (i, k),
                    CIDerivation {
                        judgment: CIJudgment::new(ctx.clone(), gps[i].clone(), gps[k].clone()),
                        rule: CIRule::TransCI(Box::new(a), Box::new(b)),
                    },
                ));
            }
        }
        if added.is_empty() {
            break;
        }
        for (k, v) in added {
            edges.entry(k).or_insert(v);
        }
    }
    edges
}

/// Bounded search for a can-influence derivation: computes the closure over
/// `universe` (plus the two endpoints) and reads off the edge.
pub fn search_ci(
    sig: &Signature,
    ctx: &Context,
    g1: &GenPrincipal,
    g2: &GenPrincipal,
    universe: &[GenPrincipal],
    depth: usize,
) -> Option<CIDerivation> {
    let mut gps: Vec<GenPrincipal> = universe.to_vec();
    if !gps.contains(g1) {
        gps.push(g1.clone());
    }
    if !gps.contains(g2) {
        gps.push(g2.clone());
    }
    let i = gps.iter().position(|g| g == g1)?;
    let j = gps.iter().position(|g| g == g2)?;
    let found = ci_closure(sig, ctx, &gps, depth).remove(&(i, j))?;
    debug_assert!(check_ci(sig, &found).is_valid());
    Some(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Binder;
    use crate::signature::{FuncDecl, RelDecl};

    fn sig() -> Signature {
        let mut s = Signature::new();
        for c in ["Pub", "Sec"] {
            s.add_func(FuncDecl {
                name: c.into(),
                args: vec![],
                result: Sort::label(),
            })
            .unwrap();
        }
        for c in ["Alice", "Bob"] {
            s.add_func(FuncDecl {
                name: c.into(),
                args: vec![],
                result: Sort::principal(),
            })
            .unwrap();
        }
        s.add_rel(RelDecl {
            name: "R".into(),
            args: vec![Sort::principal()],
        })
        .unwrap();
        s
    }

    fn lbl(n: &str) -> Term {
        Term::constant(n)
    }

    fn gp(l: &str) -> GenPrincipal {
        GenPrincipal::ground_only(lbl(l))
    }

    #[test]
    fn g_set_atomic_is_singleton() {
        let g = gp("Pub");
        let gs = g_set(&Formula::rel("R", vec![lbl("Alice")]), &g);
        assert_eq!(gs.len(), 1);
        assert_eq!(gs.patterns[0].gp, g);
        assert!(gs.patterns[0].generics.is_empty());
    }

    #[test]
    fn g_set_says_pushes_and_and_unions() {
        let g = gp("Pub");
        let says = Formula::says(
            lbl_p("Alice"),
            lbl("Sec"),
            Formula::rel("R", vec![lbl_p("Alice")]),
        );
        let gs = g_set(&says, &g);
        assert_eq!(gs.len(), 1);
        assert_eq!(gs.patterns[0].gp, g.push(lbl_p("Alice"), lbl("Sec")));

        let both = Formula::and(Formula::rel("R", vec![lbl_p("Alice")]), says);
        let gs2 = g_set(&both, &g);
        assert_eq!(gs2.len(), 2);
        assert_eq!(gs2.patterns[0].gp, g);
    }

    fn lbl_p(n: &str) -> Term {
        Term::constant(n)
    }

    #[test]
    fn g_set_implication_keeps_consequent_only() {
        let g = gp("Pub");
        let imp = Formula::implies(
            Formula::says(lbl_p("Bob"), lbl("Sec"), Formula::True),
            lbl("Pub"),
            Formula::rel("R", vec![lbl_p("Alice")]),
        );
        let gs = g_set(&imp, &g);
        assert_eq!(gs.len(), 1);
        assert_eq!(gs.patterns[0].gp, g);
    }

    #[test]
    fn g_set_quantifier_introduces_matching_generic() {
        let s = sig();
        let g = gp("Pub");
        // forall x : Principal. x says[Sec] R(x)
        let body = Formula::says(
            Term::Bound(0),
            lbl("Sec"),
            Formula::rel("R", vec![Term::Bound(0)]),
        );
        let all = Formula::Forall(Binder::new("x", Sort::principal()), Box::new(body));
        let gs = g_set(&all, &g);
        assert_eq!(gs.len(), 1);
        assert_eq!(gs.patterns[0].generics.len(), 1);
        let alice = g.push(lbl_p("Alice"), lbl("Sec"));
        let (_, binds) = gs.member(&s, &alice).expect("Alice instance matches");
        assert_eq!(binds.values().next().unwrap(), &lbl_p("Alice"));
        assert!(gs.member_with(&s, &alice, &binds));
        // A wrong label does not match.
        assert!(gs.member(&s, &g.push(lbl_p("Alice"), lbl("Pub"))).is_none());
    }

    #[test]
    fn g_set_size_bounded_by_and_or_leaves() {
        let g = gp("Pub");
        let r = Formula::rel("R", vec![lbl_p("Alice")]);
        let f = Formula::or(
            Formula::and(r.clone(), r.clone()),
            Formula::implies(r.clone(), lbl("Pub"), Formula::and(r.clone(), r.clone())),
        );
        fn leaves(f: &Formula) -> usize {
            match f {
                Formula::And(a, b) | Formula::Or(a, b) => leaves(a) + leaves(b),
                Formula::Implies(_, _, b) => leaves(b),
                Formula::Says(_, _, b) | Formula::Forall(_, b) | Formula::Exists(_, b) => {
                    leaves(b)
                }
                _ => 1,
            }
        }
        assert!(g_set(&f, &g).len() <= leaves(&f));
    }

    #[test]
    fn refl_sf_checks_valid() {
        let s = sig();
        let d = SFDerivation::refl(vec![], gp("Pub"));
        assert!(check_sf(&s, &d).is_valid());
    }

    #[test]
    fn self_rules_check_and_reject_swapped_sides() {
        let s = sig();
        let g1 = gp("Pub").push(lbl_p("Bob"), lbl("Sec"));
        let g2 = g1.push(lbl_p("Bob"), lbl("Sec"));
        let good = SFDerivation {
            judgment: SFJudgment::new(vec![], g1.clone(), g2.clone()),
            rule: SFRule::SelfLSF,
        };
        assert!(check_sf(&s, &good).is_valid());
        let swapped = SFDerivation {
            judgment: SFJudgment::new(vec![], g2, g1),
            rule: SFRule::SelfLSF,
        };
        assert!(!check_sf(&s, &swapped).is_valid());
    }

    #[test]
    fn search_finds_refl_at_depth_zero() {
        let s = sig();
        let g = gp("Pub").push(lbl_p("Alice"), lbl("Sec"));
        let d = search_sf(&s, &vec![], &g, &g, 0).expect("refl");
        assert!(matches!(d.rule, SFRule::ReflSF));
    }

    #[test]
    fn search_finds_variance_through_a_flows_axiom() {
        let s = sig();
        let g1 = gp("Pub").push(lbl_p("Alice"), lbl("Pub"));
        let g2 = gp("Pub").push(lbl_p("Alice"), lbl("Sec"));
        // The flows belief must be available at the variance target.
        let ctx = vec![Belief::new(
            Formula::rel(FLOWS, vec![lbl("Pub"), lbl("Sec")]),
            g2.clone(),
        )];
        let d = search_sf(&s, &ctx, &g1, &g2, 3).expect("variance edge");
        let report = check_sf(&s, &d);
        assert!(report.is_valid(), "{:?}", report.verdict);
        assert!(search_sf(&s, &vec![], &g1, &g2, 3).is_none());
    }

    #[test]
    fn sf_wrapped_as_ci_checks_valid() {
        let s = sig();
        let g = gp("Pub").push(lbl_p("Bob"), lbl("Sec"));
        let sf = SFDerivation {
            judgment: SFJudgment::new(vec![], g.clone(), g.push(lbl_p("Bob"), lbl("Sec"))),
            rule: SFRule::SelfLSF,
        };
        assert!(check_sf(&s, &sf).is_valid());
        let ci = CIDerivation::from_sf(sf);
        assert!(check_ci(&s, &ci).is_valid());
    }

    #[test]
    fn imp_ci_validates_memberships_and_rejects_bogus_ones() {
        let s = sig();
        let imp = Formula::implies(
            Formula::says(lbl_p("Alice"), lbl("Pub"), Formula::True),
            lbl("Pub"),
            Formula::says(lbl_p("Bob"), lbl("Sec"), Formula::True),
        );
        let ctx = vec![Belief::new(imp, gp("Pub"))];
        let g1 = gp("Pub").push(lbl_p("Alice"), lbl("Pub"));
        let g2 = gp("Pub").push(lbl_p("Bob"), lbl("Sec"));
        let good = CIDerivation {
            judgment: CIJudgment::new(ctx.clone(), g1.clone(), g2.clone()),
            rule: CIRule::ImpCI {
                index: 0,
                g1_witness: Bindings::new(),
                g2_witness: Bindings::new(),
            },
        };
        assert!(check_ci(&s, &good).is_valid());
        let bogus = CIDerivation {
            judgment: CIJudgment::new(ctx, g2, g1),
            rule: CIRule::ImpCI {
                index: 0,
                g1_witness: Bindings::new(),
                g2_witness: Bindings::new(),
            },
        };
        assert!(!check_ci(&s, &bogus).is_valid());
    }

    #[test]
    fn ci_closure_contains_imp_edge_and_its_extension() {
        let s = sig();
        let imp = Formula::implies(
            Formula::says(lbl_p("Alice"), lbl("Pub"), Formula::True),
            lbl("Pub"),
            Formula::says(lbl_p("Bob"), lbl("Sec"), Formula::True),
        );
        let ctx = vec![Belief::new(imp, gp("Pub"))];
        let g1 = gp("Pub").push(lbl_p("Alice"), lbl("Pub"));
        let g2 = gp("Pub").push(lbl_p("Bob"), lbl("Sec"));
        let ext = (lbl_p("Alice"), lbl("Sec"));
        let gps = vec![
            gp("Pub"),
            g1.clone(),
            g2.clone(),
            g1.push(ext.0.clone(), ext.1.clone()),
            g2.push(ext.0.clone(), ext.1.clone()),
        ];
        let edges = ci_closure(&s, &ctx, &gps, 2);
        assert!(edges.contains_key(&(1, 2)), "implication edge");
        let extended = edges.get(&(3, 4)).expect("extension of the edge");
        assert!(check_ci(&s, extended).is_valid());
        // No edge from the consequent back to the premise side.
        assert!(!edges.contains_key(&(2, 1)));
    }
}
