//! Bounded, goal-directed proof search over the kernel rules.
//!
//! [`bounded_prove`] runs iterative-deepening depth-first search. At each
//! sequent it enumerates candidate rule applications, asks the kernel's
//! `premises` function for the child sequents (so search and checking can
//! never disagree about a rule's meaning), and recurses. Every returned
//! proof therefore re-checks by construction.
//!
//! Key policies, all deterministic:
//! - Closing rules (`Ax`, `TrueR`, `FlowsToRefl`, `FalseL`) are tried first.
//! - Invertible rules (`ImpR`, `AndR`, `SaysR`, `ForallR`, `AndL`, `SaysL`,
//!   `ExistsL`) are applied eagerly without considering alternatives; this
//!   loses no provability and keeps the branching factor small.
//! - Non-invertible rules branch in a fixed canonical order.
//! - With the structural policy on, `ImpL`, `ForallL`, `VarL`, and `FwdL`
//!   keep their principal belief available by emitting an explicit
//!   `Contraction` node in front of the rule; with the policy off each left
//!   rule consumes its belief.
//! - `FalseL` closes whenever a `False` belief's principal is a prefix of
//!   the goal's principal, so its `g·g′` extension is never enumerated.
//! - Quantifier witnesses come from the configured term universe;
//!   eigenvariables come from a fresh-name pool.
//!
//! Failures are memoized per canonical sequent together with the largest
//! depth budget that failed, which keeps repeated states (common once
//! contraction is in play) from blowing up the search.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::formula::{fresh_name, Formula};
use crate::kernel::{check_proof, premises, Proof, RuleSpec};
use crate::sequent::{check_sequent_wf, Sequent};
use crate::signature::{Signature, Sort, CANREAD, CANWRITE, FLOWS};
use crate::term::Term;

/// Bounds and policies for [`bounded_prove`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Maximum number of rule applications along any root-to-leaf path.
    pub max_depth: usize,
    /// Ground terms available per sort, used for quantifier witnesses and
    /// for the label/principal parameters of the variance and forwarding
    /// rules.
    pub universe: BTreeMap<Sort, Vec<Term>>,
    /// When true, treat the context as a multiset: reusable left rules
    /// (`ImpL`, `ForallL`, `VarL`, `FwdL`) keep their principal belief via
    /// an explicit `Contraction`. When false, every left rule consumes.
    pub structural: bool,
    /// Optional wall-clock budget.
    pub timeout: Option<Duration>,
}

impl SearchConfig {
    /// A config with the given depth, an empty universe, structural rules
    /// on, and no timeout.
    pub fn new(max_depth: usize) -> Self {
        SearchConfig {
            max_depth,
            universe: BTreeMap::new(),
            structural: true,
            timeout: None,
        }
    }

    /// A config whose universe is every constant declared in `sig`,
    /// grouped by result sort.
    pub fn with_signature_constants(sig: &Signature, max_depth: usize) -> Self {
        let mut cfg = SearchConfig::new(max_depth);
        for sort in sig.sorts() {
            let consts = sig.constants_of(sort);
            if !consts.is_empty() {
                cfg.universe.insert(sort.clone(), consts);
            }
        }
        cfg
    }

    /// Terms available for a sort (empty slice when none).
    fn terms_of(&self, sort: &Sort) -> &[Term] {
        self.universe.get(sort).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Result of a bounded search.
#[derive(Debug, Clone)]
pub enum SearchOutcome {
    /// A proof was found; it checks valid with the requested end sequent.
    Found(Proof),
    /// No proof exists within the configured depth. Not a disproof.
    ExhaustedBounds,
    /// The wall-clock budget ran out first.
    TimedOut,
}

impl SearchOutcome {
    /// The proof, if one was found.
    pub fn proof(&self) -> Option<&Proof> {
        match self {
            SearchOutcome::Found(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found(_))
    }
}

/// Search for a proof of `s` within the bounds of `cfg`.
pub fn bounded_prove(sig: &Signature, s: &Sequent, cfg: &SearchConfig) -> SearchOutcome {
    if check_sequent_wf(sig, s).is_err() {
        return SearchOutcome::ExhaustedBounds;
    }
    let deadline = cfg.timeout.map(|t| Instant::now() + t);
    let mut searcher = Searcher {
        sig,
        cfg,
        failed: HashMap::new(),
        deadline,
        tick: 0,
        timed_out: false,
    };
    // Iterative deepening: smallest-depth proofs are preferred and the
    // returned proof is deterministic for a fixed config.
    for depth in 0..=cfg.max_depth {
        if let Some(p) = searcher.prove(s, depth) {
            debug_assert!(check_proof(sig, &p).is_valid());
            return SearchOutcome::Found(p);
        }
        if searcher.timed_out {
            return SearchOutcome::TimedOut;
        }
    }
    SearchOutcome::ExhaustedBounds
}

struct Searcher<'a> {
    sig: &'a Signature,
    cfg: &'a SearchConfig,
    /// Canonical sequent -> largest depth budget known to fail.
    failed: HashMap<String, usize>,
    deadline: Option<Instant>,
    tick: u32,
    timed_out: bool,
}

/// Canonical memo key: the goal plus the sorted context rendering.
/// Sorting is sound because every kernel rule addresses beliefs by index,
/// so provability at a given depth is invariant under permutation.
fn canon_key(s: &Sequent) -> String {
    let mut beliefs: Vec<String> = s.context.iter().map(|b| b.to_string()).collect();
    beliefs.sort();
    format!("{} |- {}", beliefs.join(" ; "), s.goal)
}

impl<'a> Searcher<'a> {
    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        self.tick = self.tick.wrapping_add(1);
        if self.tick % 128 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    /// Apply `spec` at `concl`, recursing into the premises with one less
    /// depth. Returns the finished node on success.
    fn try_rule(&mut self, concl: &Sequent, spec: RuleSpec, depth: usize) -> Option<Proof> {
        let prems = premises(self.sig, concl, &spec).ok()?;
        let mut children = Vec::with_capacity(prems.len());
        for prem in &prems {
            match self.prove(prem, depth - 1) {
                Some(p) => children.push(p),
                None => return None,
            }
        }
        Some(Proof::new(concl.clone(), spec, children))
    }

    /// Like `try_rule`, but first duplicates belief `i` with `Contraction`
    /// and then applies `spec_on_copy` (which must address `i + 1`).
    fn try_keep_rule(
        &mut self,
        concl: &Sequent,
        i: usize,
        spec_on_copy: RuleSpec,
        depth: usize,
    ) -> Option<Proof> {
        if depth < 2 {
            return None;
        }
        let contraction = RuleSpec::Contraction { i };
        let dup = premises(self.sig, concl, &contraction).ok()?;
        debug_assert_eq!(dup.len(), 1);
        let inner = self.try_rule(&dup[0], spec_on_copy, depth - 1)?;
        Some(Proof::new(concl.clone(), contraction, vec![inner]))
    }

    fn prove(&mut self, seq: &Sequent, depth: usize) -> Option<Proof> {
        if depth == 0 || self.out_of_time() {
            return None;
        }
        let key = canon_key(seq);
        if let Some(&failed_at) = self.failed.get(&key) {
            if depth <= failed_at {
                return None;
            }
        }

        let result = self.prove_inner(seq, depth);
        if result.is_none() && !self.timed_out {
            let entry = self.failed.entry(key).or_insert(0);
            if depth > *entry {
                *entry = depth;
            }
        }
        result
    }

    fn prove_inner(&mut self, seq: &Sequent, depth: usize) -> Option<Proof> {
        let goal = &seq.goal;

        // --- Closing rules -------------------------------------------------
        for (i, b) in seq.context.iter().enumerate() {
            if b == goal {
                return self.try_rule(seq, RuleSpec::Ax { i }, depth);
            }
        }
        if goal.formula == Formula::True {
            return self.try_rule(seq, RuleSpec::TrueR, depth);
        }
        if let Formula::Rel(name, args) = &goal.formula {
            if name == FLOWS && args.len() == 2 && args[0] == args[1] {
                return self.try_rule(seq, RuleSpec::FlowsToRefl, depth);
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            if b.formula == Formula::False && b.gp.is_prefix_of(&goal.gp) {
                return self.try_rule(seq, RuleSpec::FalseL { i }, depth);
            }
        }

        // --- Invertible rules: apply the first match, no alternatives ------
        match &goal.formula {
            Formula::Implies(..) => {
                return self.try_rule(seq, RuleSpec::ImpR, depth);
            }
            Formula::And(..) => {
                return self.try_rule(seq, RuleSpec::AndR, depth);
            }
            Formula::Says(..) => {
                return self.try_rule(seq, RuleSpec::SaysR, depth);
            }
            Formula::Forall(..) => {
                let eigen = self.fresh_eigen(seq);
                return self.try_rule(seq, RuleSpec::ForallR { eigen }, depth);
            }
            _ => {}
        }
        for (i, b) in seq.context.iter().enumerate() {
            match &b.formula {
                Formula::And(..) => {
                    return self.try_rule(seq, RuleSpec::AndL { i }, depth);
                }
                Formula::Says(..) => {
                    return self.try_rule(seq, RuleSpec::SaysL { i }, depth);
                }
                Formula::Exists(..) => {
                    let eigen = self.fresh_eigen(seq);
                    return self.try_rule(seq, RuleSpec::ExistsL { i, eigen }, depth);
                }
                _ => {}
            }
        }

        // --- Branching rules, canonical order -------------------------------
        if let Formula::Or(..) = &goal.formula {
            if let Some(p) = self.try_rule(seq, RuleSpec::OrR1, depth) {
                return Some(p);
            }
            if let Some(p) = self.try_rule(seq, RuleSpec::OrR2, depth) {
                return Some(p);
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            if let Formula::Or(..) = &b.formula {
                if let Some(p) = self.try_rule(seq, RuleSpec::OrL { i }, depth) {
                    return Some(p);
                }
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            if let Formula::Implies(..) = &b.formula {
                let found = if self.cfg.structural {
                    self.try_keep_rule(seq, i, RuleSpec::ImpL { i: i + 1 }, depth)
                } else {
                    self.try_rule(seq, RuleSpec::ImpL { i }, depth)
                };
                if found.is_some() {
                    return found;
                }
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            if let Formula::Forall(binder, _) = &b.formula {
                for t in self.cfg.terms_of(&binder.sort).to_vec() {
                    let found = if self.cfg.structural {
                        self.try_keep_rule(
                            seq,
                            i,
                            RuleSpec::ForallL { i: i + 1, t },
                            depth,
                        )
                    } else {
                        self.try_rule(
                            seq,
                            RuleSpec::ForallL { i, t },
                            depth,
                        )
                    };
                    if found.is_some() {
                        return found;
                    }
                }
            }
        }
        if let Formula::Exists(binder, _) = &goal.formula {
            for t in self.cfg.terms_of(&binder.sort).to_vec() {
                if let Some(p) = self.try_rule(seq, RuleSpec::ExistsR { t }, depth) {
                    return Some(p);
                }
            }
        }

        // --- Permission-rule moves on atomic goals ---------------------------
        if let Formula::Rel(name, args) = &goal.formula {
            let labels: Vec<Term> = self.cfg.terms_of(&Sort::label()).to_vec();
            if name == FLOWS && args.len() == 2 && args[0] != args[1] {
                for mid in &labels {
                    if *mid == args[0] || *mid == args[1] {
                        continue;
                    }
                    if let Some(p) =
                        self.try_rule(seq, RuleSpec::FlowsToTrans { mid: mid.clone() }, depth)
                    {
                        return Some(p);
                    }
                }
            }
            if name == CANREAD && args.len() == 2 {
                for via in &labels {
                    if *via == args[1] {
                        continue;
                    }
                    if let Some(p) =
                        self.try_rule(seq, RuleSpec::CRVar { via: via.clone() }, depth)
                    {
                        return Some(p);
                    }
                }
            }
            if name == CANWRITE && args.len() == 2 {
                for via in &labels {
                    if *via == args[1] {
                        continue;
                    }
                    if let Some(p) =
                        self.try_rule(seq, RuleSpec::CWVar { via: via.clone() }, depth)
                    {
                        return Some(p);
                    }
                }
            }
        }

        // --- Generalized-principal moves ------------------------------------
        // Self moves that shrink first.
        for pos in 0..goal.gp.stack.len().saturating_sub(1) {
            if goal.gp.stack[pos] == goal.gp.stack[pos + 1] {
                if let Some(p) = self.try_rule(seq, RuleSpec::SelfRElim { pos }, depth) {
                    return Some(p);
                }
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            for pos in 0..b.gp.stack.len().saturating_sub(1) {
                if b.gp.stack[pos] == b.gp.stack[pos + 1] {
                    if let Some(p) =
                        self.try_rule(seq, RuleSpec::SelfLElim { i, pos }, depth)
                    {
                        return Some(p);
                    }
                }
            }
        }
        // Variance and forwarding on the goal principal.
        let labels: Vec<Term> = self.cfg.terms_of(&Sort::label()).to_vec();
        let principals: Vec<Term> = self.cfg.terms_of(&Sort::principal()).to_vec();
        for pos in 0..seq.goal.gp.stack.len() {
            let (p_at, l_at) = seq.goal.gp.stack[pos].clone();
            for l2 in &labels {
                if *l2 == l_at {
                    continue;
                }
                if let Some(p) = self.try_rule(
                    seq,
                    RuleSpec::VarR { pos, l2: l2.clone() },
                    depth,
                ) {
                    return Some(p);
                }
            }
            for q in &principals {
                if *q == p_at {
                    continue;
                }
                if let Some(p) = self.try_rule(
                    seq,
                    RuleSpec::FwdR { pos, p: q.clone() },
                    depth,
                ) {
                    return Some(p);
                }
            }
        }
        // Variance and forwarding on context beliefs.
        for i in 0..seq.context.len() {
            for pos in 0..seq.context[i].gp.stack.len() {
                let (p_at, l_at) = seq.context[i].gp.stack[pos].clone();
                for l2 in &labels {
                    if *l2 == l_at {
                        continue;
                    }
                    let found = if self.cfg.structural {
                        self.try_keep_rule(
                            seq,
                            i,
                            RuleSpec::VarL { i: i + 1, pos, l2: l2.clone() },
                            depth,
                        )
                    } else {
                        self.try_rule(
                            seq,
                            RuleSpec::VarL { i, pos, l2: l2.clone() },
                            depth,
                        )
                    };
                    if found.is_some() {
                        return found;
                    }
                }
                for q in &principals {
                    if *q == p_at {
                        continue;
                    }
                    let found = if self.cfg.structural {
                        self.try_keep_rule(
                            seq,
                            i,
                            RuleSpec::FwdL { i: i + 1, pos, q: q.clone() },
                            depth,
                        )
                    } else {
                        self.try_rule(
                            seq,
                            RuleSpec::FwdL { i, pos, q: q.clone() },
                            depth,
                        )
                    };
                    if found.is_some() {
                        return found;
                    }
                }
            }
        }
        // Growing Self moves last: duplicate a goal pair, then a belief pair.
        for pos in 0..seq.goal.gp.stack.len() {
            if let Some(p) = self.try_rule(seq, RuleSpec::SelfRIntro { pos }, depth) {
                return Some(p);
            }
        }
        for (i, b) in seq.context.iter().enumerate() {
            for pos in 0..b.gp.stack.len() {
                if let Some(p) = self.try_rule(seq, RuleSpec::SelfLIntro { i, pos }, depth)
                {
                    return Some(p);
                }
            }
        }

        None
    }

    /// A fresh eigenvariable name: unused in the sequent and not shadowing
    /// a declared function symbol.
    fn fresh_eigen(&self, seq: &Sequent) -> String {
        let mut avoid = std::collections::BTreeSet::new();
        let mut fv = std::collections::BTreeSet::new();
        seq.free_vars(&mut fv);
        for (name, _) in fv {
            avoid.insert(name);
        }
        for f in self.sig.funcs() {
            avoid.insert(f.name.clone());
        }
        fresh_name("x", &avoid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;
    use crate::sequent::{Belief, GenPrincipal, Sequent};
    use crate::signature::{RelDecl, Signature};
    use crate::term::Term;

    fn sig() -> Signature {
        let mut s = Signature::new();
        for c in ["Pub", "Sec"] {
            s.add_func(crate::signature::FuncDecl {
                name: c.into(),
                args: vec![],
                result: Sort::label(),
            })
            .unwrap();
        }
        for c in ["P", "Q"] {
            s.add_func(crate::signature::FuncDecl {
                name: c.into(),
                args: vec![],
                result: Sort::principal(),
            })
            .unwrap();
        }
        s.add_rel(RelDecl {
            name: "A".into(),
            args: vec![],
        })
        .unwrap();
        s
    }

    fn gp(l: &str) -> GenPrincipal {
        GenPrincipal::ground_only(Term::constant(l))
    }

    #[test]
    fn finds_true_at_depth_one() {
        let s = sig();
        let seq = Sequent::new(vec![], Belief::new(Formula::True, gp("Pub")));
        let out = bounded_prove(&s, &seq, &SearchConfig::new(1));
        assert!(out.is_found());
    }

    #[test]
    fn false_goal_exhausts_bounds() {
        let s = sig();
        let seq = Sequent::new(vec![], Belief::new(Formula::False, gp("Pub")));
        let out = bounded_prove(&s, &seq, &SearchConfig::with_signature_constants(&s, 8));
        assert!(matches!(out, SearchOutcome::ExhaustedBounds));
    }

    #[test]
    fn proves_and_of_axioms_and_emitted_proof_checks() {
        let s = sig();
        let a = Belief::new(Formula::rel("A", vec![]), gp("Pub"));
        let goal = Belief::new(
            Formula::and(Formula::rel("A", vec![]), Formula::True),
            gp("Pub"),
        );
        let seq = Sequent::new(vec![a], goal);
        let out = bounded_prove(&s, &seq, &SearchConfig::new(4));
        let p = out.proof().expect("should be found");
        assert!(check_proof(&s, p).is_valid());
        assert_eq!(p.conclusion, seq);
    }

    #[test]
    fn uses_implication_with_contraction_and_reuses_it() {
        let s = sig();
        // A -> (A & A) used once suffices, but the belief must survive the
        // structural keep-policy; also exercises ImpL's ground-label test.
        let a = Formula::rel("A", vec![]);
        let imp = Formula::implies(
            a.clone(),
            Term::constant("Pub"),
            Formula::and(a.clone(), a.clone()),
        );
        let ctx = vec![
            Belief::new(imp, gp("Pub")),
            Belief::new(a.clone(), gp("Pub")),
        ];
        let seq = Sequent::new(ctx, Belief::new(a.clone(), gp("Pub")));
        let out = bounded_prove(&s, &seq, &SearchConfig::with_signature_constants(&s, 8));
        assert!(out.is_found());
    }

    #[test]
    fn depth_monotonicity_on_a_found_goal() {
        let s = sig();
        let a = Belief::new(Formula::rel("A", vec![]), gp("Pub"));
        let goal = Belief::new(
            Formula::or(Formula::False, Formula::rel("A", vec![])),
            gp("Pub"),
        );
        let seq = Sequent::new(vec![a], goal);
        let mut first_found = None;
        for d in 0..6 {
            let out = bounded_prove(&s, &seq, &SearchConfig::new(d));
            if out.is_found() {
                first_found = Some(d);
                break;
            }
        }
        let d0 = first_found.expect("findable within 6");
        for d in d0..=6 {
            assert!(
                bounded_prove(&s, &seq, &SearchConfig::new(d)).is_found(),
                "found at {d0} but not at {d}"
            );
        }
    }

    #[test]
    fn says_goal_round_trips_through_search() {
        let s = sig();
        let body = Formula::rel("A", vec![]);
        let inner_gp = gp("Pub").push(
            Term::constant("Q"),
            Term::constant("Sec"),
        );
        let ctx = vec![Belief::new(body.clone(), inner_gp)];
        let goal = Belief::new(
            Formula::says(
                Term::constant("Q"),
                Term::constant("Sec"),
                body,
            ),
            gp("Pub"),
        );
        let seq = Sequent::new(ctx, goal);
        let out = bounded_prove(&s, &seq, &SearchConfig::new(3));
        let p = out.proof().expect("says goal should close via SaysR + Ax");
        assert!(check_proof(&s, p).is_valid());
    }

    #[test]
    fn timeout_reports_timed_out() {
        let s = sig();
        // Unprovable goal with enough moves available to churn.
        let seq = Sequent::new(
            vec![Belief::new(
                Formula::rel("A", vec![]),
                gp("Pub").push(
                    Term::constant("P"),
                    Term::constant("Sec"),
                ),
            )],
            Belief::new(Formula::False, gp("Pub")),
        );
        let mut cfg = SearchConfig::with_signature_constants(&s, 50);
        cfg.timeout = Some(Duration::from_millis(1));
        let out = bounded_prove(&s, &seq, &cfg);
        assert!(
            matches!(out, SearchOutcome::TimedOut | SearchOutcome::ExhaustedBounds),
            "tiny budget must end in TimedOut or fast exhaustion"
        );
    }
}
