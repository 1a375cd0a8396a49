//! The verifying kernel: explicit proof trees and the checker that validates
//! every node against the sequent-calculus rule schemas.
//!
//! A [`Proof`] stores a conclusion sequent at every node together with a
//! [`RuleSpec`] naming the rule and its parameters (context index, stack
//! position, witness term, eigenvariable). The single source of truth for
//! every rule is [`premises`], which computes the premise sequents a rule
//! application requires from its conclusion; the checker re-derives the
//! premises at every node and compares them with the recorded child
//! conclusions, and elaboration uses the same function to fill in node
//! sequents top-down from a root sequent and a rule skeleton.
//!
//! Left rules address context beliefs by position (`i`), and rules that
//! manipulate the simulation stack of a generalized principal address pairs
//! by position (`pos`, counted from the ground label outward). Structural
//! rules (`Weakening`, `Contraction`, `Exchange`) are ordinary explicit
//! rules.

use std::collections::BTreeMap;

use crate::formula::Formula;
use crate::sequent::{check_sequent_wf, Belief, Context, GenPrincipal, Sequent};
use crate::signature::{Signature, Sort};
use crate::term::{sort_check, Term};

/// A rule application: the rule name plus its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleSpec {
    /// Conclusion goal occurs in the context at index `i`.
    Ax { i: usize },
    /// Premise drops the belief at index `i`.
    Weakening { i: usize },
    /// Premise duplicates the belief at index `i` (copy inserted at `i + 1`).
    Contraction { i: usize },
    /// Premise swaps the beliefs at `i` and `i + 1`.
    Exchange { i: usize },
    /// Context belief `i` is `false` held at a prefix of the goal's
    /// generalized principal.
    FalseL { i: usize },
    TrueR,
    /// Context belief `i` is a conjunction; the premise replaces it with the
    /// left conjunct and inserts the right conjunct after it.
    AndL { i: usize },
    AndR,
    OrL { i: usize },
    OrR1,
    OrR2,
    /// Context belief `i` is an implication; first premise proves the
    /// implication's premise at the implication label's ground principal
    /// (with the implication removed), second continues with the consequent.
    ImpL { i: usize },
    ImpR,
    /// Instantiate a universal in the context with witness term `t`.
    ForallL { i: usize, t: Term },
    /// Prove a universal goal via a fresh eigenvariable.
    ForallR { eigen: String },
    /// Use an existential from the context via a fresh eigenvariable.
    ExistsL { i: usize, eigen: String },
    /// Prove an existential goal with witness term `t`.
    ExistsR { t: Term },
    /// Unfold `p says[l] phi` in the context onto the simulation stack.
    SaysL { i: usize },
    SaysR,
    /// Collapse a duplicated stack pair of context belief `i` at positions
    /// `pos`, `pos + 1` (the premise has the single pair).
    SelfLIntro { i: usize, pos: usize },
    /// Duplicate the stack pair of context belief `i` at position `pos`
    /// (the premise has the doubled pair).
    SelfLElim { i: usize, pos: usize },
    /// As `SelfLIntro`, on the goal.
    SelfRIntro { pos: usize },
    /// As `SelfLElim`, on the goal.
    SelfRElim { pos: usize },
    /// Relabel pair `pos` of context belief `i` from `(p, l)` to `(p, l2)`,
    /// with a side premise `flows(l, l2)` at the relabelled position.
    VarL { i: usize, pos: usize, l2: Term },
    /// Relabel pair `pos` of the goal from `(p, l2)` in the premise to
    /// `(p, l)` in the conclusion, with side premise `flows(l2, l)`.
    VarR { pos: usize, l2: Term },
    /// Forward context belief `i` at pair `pos` from principal `p` to `q`,
    /// with `canread`/`canwrite` side premises.
    FwdL { i: usize, pos: usize, q: Term },
    /// Forward the goal at pair `pos`: the premise holds it as `p`, the
    /// conclusion as the original principal.
    FwdR { pos: usize, p: Term },
    /// Goal is `flows(l, l)`.
    FlowsToRefl,
    /// Goal is `flows(l1, l3)`; premises go through `mid`.
    FlowsToTrans { mid: Term },
    /// Goal is `canread(p, l1)`; premises are `canread(p, via)` and
    /// `flows(l1, via)` (contravariant).
    CRVar { via: Term },
    /// Goal is `canwrite(p, l2)`; premises are `canwrite(p, via)` and
    /// `flows(via, l2)` (covariant).
    CWVar { via: Term },
    /// A rule name outside the kernel rule set (checking fails closed).
    Unknown { name: String },
    /// A known rule head whose parameter list could not be interpreted.
    Malformed { name: String, detail: String },
}

impl RuleSpec {
    /// The display name of the rule.
    pub fn name(&self) -> String {
        match self {
            RuleSpec::Ax { .. } => "Ax".into(),
            RuleSpec::Weakening { .. } => "Weakening".into(),
            RuleSpec::Contraction { .. } => "Contraction".into(),
            RuleSpec::Exchange { .. } => "Exchange".into(),
            RuleSpec::FalseL { .. } => "FalseL".into(),
            RuleSpec::TrueR => "TrueR".into(),
            RuleSpec::AndL { .. } => "AndL".into(),
            RuleSpec::AndR => "AndR".into(),
            RuleSpec::OrL { .. } => "OrL".into(),
            RuleSpec::OrR1 => "OrR1".into(),
            RuleSpec::OrR2 => "OrR2".into(),
            RuleSpec::ImpL { .. } => "ImpL".into(),
            RuleSpec::ImpR => "ImpR".into(),
            RuleSpec::ForallL { .. } => "ForallL".into(),
            RuleSpec::ForallR { .. } => "ForallR".into(),
            RuleSpec::ExistsL { .. } => "ExistsL".into(),
            RuleSpec::ExistsR { .. } => "ExistsR".into(),
            RuleSpec::SaysL { .. } => "SaysL".into(),
            RuleSpec::SaysR => "SaysR".into(),
            RuleSpec::SelfLIntro { .. } => "SelfLIntro".into(),
            RuleSpec::SelfLElim { .. } => "SelfLElim".into(),
            RuleSpec::SelfRIntro { .. } => "SelfRIntro".into(),
            RuleSpec::SelfRElim { .. } => "SelfRElim".into(),
            RuleSpec::VarL { .. } => "VarL".into(),
            RuleSpec::VarR { .. } => "VarR".into(),
            RuleSpec::FwdL { .. } => "FwdL".into(),
            RuleSpec::FwdR { .. } => "FwdR".into(),
            RuleSpec::FlowsToRefl => "FlowsToRefl".into(),
            RuleSpec::FlowsToTrans { .. } => "FlowsToTrans".into(),
            RuleSpec::CRVar { .. } => "CRVar".into(),
            RuleSpec::CWVar { .. } => "CWVar".into(),
            RuleSpec::Unknown { name } => name.clone(),
            RuleSpec::Malformed { name, .. } => name.clone(),
        }
    }
}

/// Why a rule application is rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckReason {
    /// The rule exists but does not apply to the node's sequents.
    #[error("rule mismatch: {0}")]
    RuleMismatch(String),
    /// A context index or stack position is out of range.
    #[error("address out of range: {0}")]
    AddressOutOfRange(String),
    /// An eigenvariable occurs free in the conclusion (or shadows a symbol).
    #[error("freshness violation: {0}")]
    FreshnessViolation(String),
    /// A parameter term or a sequent fails sort checking.
    #[error("sort error: {0}")]
    SortError(String),
    /// The rule head is not one of the kernel rules.
    #[error("unknown rule: {0}")]
    UnknownRule(String),
}

impl CheckReason {
    /// Stable machine-readable tag for reports.
    pub fn tag(&self) -> &'static str {
        match self {
            CheckReason::RuleMismatch(_) => "RuleMismatch",
            CheckReason::AddressOutOfRange(_) => "AddressOutOfRange",
            CheckReason::FreshnessViolation(_) => "FreshnessViolation",
            CheckReason::SortError(_) => "SortError",
            CheckReason::UnknownRule(_) => "UnknownRule",
        }
    }
}

/// A checked proof tree node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub conclusion: Sequent,
    pub spec: RuleSpec,
    pub children: Vec<Proof>,
}

impl Proof {
    pub fn leaf(conclusion: Sequent, spec: RuleSpec) -> Proof {
        Proof {
            conclusion,
            spec,
            children: vec![],
        }
    }

    pub fn new(conclusion: Sequent, spec: RuleSpec, children: Vec<Proof>) -> Proof {
        Proof {
            conclusion,
            spec,
            children,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Proof::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Proof::depth).max().unwrap_or(0)
    }

    pub fn subproof_at(&self, path: &[usize]) -> Option<&Proof> {
        let mut cur = self;
        for &i in path {
            cur = cur.children.get(i)?;
        }
        Some(cur)
    }

    /// Pre-order traversal of all nodes with their paths.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&[usize], &'a Proof)) {
        fn go<'a>(p: &'a Proof, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], &'a Proof)) {
            f(path, p);
            for (i, c) in p.children.iter().enumerate() {
                path.push(i);
                go(c, path, f);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), f);
    }
}

/// Aggregate statistics for a proof tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProofStats {
    pub nodes: usize,
    pub depth: usize,
    pub rules: BTreeMap<String, usize>,
}

/// Verdict of checking a proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid {
        path: Vec<usize>,
        reason: CheckReason,
    },
}

/// Result of [`check_proof`]: a verdict plus statistics (always computed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub stats: ProofStats,
}

impl CheckReport {
    pub fn is_valid(&self) -> bool {
        matches!(self.verdict, Verdict::Valid)
    }
}

fn gp_set_pair(gp: &GenPrincipal, pos: usize, pair: (Term, Term)) -> GenPrincipal {
    let mut g = gp.clone();
    g.stack[pos] = pair;
    g
}

fn gp_remove_pair(gp: &GenPrincipal, pos: usize) -> GenPrincipal {
    let mut g = gp.clone();
    g.stack.remove(pos);
    g
}

fn gp_dup_pair(gp: &GenPrincipal, pos: usize) -> GenPrincipal {
    let mut g = gp.clone();
    let pair = g.stack[pos].clone();
    g.stack.insert(pos + 1, pair);
    g
}

fn ctx_replace(ctx: &Context, i: usize, b: Belief) -> Context {
    let mut c = ctx.clone();
    c[i] = b;
    c
}

fn check_index(ctx: &Context, i: usize, rule: &str) -> Result<(), CheckReason> {
    if i < ctx.len() {
        Ok(())
    } else {
        Err(CheckReason::AddressOutOfRange(format!(
            "{rule}: context index {i} out of range (context has {} beliefs)",
            ctx.len()
        )))
    }
}

fn check_pos(gp: &GenPrincipal, pos: usize, rule: &str) -> Result<(), CheckReason> {
    if pos < gp.stack.len() {
        Ok(())
    } else {
        Err(CheckReason::AddressOutOfRange(format!(
            "{rule}: stack position {pos} out of range (stack has {} pairs)",
            gp.stack.len()
        )))
    }
}

fn env_of(s: &Sequent) -> BTreeMap<String, Sort> {
    let mut fv = std::collections::BTreeSet::new();
    s.free_vars(&mut fv);
    fv.into_iter().collect()
}

fn check_param_sort(
    sig: &Signature,
    concl: &Sequent,
    t: &Term,
    expected: &Sort,
    rule: &str,
) -> Result<(), CheckReason> {
    let mut env = env_of(concl);
    let found = sort_check(sig, &mut env, t)
        .map_err(|e| CheckReason::SortError(format!("{rule}: parameter {t}: {e}")))?;
    if &found != expected {
        return Err(CheckReason::SortError(format!(
            "{rule}: parameter {t} has sort {found}, expected {expected}"
        )));
    }
    Ok(())
}

fn check_eigen(sig: &Signature, concl: &Sequent, eigen: &str, rule: &str) -> Result<(), CheckReason> {
    if sig.func(eigen).is_some() {
        return Err(CheckReason::FreshnessViolation(format!(
            "{rule}: eigenvariable {eigen} shadows a declared function symbol"
        )));
    }
    if concl.has_free_var(eigen) {
        return Err(CheckReason::FreshnessViolation(format!(
            "{rule}: eigenvariable {eigen} occurs free in the conclusion"
        )));
    }
    Ok(())
}

/// Compute the premise sequents required by applying `spec` to `concl`.
///
/// This is the complete rule table of the kernel; both the checker and
/// elaboration derive premises through this function.
pub fn premises(
    sig: &Signature,
    concl: &Sequent,
    spec: &RuleSpec,
) -> Result<Vec<Sequent>, CheckReason> {
    let ctx = &concl.context;
    let goal = &concl.goal;
    match spec {
        RuleSpec::Ax { i } => {
            check_index(ctx, *i, "Ax")?;
            let b = &ctx[*i];
            if b.formula != goal.formula {
                return Err(CheckReason::RuleMismatch(format!(
                    "Ax: context belief {i} has formula {}, goal is {}",
                    b.formula, goal.formula
                )));
            }
            if b.gp != goal.gp {
                return Err(CheckReason::RuleMismatch(format!(
                    "Ax: context belief {i} is held at {}, goal at {}",
                    b.gp, goal.gp
                )));
            }
            Ok(vec![])
        }
        RuleSpec::Weakening { i } => {
            check_index(ctx, *i, "Weakening")?;
            let mut c = ctx.clone();
            c.remove(*i);
            Ok(vec![Sequent::new(c, goal.clone())])
        }
        RuleSpec::Contraction { i } => {
            check_index(ctx, *i, "Contraction")?;
            let mut c = ctx.clone();
            let b = c[*i].clone();
            c.insert(*i + 1, b);
            Ok(vec![Sequent::new(c, goal.clone())])
        }
        RuleSpec::Exchange { i } => {
            if *i + 1 >= ctx.len() {
                return Err(CheckReason::AddressOutOfRange(format!(
                    "Exchange: needs beliefs at {} and {}, context has {}",
                    i,
                    i + 1,
                    ctx.len()
                )));
            }
            let mut c = ctx.clone();
            c.swap(*i, *i + 1);
            Ok(vec![Sequent::new(c, goal.clone())])
        }
        RuleSpec::FalseL { i } => {
            check_index(ctx, *i, "FalseL")?;
            let b = &ctx[*i];
            if b.formula != Formula::False {
                return Err(CheckReason::RuleMismatch(format!(
                    "FalseL: context belief {i} is {}, not false",
                    b.formula
                )));
            }
            if !b.gp.is_prefix_of(&goal.gp) {
                return Err(CheckReason::RuleMismatch(format!(
                    "FalseL: belief principal {} is not a prefix of goal principal {}",
                    b.gp, goal.gp
                )));
            }
            Ok(vec![])
        }
        RuleSpec::TrueR => {
            if goal.formula != Formula::True {
                return Err(CheckReason::RuleMismatch(format!(
                    "TrueR: goal is {}, not true",
                    goal.formula
                )));
            }
            Ok(vec![])
        }
        RuleSpec::AndL { i } => {
            check_index(ctx, *i, "AndL")?;
            let b = &ctx[*i];
            let Formula::And(a, c2) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "AndL: context belief {i} is {}, not a conjunction",
                    b.formula
                )));
            };
            let mut c = ctx.clone();
            c[*i] = Belief::new((**a).clone(), b.gp.clone());
            c.insert(*i + 1, Belief::new((**c2).clone(), b.gp.clone()));
            Ok(vec![Sequent::new(c, goal.clone())])
        }
        RuleSpec::AndR => {
            let Formula::And(a, b) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "AndR: goal is {}, not a conjunction",
                    goal.formula
                )));
            };
            Ok(vec![
                Sequent::new(ctx.clone(), Belief::new((**a).clone(), goal.gp.clone())),
                Sequent::new(ctx.clone(), Belief::new((**b).clone(), goal.gp.clone())),
            ])
        }
        RuleSpec::OrL { i } => {
            check_index(ctx, *i, "OrL")?;
            let b = &ctx[*i];
            let Formula::Or(a, c2) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "OrL: context belief {i} is {}, not a disjunction",
                    b.formula
                )));
            };
            let left = ctx_replace(ctx, *i, Belief::new((**a).clone(), b.gp.clone()));
            let right = ctx_replace(ctx, *i, Belief::new((**c2).clone(), b.gp.clone()));
            Ok(vec![
                Sequent::new(left, goal.clone()),
                Sequent::new(right, goal.clone()),
            ])
        }
        RuleSpec::OrR1 => {
            let Formula::Or(a, _) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "OrR1: goal is {}, not a disjunction",
                    goal.formula
                )));
            };
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new((**a).clone(), goal.gp.clone()),
            )])
        }
        RuleSpec::OrR2 => {
            let Formula::Or(_, b) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "OrR2: goal is {}, not a disjunction",
                    goal.formula
                )));
            };
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new((**b).clone(), goal.gp.clone()),
            )])
        }
        RuleSpec::ImpL { i } => {
            check_index(ctx, *i, "ImpL")?;
            let b = &ctx[*i];
            let Formula::Implies(a, l, c2) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ImpL: context belief {i} is {}, not an implication",
                    b.formula
                )));
            };
            let mut dropped = ctx.clone();
            dropped.remove(*i);
            let test = Sequent::new(
                dropped,
                Belief::new((**a).clone(), GenPrincipal::ground_only(l.clone())),
            );
            let main = Sequent::new(
                ctx_replace(ctx, *i, Belief::new((**c2).clone(), b.gp.clone())),
                goal.clone(),
            );
            Ok(vec![test, main])
        }
        RuleSpec::ImpR => {
            let Formula::Implies(a, l, b) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ImpR: goal is {}, not an implication",
                    goal.formula
                )));
            };
            let mut c = ctx.clone();
            c.push(Belief::new(
                (**a).clone(),
                GenPrincipal::ground_only(l.clone()),
            ));
            Ok(vec![Sequent::new(
                c,
                Belief::new((**b).clone(), goal.gp.clone()),
            )])
        }
        RuleSpec::ForallL { i, t } => {
            check_index(ctx, *i, "ForallL")?;
            let b = &ctx[*i];
            let Formula::Forall(bi, body) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ForallL: context belief {i} is {}, not a universal",
                    b.formula
                )));
            };
            check_param_sort(sig, concl, t, &bi.sort, "ForallL")?;
            let inst = body.open(t);
            Ok(vec![Sequent::new(
                ctx_replace(ctx, *i, Belief::new(inst, b.gp.clone())),
                goal.clone(),
            )])
        }
        RuleSpec::ForallR { eigen } => {
            let Formula::Forall(bi, body) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ForallR: goal is {}, not a universal",
                    goal.formula
                )));
            };
            check_eigen(sig, concl, eigen, "ForallR")?;
            let opened = body.open(&Term::Var(eigen.clone(), bi.sort.clone()));
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new(opened, goal.gp.clone()),
            )])
        }
        RuleSpec::ExistsL { i, eigen } => {
            check_index(ctx, *i, "ExistsL")?;
            let b = &ctx[*i];
            let Formula::Exists(bi, body) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ExistsL: context belief {i} is {}, not an existential",
                    b.formula
                )));
            };
            check_eigen(sig, concl, eigen, "ExistsL")?;
            let opened = body.open(&Term::Var(eigen.clone(), bi.sort.clone()));
            Ok(vec![Sequent::new(
                ctx_replace(ctx, *i, Belief::new(opened, b.gp.clone())),
                goal.clone(),
            )])
        }
        RuleSpec::ExistsR { t } => {
            let Formula::Exists(bi, body) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "ExistsR: goal is {}, not an existential",
                    goal.formula
                )));
            };
            check_param_sort(sig, concl, t, &bi.sort, "ExistsR")?;
            let inst = body.open(t);
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new(inst, goal.gp.clone()),
            )])
        }
        RuleSpec::SaysL { i } => {
            check_index(ctx, *i, "SaysL")?;
            let b = &ctx[*i];
            let Formula::Says(p, l, body) = &b.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "SaysL: context belief {i} is {}, not a says formula",
                    b.formula
                )));
            };
            let gp = b.gp.push(p.clone(), l.clone());
            Ok(vec![Sequent::new(
                ctx_replace(ctx, *i, Belief::new((**body).clone(), gp)),
                goal.clone(),
            )])
        }
        RuleSpec::SaysR => {
            let Formula::Says(p, l, body) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "SaysR: goal is {}, not a says formula",
                    goal.formula
                )));
            };
            let gp = goal.gp.push(p.clone(), l.clone());
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new((**body).clone(), gp),
            )])
        }
        RuleSpec::SelfLIntro { i, pos } => {
            check_index(ctx, *i, "SelfLIntro")?;
            let b = &ctx[*i];
            check_pos(&b.gp, *pos + 1, "SelfLIntro")?;
            if b.gp.stack[*pos] != b.gp.stack[*pos + 1] {
                return Err(CheckReason::RuleMismatch(format!(
                    "SelfLIntro: stack pairs at {} and {} of belief {i} differ",
                    pos,
                    pos + 1
                )));
            }
            let gp = gp_remove_pair(&b.gp, *pos + 1);
            Ok(vec![Sequent::new(
                ctx_replace(ctx, *i, Belief::new(b.formula.clone(), gp)),
                goal.clone(),
            )])
        }
        RuleSpec::SelfLElim { i, pos } => {
            check_index(ctx, *i, "SelfLElim")?;
            let b = &ctx[*i];
            check_pos(&b.gp, *pos, "SelfLElim")?;
            let gp = gp_dup_pair(&b.gp, *pos);
            Ok(vec![Sequent::new(
                ctx_replace(ctx, *i, Belief::new(b.formula.clone(), gp)),
                goal.clone(),
            )])
        }
        RuleSpec::SelfRIntro { pos } => {
            check_pos(&goal.gp, *pos + 1, "SelfRIntro")?;
            if goal.gp.stack[*pos] != goal.gp.stack[*pos + 1] {
                return Err(CheckReason::RuleMismatch(format!(
                    "SelfRIntro: goal stack pairs at {} and {} differ",
                    pos,
                    pos + 1
                )));
            }
            let gp = gp_remove_pair(&goal.gp, *pos + 1);
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new(goal.formula.clone(), gp),
            )])
        }
        RuleSpec::SelfRElim { pos } => {
            check_pos(&goal.gp, *pos, "SelfRElim")?;
            let gp = gp_dup_pair(&goal.gp, *pos);
            Ok(vec![Sequent::new(
                ctx.clone(),
                Belief::new(goal.formula.clone(), gp),
            )])
        }
        RuleSpec::VarL { i, pos, l2 } => {
            check_index(ctx, *i, "VarL")?;
            let b = &ctx[*i];
            check_pos(&b.gp, *pos, "VarL")?;
            check_param_sort(sig, concl, l2, &Sort::label(), "VarL")?;
            let (p, l) = b.gp.stack[*pos].clone();
            let main_gp = gp_set_pair(&b.gp, *pos, (p.clone(), l2.clone()));
            let main = Sequent::new(
                ctx_replace(ctx, *i, Belief::new(b.formula.clone(), main_gp)),
                goal.clone(),
            );
            let side_gp = b.gp.prefix(*pos).push(p, l2.clone());
            let side = Sequent::new(
                ctx.clone(),
                Belief::new(Formula::flows(l, l2.clone()), side_gp),
            );
            Ok(vec![main, side])
        }
        RuleSpec::VarR { pos, l2 } => {
            check_pos(&goal.gp, *pos, "VarR")?;
            check_param_sort(sig, concl, l2, &Sort::label(), "VarR")?;
            let (p, l) = goal.gp.stack[*pos].clone();
            let main_gp = gp_set_pair(&goal.gp, *pos, (p.clone(), l2.clone()));
            let main = Sequent::new(
                ctx.clone(),
                Belief::new(goal.formula.clone(), main_gp),
            );
            let side_gp = goal.gp.prefix(*pos).push(p, l.clone());
            let side = Sequent::new(
                ctx.clone(),
                Belief::new(Formula::flows(l2.clone(), l), side_gp),
            );
            Ok(vec![main, side])
        }
        RuleSpec::FwdL { i, pos, q } => {
            check_index(ctx, *i, "FwdL")?;
            let b = &ctx[*i];
            check_pos(&b.gp, *pos, "FwdL")?;
            check_param_sort(sig, concl, q, &Sort::principal(), "FwdL")?;
            let (p, l) = b.gp.stack[*pos].clone();
            let main_gp = gp_set_pair(&b.gp, *pos, (q.clone(), l.clone()));
            let main = Sequent::new(
                ctx_replace(ctx, *i, Belief::new(b.formula.clone(), main_gp)),
                goal.clone(),
            );
            let prefix = b.gp.prefix(*pos);
            let read = Sequent::new(
                ctx.clone(),
                Belief::new(
                    Formula::canread(q.clone(), l.clone()),
                    prefix.push(p.clone(), l.clone()),
                ),
            );
            let write = Sequent::new(
                ctx.clone(),
                Belief::new(
                    Formula::canwrite(p, l.clone()),
                    prefix.push(q.clone(), l),
                ),
            );
            Ok(vec![main, read, write])
        }
        RuleSpec::FwdR { pos, p } => {
            check_pos(&goal.gp, *pos, "FwdR")?;
            check_param_sort(sig, concl, p, &Sort::principal(), "FwdR")?;
            let (q, l) = goal.gp.stack[*pos].clone();
            let main_gp = gp_set_pair(&goal.gp, *pos, (p.clone(), l.clone()));
            let main = Sequent::new(
                ctx.clone(),
                Belief::new(goal.formula.clone(), main_gp),
            );
            let prefix = goal.gp.prefix(*pos);
            let read = Sequent::new(
                ctx.clone(),
                Belief::new(
                    Formula::canread(q.clone(), l.clone()),
                    prefix.push(p.clone(), l.clone()),
                ),
            );
            let write = Sequent::new(
                ctx.clone(),
                Belief::new(Formula::canwrite(p.clone(), l.clone()), prefix.push(q, l)),
            );
            Ok(vec![main, read, write])
        }
        RuleSpec::FlowsToRefl => {
            let Formula::Rel(r, args) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "FlowsToRefl: goal is {}, not a flows atom",
                    goal.formula
                )));
            };
            if r != crate::signature::FLOWS || args.len() != 2 || args[0] != args[1] {
                return Err(CheckReason::RuleMismatch(format!(
                    "FlowsToRefl: goal {} is not of the form flows(l, l)",
                    goal.formula
                )));
            }
            Ok(vec![])
        }
        RuleSpec::FlowsToTrans { mid } => {
            let Formula::Rel(r, args) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "FlowsToTrans: goal is {}, not a flows atom",
                    goal.formula
                )));
            };
            if r != crate::signature::FLOWS || args.len() != 2 {
                return Err(CheckReason::RuleMismatch(format!(
                    "FlowsToTrans: goal {} is not a flows atom",
                    goal.formula
                )));
            }
            check_param_sort(sig, concl, mid, &Sort::label(), "FlowsToTrans")?;
            Ok(vec![
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::flows(args[0].clone(), mid.clone()),
                        goal.gp.clone(),
                    ),
                ),
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::flows(mid.clone(), args[1].clone()),
                        goal.gp.clone(),
                    ),
                ),
            ])
        }
        RuleSpec::CRVar { via } => {
            let Formula::Rel(r, args) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "CRVar: goal is {}, not a canread atom",
                    goal.formula
                )));
            };
            if r != crate::signature::CANREAD || args.len() != 2 {
                return Err(CheckReason::RuleMismatch(format!(
                    "CRVar: goal {} is not a canread atom",
                    goal.formula
                )));
            }
            check_param_sort(sig, concl, via, &Sort::label(), "CRVar")?;
            Ok(vec![
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::canread(args[0].clone(), via.clone()),
                        goal.gp.clone(),
                    ),
                ),
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::flows(args[1].clone(), via.clone()),
                        goal.gp.clone(),
                    ),
                ),
            ])
        }
        RuleSpec::CWVar { via } => {
            let Formula::Rel(r, args) = &goal.formula else {
                return Err(CheckReason::RuleMismatch(format!(
                    "CWVar: goal is {}, not a canwrite atom",
                    goal.formula
                )));
            };
            if r != crate::signature::CANWRITE || args.len() != 2 {
                return Err(CheckReason::RuleMismatch(format!(
                    "CWVar: goal {} is not a canwrite atom",
                    goal.formula
                )));
            }
            check_param_sort(sig, concl, via, &Sort::label(), "CWVar")?;
            Ok(vec![
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::canwrite(args[0].clone(), via.clone()),
                        goal.gp.clone(),
                    ),
                ),
                Sequent::new(
                    ctx.clone(),
                    Belief::new(
                        Formula::flows(via.clone(), args[1].clone()),
                        goal.gp.clone(),
                    ),
                ),
            ])
        }
        RuleSpec::Unknown { name } => Err(CheckReason::UnknownRule(name.clone())),
        RuleSpec::Malformed { name, detail } => Err(CheckReason::RuleMismatch(format!(
            "{name}: {detail}"
        ))),
    }
}

/// Check an explicit proof tree.
///
/// The root conclusion is sort-checked; every node's rule application is then
/// re-derived through [`premises`] and compared with the recorded child
/// conclusions. The first failure in pre-order is reported with its path;
/// statistics cover the whole tree regardless of the verdict.
pub fn check_proof(sig: &Signature, proof: &Proof) -> CheckReport {
    let mut stats = ProofStats {
        nodes: proof.node_count(),
        depth: proof.depth(),
        rules: BTreeMap::new(),
    };
    proof.walk(&mut |_, node| {
        *stats.rules.entry(node.spec.name()).or_insert(0) += 1;
    });

    if let Err(e) = check_sequent_wf(sig, &proof.conclusion) {
        return CheckReport {
            verdict: Verdict::Invalid {
                path: vec![],
                reason: CheckReason::SortError(format!("root sequent: {e}")),
            },
            stats,
        };
    }

    fn go(sig: &Signature, node: &Proof, path: &mut Vec<usize>) -> Result<(), (Vec<usize>, CheckReason)> {
        let prems = premises(sig, &node.conclusion, &node.spec)
            .map_err(|r| (path.clone(), r))?;
        if prems.len() != node.children.len() {
            return Err((
                path.clone(),
                CheckReason::RuleMismatch(format!(
                    "{}: rule requires {} premises, node has {} children",
                    node.spec.name(),
                    prems.len(),
                    node.children.len()
                )),
            ));
        }
        for (k, (child, expected)) in node.children.iter().zip(prems.iter()).enumerate() {
            path.push(k);
            if child.conclusion != *expected {
                return Err((
                    path.clone(),
                    CheckReason::RuleMismatch(format!(
                        "premise {k} of {}: expected `{}`, child concludes `{}`",
                        node.spec.name(),
                        expected,
                        child.conclusion
                    )),
                ));
            }
            go(sig, child, path)?;
            path.pop();
        }
        Ok(())
    }

    let verdict = match go(sig, proof, &mut Vec::new()) {
        Ok(()) => Verdict::Valid,
        Err((path, reason)) => Verdict::Invalid { path, reason },
    };
    CheckReport { verdict, stats }
}

/// A parsed proof skeleton: rule name, raw parameters, children. Produced by
/// the surface parser; turned into a [`Proof`] by [`elaborate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProof {
    pub name: String,
    pub params: Vec<RawParam>,
    pub children: Vec<RawProof>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawParam {
    Index(usize),
    /// Bare identifier: a constant, a variable, or an eigenvariable name.
    Symbol(String),
    /// A structured term (variables carry placeholder sorts until resolved).
    Term(Term),
}

impl std::fmt::Display for RawParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawParam::Index(i) => write!(f, "{i}"),
            RawParam::Symbol(s) => write!(f, "{s}"),
            RawParam::Term(t) => write!(f, "{t}"),
        }
    }
}

/// Resolve placeholder variable sorts in a raw term: identifiers that name
/// nullary functions become constants, function arguments get their declared
/// sorts, and a still-unknown top-level variable receives `expected`.
fn resolve_term(sig: &Signature, t: &Term, expected: Option<&Sort>) -> Term {
    match t {
        Term::Var(n, s) if s.is_unknown() => {
            if let Some(f) = sig.func(n) {
                if f.args.is_empty() {
                    return Term::constant(n);
                }
            }
            match expected {
                Some(e) => Term::Var(n.clone(), e.clone()),
                None => t.clone(),
            }
        }
        Term::Var(_, _) | Term::Bound(_) => t.clone(),
        Term::App(f, args) => {
            let decl = sig.func(f).cloned();
            let resolved = args
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let exp = decl.as_ref().and_then(|d| d.args.get(k));
                    resolve_term(sig, a, exp)
                })
                .collect();
            Term::App(f.clone(), resolved)
        }
    }
}

fn param_term(sig: &Signature, p: &RawParam, expected: Option<&Sort>) -> Option<Term> {
    match p {
        RawParam::Symbol(s) => Some(resolve_term(
            sig,
            &Term::Var(s.clone(), Sort::unknown()),
            expected,
        )),
        RawParam::Term(t) => Some(resolve_term(sig, t, expected)),
        RawParam::Index(_) => None,
    }
}

fn param_index(p: &RawParam) -> Option<usize> {
    match p {
        RawParam::Index(i) => Some(*i),
        _ => None,
    }
}

fn param_symbol(p: &RawParam) -> Option<String> {
    match p {
        RawParam::Symbol(s) => Some(s.clone()),
        _ => None,
    }
}

/// Interpret a raw node's name and parameters against its (already known)
/// conclusion. Parameter mistakes yield `RuleSpec::Malformed`, unknown heads
/// `RuleSpec::Unknown`; both fail closed in the checker.
pub fn resolve_spec(sig: &Signature, raw: &RawProof, concl: &Sequent) -> RuleSpec {
    let name = raw.name.as_str();
    let malformed = |detail: &str| RuleSpec::Malformed {
        name: raw.name.clone(),
        detail: detail.to_string(),
    };
    let want = |n: usize| -> Option<RuleSpec> {
        if raw.params.len() != n {
            Some(malformed(&format!(
                "expected {n} parameter(s), found {}",
                raw.params.len()
            )))
        } else {
            None
        }
    };
    macro_rules! arity {
        ($n:expr) => {
            if let Some(m) = want($n) {
                return m;
            }
        };
    }
    match name {
        "Ax" | "Weakening" | "Contraction" | "Exchange" | "FalseL" | "AndL" | "OrL" | "ImpL"
        | "SaysL" => {
            arity!(1);
            let Some(i) = param_index(&raw.params[0]) else {
                return malformed("parameter must be a context index");
            };
            match name {
                "Ax" => RuleSpec::Ax { i },
                "Weakening" => RuleSpec::Weakening { i },
                "Contraction" => RuleSpec::Contraction { i },
                "Exchange" => RuleSpec::Exchange { i },
                "FalseL" => RuleSpec::FalseL { i },
                "AndL" => RuleSpec::AndL { i },
                "OrL" => RuleSpec::OrL { i },
                "ImpL" => RuleSpec::ImpL { i },
                _ => RuleSpec::SaysL { i },
            }
        }
        "TrueR" | "AndR" | "OrR1" | "OrR2" | "ImpR" | "SaysR" | "FlowsToRefl" => {
            arity!(0);
            match name {
                "TrueR" => RuleSpec::TrueR,
                "AndR" => RuleSpec::AndR,
                "OrR1" => RuleSpec::OrR1,
                "OrR2" => RuleSpec::OrR2,
                "ImpR" => RuleSpec::ImpR,
                "SaysR" => RuleSpec::SaysR,
                _ => RuleSpec::FlowsToRefl,
            }
        }
        "ForallL" => {
            arity!(2);
            let Some(i) = param_index(&raw.params[0]) else {
                return malformed("first parameter must be a context index");
            };
            let expected = concl.context.get(i).and_then(|b| match &b.formula {
                Formula::Forall(bi, _) => Some(bi.sort.clone()),
                _ => None,
            });
            let Some(t) = param_term(sig, &raw.params[1], expected.as_ref()) else {
                return malformed("second parameter must be a term");
            };
            RuleSpec::ForallL { i, t }
        }
        "ForallR" => {
            arity!(1);
            let Some(eigen) = param_symbol(&raw.params[0]) else {
                return malformed("parameter must be an eigenvariable name");
            };
            RuleSpec::ForallR { eigen }
        }
        "ExistsL" => {
            arity!(2);
            let Some(i) = param_index(&raw.params[0]) else {
                return malformed("first parameter must be a context index");
            };
            let Some(eigen) = param_symbol(&raw.params[1]) else {
                return malformed("second parameter must be an eigenvariable name");
            };
            RuleSpec::ExistsL { i, eigen }
        }
        "ExistsR" => {
            arity!(1);
            let expected = match &concl.goal.formula {
                Formula::Exists(bi, _) => Some(bi.sort.clone()),
                _ => None,
            };
            let Some(t) = param_term(sig, &raw.params[0], expected.as_ref()) else {
                return malformed("parameter must be a term");
            };
            RuleSpec::ExistsR { t }
        }
        "SelfLIntro" | "SelfLElim" => {
            arity!(2);
            let (Some(i), Some(pos)) = (
                param_index(&raw.params[0]),
                param_index(&raw.params[1]),
            ) else {
                return malformed("parameters must be a context index and a stack position");
            };
            if name == "SelfLIntro" {
                RuleSpec::SelfLIntro { i, pos }
            } else {
                RuleSpec::SelfLElim { i, pos }
            }
        }
        "SelfRIntro" | "SelfRElim" => {
            arity!(1);
            let Some(pos) = param_index(&raw.params[0]) else {
                return malformed("parameter must be a stack position");
            };
            if name == "SelfRIntro" {
                RuleSpec::SelfRIntro { pos }
            } else {
                RuleSpec::SelfRElim { pos }
            }
        }
        "VarL" => {
            arity!(3);
            let (Some(i), Some(pos)) = (
                param_index(&raw.params[0]),
                param_index(&raw.params[1]),
            ) else {
                return malformed("first parameters must be a context index and a stack position");
            };
            let Some(l2) = param_term(sig, &raw.params[2], Some(&Sort::label())) else {
                return malformed("third parameter must be a label term");
            };
            RuleSpec::VarL { i, pos, l2 }
        }
        "VarR" => {
            arity!(2);
            let Some(pos) = param_index(&raw.params[0]) else {
                return malformed("first parameter must be a stack position");
            };
            let Some(l2) = param_term(sig, &raw.params[1], Some(&Sort::label())) else {
                return malformed("second parameter must be a label term");
            };
            RuleSpec::VarR { pos, l2 }
        }
        "FwdL" => {
            arity!(3);
            let (Some(i), Some(pos)) = (
                param_index(&raw.params[0]),
                param_index(&raw.params[1]),
            ) else {
                return malformed("first parameters must be a context index and a stack position");
            };
            let Some(q) = param_term(sig, &raw.params[2], Some(&Sort::principal())) else {
                return malformed("third parameter must be a principal term");
            };
            RuleSpec::FwdL { i, pos, q }
        }
        "FwdR" => {
            arity!(2);
            let Some(pos) = param_index(&raw.params[0]) else {
                return malformed("first parameter must be a stack position");
            };
            let Some(p) = param_term(sig, &raw.params[1], Some(&Sort::principal())) else {
                return malformed("second parameter must be a principal term");
            };
            RuleSpec::FwdR { pos, p }
        }
        "FlowsToTrans" => {
            arity!(1);
            let Some(mid) = param_term(sig, &raw.params[0], Some(&Sort::label())) else {
                return malformed("parameter must be a label term");
            };
            RuleSpec::FlowsToTrans { mid }
        }
        "CRVar" => {
            arity!(1);
            let Some(via) = param_term(sig, &raw.params[0], Some(&Sort::label())) else {
                return malformed("parameter must be a label term");
            };
            RuleSpec::CRVar { via }
        }
        "CWVar" => {
            arity!(1);
            let Some(via) = param_term(sig, &raw.params[0], Some(&Sort::label())) else {
                return malformed("parameter must be a label term");
            };
            RuleSpec::CWVar { via }
        }
        _ => RuleSpec::Unknown {
            name: raw.name.clone(),
        },
    }
}

/// Turn a raw proof skeleton into an explicit proof tree for `root`.
///
/// Conclusions are computed top-down through [`premises`]. When a node's rule
/// fails to apply (unknown head, malformed parameters, schema mismatch, or a
/// premise-count disagreement), its children receive the node's own
/// conclusion as a placeholder; the checker then reports its failure at
/// exactly that node.
pub fn elaborate(sig: &Signature, root: &Sequent, raw: &RawProof) -> Proof {
    fn go(sig: &Signature, concl: Sequent, raw: &RawProof) -> Proof {
        let spec = resolve_spec(sig, raw, &concl);
        let prems = premises(sig, &concl, &spec).ok().filter(|ps| ps.len() == raw.children.len());
        let children = match prems {
            Some(ps) => raw
                .children
                .iter()
                .zip(ps.into_iter())
                .map(|(c, p)| go(sig, p, c))
                .collect(),
            None => raw
                .children
                .iter()
                .map(|c| go(sig, concl.clone(), c))
                .collect(),
        };
        Proof {
            conclusion: concl,
            spec,
            children,
        }
    }
    go(sig, root.clone(), raw)
}

/// All kernel rule names, in presentation order.
pub const RULE_NAMES: &[&str] = &[
    "Ax",
    "Weakening",
    "Contraction",
    "Exchange",
    "FalseL",
    "TrueR",
    "AndL",
    "AndR",
    "OrL",
    "OrR1",
    "OrR2",
    "ImpL",
    "ImpR",
    "ForallL",
    "ForallR",
    "ExistsL",
    "ExistsR",
    "SaysL",
    "SaysR",
    "SelfLIntro",
    "SelfLElim",
    "SelfRIntro",
    "SelfRElim",
    "VarL",
    "VarR",
    "FwdL",
    "FwdR",
    "FlowsToRefl",
    "FlowsToTrans",
    "CRVar",
    "CWVar",
];

/// A human-readable description of a rule's schema, or `None` when the name
/// is not a kernel rule. `Cut` gets a dedicated explanation: it is admissible
/// but not part of the kernel, so proofs using it fail with `UnknownRule`.
pub fn rule_schema(name: &str) -> Option<String> {
    let s = match name {
        "Ax" => "Ax [i]: closes the goal when context belief i is the goal formula (up to \
                 alpha-equivalence) held at the same generalized principal.",
        "Weakening" => "Weakening [i]: premise proves the goal without context belief i.",
        "Contraction" => "Contraction [i]: premise has context belief i duplicated (the copy \
                          sits at i+1).",
        "Exchange" => "Exchange [i]: premise has context beliefs i and i+1 swapped.",
        "FalseL" => "FalseL [i]: closes any goal whose generalized principal extends the one \
                     holding false at context index i.",
        "TrueR" => "TrueR: closes the goal `true @ g`.",
        "AndL" => "AndL [i]: splits conjunction i into its conjuncts at indices i and i+1.",
        "AndR" => "AndR: proves `a & b @ g` from `a @ g` and `b @ g`.",
        "OrL" => "OrL [i]: case split on disjunction i; each premise replaces it with one \
                  disjunct.",
        "OrR1" => "OrR1: proves `a | b @ g` from `a @ g`.",
        "OrR2" => "OrR2: proves `a | b @ g` from `b @ g`.",
        "ImpL" => "ImpL [i]: uses implication `a ->[l] b @ g` at context index i; first premise \
                   proves `a @ <l>` without the implication, second continues with `b @ g` in \
                   its place.",
        "ImpR" => "ImpR: proves `a ->[l] b @ g`; the premise appends `a @ <l>` to the context \
                   and proves `b @ g`.",
        "ForallL" => "ForallL [i, t]: instantiates universal i with the sort-correct witness t.",
        "ForallR" => "ForallR [x]: proves a universal goal with eigenvariable x, which must not \
                      occur free in the conclusion.",
        "ExistsL" => "ExistsL [i, x]: opens existential i with eigenvariable x, which must not \
                      occur free in the conclusion.",
        "ExistsR" => "ExistsR [t]: proves an existential goal with the sort-correct witness t.",
        "SaysL" => "SaysL [i]: replaces `p says[l] a @ g` at context index i with \
                    `a @ g.[p:l]`.",
        "SaysR" => "SaysR: proves `p says[l] a @ g` from `a @ g.[p:l]`.",
        "SelfLIntro" => "SelfLIntro [i, pos]: context belief i has identical stack pairs at pos \
                         and pos+1; the premise keeps a single copy.",
        "SelfLElim" => "SelfLElim [i, pos]: the premise duplicates stack pair pos of context \
                        belief i.",
        "SelfRIntro" => "SelfRIntro [pos]: the goal has identical stack pairs at pos and pos+1; \
                         the premise keeps a single copy.",
        "SelfRElim" => "SelfRElim [pos]: the premise duplicates stack pair pos of the goal.",
        "VarL" => "VarL [i, pos, l2]: relabels stack pair pos of context belief i from (p, l) \
                   to (p, l2); side premise proves flows(l, l2) at the prefix extended with \
                   [p:l2].",
        "VarR" => "VarR [pos, l2]: the premise holds the goal with stack pair pos relabelled to \
                   (p, l2); side premise proves flows(l2, l) at the prefix extended with [p:l].",
        "FwdL" => "FwdL [i, pos, q]: forwards context belief i at stack pair pos from (p, l) to \
                   (q, l); side premises prove canread(q, l) under [p:l] and canwrite(p, l) \
                   under [q:l].",
        "FwdR" => "FwdR [pos, p]: the premise holds the goal at (p, l) in place of (q, l); side \
                   premises prove canread(q, l) under [p:l] and canwrite(p, l) under [q:l].",
        "FlowsToRefl" => "FlowsToRefl: closes the goal `flows(l, l) @ g`.",
        "FlowsToTrans" => "FlowsToTrans [mid]: proves `flows(l1, l3) @ g` from `flows(l1, mid)` \
                           and `flows(mid, l3)` at the same principal.",
        "CRVar" => "CRVar [via]: proves `canread(p, l1) @ g` from `canread(p, via)` and \
                    `flows(l1, via)` (read permission is contravariant in the label).",
        "CWVar" => "CWVar [via]: proves `canwrite(p, l2) @ g` from `canwrite(p, via)` and \
                    `flows(via, l2)` (write permission is covariant in the label).",
        "Cut" => "Cut is not a kernel rule: it is admissible, and proofs that use it are \
                  rejected with UnknownRule. Use the cut-elimination transformation to combine \
                  a proof of a lemma with a proof that uses it.",
        _ => return None,
    };
    Some(s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::FuncDecl;

    fn sig() -> Signature {
        let mut s = Signature::new();
        for (n, sort) in [
            ("Pub", Sort::label()),
            ("Sec", Sort::label()),
            ("P", Sort::principal()),
            ("Q", Sort::principal()),
        ] {
            s.add_func(FuncDecl {
                name: n.into(),
                args: vec![],
                result: sort,
            })
            .unwrap();
        }
        s.add_rel(crate::signature::RelDecl {
            name: "A".into(),
            args: vec![],
        })
        .unwrap();
        s.default_ground_label = Some(Term::constant("Pub"));
        s
    }

    fn ground() -> GenPrincipal {
        GenPrincipal::ground_only(Term::constant("Pub"))
    }

    fn atom() -> Formula {
        Formula::rel("A", vec![])
    }

    #[test]
    fn ax_closes_matching_goal() {
        let sig = sig();
        let b = Belief::new(atom(), ground());
        let s = Sequent::new(vec![b.clone()], b);
        let p = Proof::leaf(s, RuleSpec::Ax { i: 0 });
        assert!(check_proof(&sig, &p).is_valid());
    }

    #[test]
    fn ax_requires_same_principal() {
        let sig = sig();
        let b = Belief::new(atom(), ground().push(Term::constant("P"), Term::constant("Pub")));
        let goal = Belief::new(atom(), ground());
        let s = Sequent::new(vec![b], goal);
        let p = Proof::leaf(s, RuleSpec::Ax { i: 0 });
        let r = check_proof(&sig, &p);
        assert!(matches!(
            r.verdict,
            Verdict::Invalid {
                reason: CheckReason::RuleMismatch(_),
                ..
            }
        ));
    }

    #[test]
    fn says_round_trip() {
        let sig = sig();
        let p = Term::constant("P");
        let l = Term::constant("Sec");
        let says = Formula::says(p.clone(), l.clone(), atom());
        let root = Sequent::new(
            vec![Belief::new(says.clone(), ground())],
            Belief::new(says, ground()),
        );
        let inner = Belief::new(atom(), ground().push(p, l));
        let step1 = premises(&sig, &root, &RuleSpec::SaysR).unwrap();
        assert_eq!(step1[0].goal, inner);
        let step2 = premises(&sig, &step1[0], &RuleSpec::SaysL { i: 0 }).unwrap();
        assert_eq!(step2[0].context[0], inner);
        let proof = Proof::new(
            root,
            RuleSpec::SaysR,
            vec![Proof::new(
                step1[0].clone(),
                RuleSpec::SaysL { i: 0 },
                vec![Proof::leaf(step2[0].clone(), RuleSpec::Ax { i: 0 })],
            )],
        );
        assert!(check_proof(&sig, &proof).is_valid());
    }

    #[test]
    fn forall_r_freshness_enforced() {
        let sig = sig();
        let psort = Sort::principal();
        let goalf = Formula::forall(
            "x",
            psort.clone(),
            Formula::canread(Term::var("x", psort.clone()), Term::constant("Pub")),
        );
        // Context mentions the free variable y, so eigen y is rejected.
        let ctxb = Belief::new(
            Formula::canread(Term::var("y", psort.clone()), Term::constant("Pub")),
            ground(),
        );
        let s = Sequent::new(vec![ctxb], Belief::new(goalf, ground()));
        let err = premises(&sig, &s, &RuleSpec::ForallR { eigen: "y".into() });
        assert!(matches!(err, Err(CheckReason::FreshnessViolation(_))));
        let ok = premises(&sig, &s, &RuleSpec::ForallR { eigen: "z".into() });
        assert!(ok.is_ok());
    }

    #[test]
    fn unknown_rule_fails_closed() {
        let sig = sig();
        let b = Belief::new(atom(), ground());
        let s = Sequent::new(vec![b.clone()], b);
        let p = Proof::leaf(
            s,
            RuleSpec::Unknown {
                name: "ImpL'".into(),
            },
        );
        let r = check_proof(&sig, &p);
        assert!(matches!(
            r.verdict,
            Verdict::Invalid {
                reason: CheckReason::UnknownRule(_),
                ..
            }
        ));
    }

    #[test]
    fn stats_cover_whole_tree() {
        let sig = sig();
        let b = Belief::new(atom(), ground());
        let s = Sequent::new(vec![b.clone()], b);
        let p = Proof::new(
            s.clone(),
            RuleSpec::Contraction { i: 0 },
            vec![Proof::leaf(
                premises(&sig, &s, &RuleSpec::Contraction { i: 0 }).unwrap()[0].clone(),
                RuleSpec::Ax { i: 0 },
            )],
        );
        let r = check_proof(&sig, &p);
        assert!(r.is_valid());
        assert_eq!(r.stats.nodes, 2);
        assert_eq!(r.stats.depth, 2);
        assert_eq!(r.stats.rules.get("Ax"), Some(&1));
        assert_eq!(r.stats.rules.get("Contraction"), Some(&1));
    }
}
