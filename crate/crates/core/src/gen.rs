//! Random generation of valid proofs and of cut instances.
//!
//! Proofs are grown by forward rule application from random axiom leaves:
//! the generator picks a context, closes a branch with a leaf rule, and
//! then repeatedly makes the derivation built so far the main premise of a
//! freshly chosen rule. Every candidate node is validated against the
//! kernel's own premise computation before it is committed, so each
//! returned proof checks valid by construction (and is re-checked before
//! it is emitted).
//!
//! Outputs are deterministic for a fixed seed: all choices are drawn from
//! a seeded ChaCha stream, and the bounded search used to close secondary
//! branches is itself deterministic.
//!
//! The generator deliberately stays inside the fragment the proof
//! transformations support:
//!
//! * no `Contraction` nodes are emitted;
//! * once a principal-manipulation rule targets a context position, no
//!   connective rule is applied to that position above it (tracked by a
//!   set of frozen positions threaded through the recursion);
//! * side premises of relabelling and forwarding rules are closed by
//!   single leaves, and trust-closure rules are only stacked over
//!   connective-free subtrees;
//! * searched subproofs for secondary branches are normalized before they
//!   are spliced in, and discarded if they cannot be.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{fresh_name, Formula};
use crate::kernel::{check_proof, premises, Proof, RuleSpec};
use crate::search::{bounded_prove, SearchConfig, SearchOutcome};
use crate::sequent::{Belief, Context, GenPrincipal, Sequent};
use crate::signature::{RelDecl, Signature, Sort, CANREAD, CANWRITE, FLOWS};
use crate::term::Term;
use crate::transform::{eliminate_cut_with_fuel, is_manip, normalize, try_strengthen};

/// Nesting bound for randomly built formulas.
const FORMULA_DEPTH: usize = 2;

/// Depth budget for the bounded search that closes secondary branches.
const BRANCH_SEARCH_DEPTH: usize = 4;

/// Fuel for the elimination dry run that screens generated cut instances.
const CUT_SCREEN_FUEL: usize = 200_000;

/// A pair of proofs wired together for cut elimination: `left` proves
/// `Γ ⊢ B @ g` and `right` proves `Γ` with `B @ g` inserted at `index`
/// entails its own goal.
#[derive(Debug, Clone, PartialEq)]
pub struct CutInstance {
    /// Proof of `Γ ⊢ B @ g`.
    pub left: Proof,
    /// Proof whose context is `Γ` with `B @ g` at `index`.
    pub right: Proof,
    /// Position of the cut belief in `right`'s context.
    pub index: usize,
}

/// A small fixed signature for generator-driven testing: three principals,
/// three labels, and three relation symbols.
pub fn sample_signature() -> Signature {
    let mut s = Signature::new();
    for c in ["Alice", "Bob", "Cathy"] {
        s.add_func(crate::signature::FuncDecl {
            name: c.into(),
            args: vec![],
            result: Sort::principal(),
        })
        .expect("fresh constant");
    }
    for c in ["L1", "L2", "L3"] {
        s.add_func(crate::signature::FuncDecl {
            name: c.into(),
            args: vec![],
            result: Sort::label(),
        })
        .expect("fresh constant");
    }
    s.add_rel(RelDecl { name: "Owns".into(), args: vec![Sort::principal()] })
        .expect("fresh relation");
    s.add_rel(RelDecl {
        name: "Trusts".into(),
        args: vec![Sort::principal(), Sort::principal()],
    })
    .expect("fresh relation");
    s.add_rel(RelDecl { name: "Raining".into(), args: vec![] }).expect("fresh relation");
    s
}

/// Generate `n` random valid proofs.
///
/// Proof shapes are governed by `cfg`: `max_depth` bounds the number of
/// rule applications stacked on the main spine, and the universe supplies
/// quantifier witnesses and the principal/label pools. Deterministic for a
/// fixed `(sig, cfg, seed, n)`.
///
/// # Panics
///
/// Panics if neither `cfg.universe` nor `sig` provides at least one
/// `Principal` and one `Label` constant.
pub fn generate_random_proofs(
    sig: &Signature,
    cfg: &SearchConfig,
    seed: u64,
    n: usize,
) -> Vec<Proof> {
    let mut g = Gen::new(sig, cfg, seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        assert!(attempts <= 30 * n + 100, "proof generation stalled");
        let ctx = g.context();
        let p = g.gen_any(&ctx, cfg.max_depth, &Guards::default());
        if check_proof(sig, &p).is_valid() {
            out.push(p);
        }
    }
    out
}

/// Generate `n` random valid proofs whose goal formula is a `says`.
///
/// These feed the says-unfolding transformation. Deterministic for a fixed
/// `(sig, cfg, seed, n)`; panics under the same conditions as
/// [`generate_random_proofs`].
pub fn generate_says_goal_proofs(
    sig: &Signature,
    cfg: &SearchConfig,
    seed: u64,
    n: usize,
) -> Vec<Proof> {
    let mut g = Gen::new(sig, cfg, seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        let ctx = g.context();
        let p = if attempts > 40 * n + 200 {
            // guaranteed shape: truth spoken under a pushed voice
            g.says_fallback(&ctx)
        } else {
            let depth = cfg.max_depth.saturating_sub(1);
            let child = g.gen_any(&ctx, depth, &Guards::default());
            match g.wrap_says(&child) {
                Some(p) => p,
                None => continue,
            }
        };
        if matches!(p.conclusion.goal.formula, Formula::Says(..))
            && check_proof(sig, &p).is_valid()
        {
            out.push(p);
        }
    }
    out
}

/// Generate `n` cut instances: pairs of valid proofs agreeing on the cut
/// belief, suitable for [`crate::transform::eliminate_cut`].
///
/// The left proof's context equals the right proof's context with the
/// belief at `index` removed, and that belief is exactly the left proof's
/// goal. Samples outside the eliminator's fragment are screened out and
/// resampled: left proofs whose normal form is rooted in a goal-side
/// principal-manipulation rule over a compound goal, right proofs that
/// rewrite context beliefs the left proof depends on, and any residual
/// pair on which a bounded elimination dry run fails. Deterministic for a
/// fixed `(sig, cfg, seed, n)`.
pub fn generate_cut_instances(
    sig: &Signature,
    cfg: &SearchConfig,
    seed: u64,
    n: usize,
) -> Vec<CutInstance> {
    let mut g = Gen::new(sig, cfg, seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        assert!(attempts <= 120 * n + 800, "cut-instance generation stalled");
        let ctx = g.context();
        let left = g.gen_any(&ctx, cfg.max_depth, &Guards::default());
        if !check_proof(sig, &left).is_valid() {
            continue;
        }
        let b = left.conclusion.goal.clone();
        if is_compound(&b.formula) {
            match normalize(sig, &left) {
                Ok(nf) if gp_right_rooted(&nf) => continue,
                Err(_) => continue,
                Ok(_) => {}
            }
        }
        let base = left.conclusion.context.clone();
        let index = g.rng.gen_range(0..=base.len());
        let mut ctx2 = base.clone();
        ctx2.insert(index, b.clone());
        // beliefs the left proof cannot be strengthened away from must
        // survive intact in every premise the cut gets pushed into
        let guards = Guards {
            frozen: BTreeSet::new(),
            locked: (0..base.len())
                .filter(|&r| try_strengthen(sig, &left, r).is_none())
                .map(|r| if r < index { r } else { r + 1 })
                .collect(),
        };
        g.bias = Some(b);
        let right = g.gen_any(&ctx2, cfg.max_depth, &guards);
        g.bias = None;
        if !check_proof(sig, &right).is_valid() {
            continue;
        }
        if eliminate_cut_with_fuel(sig, &left, &right, index, CUT_SCREEN_FUEL).is_err() {
            continue;
        }
        out.push(CutInstance { left, right, index });
    }
    out
}

fn is_compound(f: &Formula) -> bool {
    !matches!(f, Formula::Rel(..) | Formula::True | Formula::False)
}

fn gp_right_rooted(p: &Proof) -> bool {
    matches!(
        p.spec,
        RuleSpec::SelfRIntro { .. }
            | RuleSpec::SelfRElim { .. }
            | RuleSpec::VarR { .. }
            | RuleSpec::FwdR { .. }
    )
}

fn has_manip(p: &Proof) -> bool {
    is_manip(&p.spec) || p.children.iter().any(has_manip)
}

fn shift_down(s: &BTreeSet<usize>, at: usize) -> BTreeSet<usize> {
    s.iter().filter(|&&x| x != at).map(|&x| if x > at { x - 1 } else { x }).collect()
}

fn shift_up(s: &BTreeSet<usize>, at: usize) -> BTreeSet<usize> {
    s.iter().map(|&x| if x >= at { x + 1 } else { x }).collect()
}

fn swap_members(s: &BTreeSet<usize>, i: usize) -> BTreeSet<usize> {
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
        .collect()
}

/// Per-position restrictions threaded through the recursion.
#[derive(Clone, Default)]
struct Guards {
    /// Positions with a principal-manipulation rule (or an overlapping
    /// exchange) below: connective rules may not address them, since the
    /// normalizer cannot commute a connective past such a node.
    frozen: BTreeSet<usize>,
    /// Positions a surrounding cut pairing needs intact: no
    /// context-changing rule may address them at all.
    locked: BTreeSet<usize>,
}

impl Guards {
    fn remove_at(&self, at: usize) -> Guards {
        Guards { frozen: shift_down(&self.frozen, at), locked: shift_down(&self.locked, at) }
    }

    fn insert_at(&self, at: usize) -> Guards {
        Guards { frozen: shift_up(&self.frozen, at), locked: shift_up(&self.locked, at) }
    }

    fn swap_at(&self, i: usize) -> Guards {
        Guards { frozen: swap_members(&self.frozen, i), locked: swap_members(&self.locked, i) }
    }

    fn connective_ok(&self, i: usize) -> bool {
        !self.frozen.contains(&i) && !self.locked.contains(&i)
    }

    fn change_ok(&self, i: usize) -> bool {
        !self.locked.contains(&i)
    }
}

struct Gen<'a> {
    sig: &'a Signature,
    cfg: &'a SearchConfig,
    rng: ChaCha8Rng,
    principals: Vec<Term>,
    labels: Vec<Term>,
    /// When set, axiom leaves prefer this belief if it is in scope.
    bias: Option<Belief>,
}

impl<'a> Gen<'a> {
    fn new(sig: &'a Signature, cfg: &'a SearchConfig, seed: u64) -> Gen<'a> {
        let principals = Self::pool(sig, cfg, &Sort::principal());
        let labels = Self::pool(sig, cfg, &Sort::label());
        assert!(
            !principals.is_empty() && !labels.is_empty(),
            "generation needs at least one principal and one label constant"
        );
        Gen { sig, cfg, rng: ChaCha8Rng::seed_from_u64(seed), principals, labels, bias: None }
    }

    fn pool(sig: &Signature, cfg: &SearchConfig, sort: &Sort) -> Vec<Term> {
        if let Some(v) = cfg.universe.get(sort) {
            if !v.is_empty() {
                return v.clone();
            }
        }
        sig.constants_of(sort)
    }

    fn pct(&mut self, p: u32) -> bool {
        self.rng.gen_range(0..100u32) < p
    }

    fn principal(&mut self) -> Term {
        let i = self.rng.gen_range(0..self.principals.len());
        self.principals[i].clone()
    }

    fn label(&mut self) -> Term {
        let i = self.rng.gen_range(0..self.labels.len());
        self.labels[i].clone()
    }

    fn term_of(&mut self, sort: &Sort) -> Option<Term> {
        if *sort == Sort::principal() {
            return Some(self.principal());
        }
        if *sort == Sort::label() {
            return Some(self.label());
        }
        let pool = self.cfg.universe.get(sort)?.clone();
        if pool.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..pool.len());
        Some(pool[i].clone())
    }

    fn gp(&mut self, max_stack: usize) -> GenPrincipal {
        let mut g = GenPrincipal::ground_only(self.label());
        let n = self.rng.gen_range(0..=max_stack);
        for _ in 0..n {
            let p = self.principal();
            let l = self.label();
            g = g.push(p, l);
        }
        g
    }

    fn atom(&mut self) -> Formula {
        let rels: Vec<RelDecl> = self.sig.rels().cloned().collect();
        let k = self.rng.gen_range(0..rels.len() + 3);
        if k < rels.len() {
            let decl = &rels[k];
            let mut args = Vec::with_capacity(decl.args.len());
            for s in &decl.args {
                match self.term_of(s) {
                    Some(t) => args.push(t),
                    None => return Formula::flows(self.label(), self.label()),
                }
            }
            return Formula::rel(&decl.name, args);
        }
        match k - rels.len() {
            0 => Formula::flows(self.label(), self.label()),
            1 => Formula::canread(self.principal(), self.label()),
            _ => Formula::canwrite(self.principal(), self.label()),
        }
    }

    /// An atom with `var` placed in one argument slot of matching sort.
    fn atom_with(&mut self, var: &Term, sort: &Sort) -> Option<Formula> {
        let rels: Vec<RelDecl> = self.sig.rels().cloned().collect();
        let mut cands: Vec<Formula> = Vec::new();
        for decl in &rels {
            if let Some(slot) = decl.args.iter().position(|s| s == sort) {
                let mut args = Vec::with_capacity(decl.args.len());
                let mut ok = true;
                for (j, s) in decl.args.iter().enumerate() {
                    if j == slot {
                        args.push(var.clone());
                    } else {
                        match self.term_of(s) {
                            Some(t) => args.push(t),
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                }
                if ok {
                    cands.push(Formula::Rel(decl.name.clone(), args));
                }
            }
        }
        if *sort == Sort::label() {
            cands.push(Formula::flows(var.clone(), self.label()));
            cands.push(Formula::canread(self.principal(), var.clone()));
        }
        if *sort == Sort::principal() {
            cands.push(Formula::canread(var.clone(), self.label()));
        }
        if cands.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..cands.len());
        Some(cands[i].clone())
    }

    fn formula(&mut self, d: usize) -> Formula {
        if d == 0 || self.pct(40) {
            return match self.rng.gen_range(0..20u32) {
                0 => Formula::True,
                1 => Formula::False,
                _ => self.atom(),
            };
        }
        match self.rng.gen_range(0..10u32) {
            0 | 1 => Formula::and(self.formula(d - 1), self.formula(d - 1)),
            2 | 3 => Formula::or(self.formula(d - 1), self.formula(d - 1)),
            4 => Formula::implies(self.formula(d - 1), self.label(), self.formula(d - 1)),
            5 | 6 | 7 => Formula::says(self.principal(), self.label(), self.formula(d - 1)),
            8 => self.quantified(true, d),
            _ => self.quantified(false, d),
        }
    }

    fn quantified(&mut self, universal: bool, d: usize) -> Formula {
        let sort = if self.pct(60) { Sort::principal() } else { Sort::label() };
        let var = Term::var("x", sort.clone());
        let body = match self.atom_with(&var, &sort) {
            Some(f) if self.pct(70) => f,
            _ => self.formula(d - 1),
        };
        if universal {
            Formula::forall("x", sort, body)
        } else {
            Formula::exists("x", sort, body)
        }
    }

    /// A random context, optionally seeded with relabelling and forwarding
    /// sites so the corresponding rules have side premises in scope.
    fn context(&mut self) -> Context {
        let mut ctx: Context = Vec::new();
        let n = self.rng.gen_range(2..=4);
        for _ in 0..n {
            let f = self.formula(FORMULA_DEPTH);
            let g = self.gp(2);
            ctx.push(Belief::new(f, g));
        }
        if self.pct(55) {
            // relabelling site: an atom under voice γ·(p, l) plus the flow
            // fact that rewrites l to l2 under that voice
            let gamma = self.gp(1);
            let p = self.principal();
            let l = self.label();
            let l2 = self.label();
            let f = self.atom();
            ctx.push(Belief::new(f, gamma.push(p.clone(), l.clone())));
            ctx.push(Belief::new(Formula::flows(l, l2.clone()), gamma.push(p, l2)));
        }
        if self.pct(45) {
            // forwarding site: an atom under γ·(p, l) plus the permissions
            // that let p's voice be handed to q
            let gamma = self.gp(1);
            let p = self.principal();
            let q = self.principal();
            let l = self.label();
            let f = self.atom();
            ctx.push(Belief::new(f, gamma.push(p.clone(), l.clone())));
            ctx.push(Belief::new(
                Formula::canread(q.clone(), l.clone()),
                gamma.push(p.clone(), l.clone()),
            ));
            ctx.push(Belief::new(Formula::canwrite(p, l.clone()), gamma.push(q, l)));
        }
        ctx
    }

    fn fresh_for(&mut self, ctx: &Context) -> String {
        let mut vars = BTreeSet::new();
        for b in ctx {
            b.free_vars(&mut vars);
        }
        let avoid: BTreeSet<String> = vars.into_iter().map(|(n, _)| n).collect();
        fresh_name("v", &avoid)
    }

    /// Close exactly the sequent `s` with a single leaf rule, if one fits.
    fn leaf_for(&mut self, s: &Sequent) -> Option<Proof> {
        if let Some(i) = s.context.iter().position(|b| *b == s.goal) {
            return Some(Proof::leaf(s.clone(), RuleSpec::Ax { i }));
        }
        if s.goal.formula == Formula::True {
            return Some(Proof::leaf(s.clone(), RuleSpec::TrueR));
        }
        if let Formula::Rel(r, args) = &s.goal.formula {
            if r == FLOWS && args.len() == 2 && args[0] == args[1] {
                return Some(Proof::leaf(s.clone(), RuleSpec::FlowsToRefl));
            }
        }
        for (i, b) in s.context.iter().enumerate() {
            if b.formula == Formula::False && b.gp.is_prefix_of(&s.goal.gp) {
                return Some(Proof::leaf(s.clone(), RuleSpec::FalseL { i }));
            }
        }
        None
    }

    /// A leaf (or tiny connective-free tree) over `ctx` with a freshly
    /// chosen goal.
    fn leaf(&mut self, ctx: &Context) -> Proof {
        if let Some(b) = self.bias.clone() {
            if self.pct(65) {
                if let Some(i) = ctx.iter().position(|x| *x == b) {
                    return Proof::leaf(Sequent::new(ctx.clone(), b), RuleSpec::Ax { i });
                }
            }
        }
        let roll = self.rng.gen_range(0..100u32);
        if roll < 50 && !ctx.is_empty() {
            let i = self.rng.gen_range(0..ctx.len());
            return Proof::leaf(Sequent::new(ctx.clone(), ctx[i].clone()), RuleSpec::Ax { i });
        }
        if (75..90).contains(&roll) {
            if let Some(p) = self.trust_leaf(ctx) {
                return p;
            }
        }
        if roll >= 90 {
            if let Some(p) = self.false_leaf(ctx) {
                return p;
            }
        }
        if (65..75).contains(&roll) {
            let g = self.gp(2);
            let l = self.label();
            return Proof::leaf(
                Sequent::new(ctx.clone(), Belief::new(Formula::flows(l.clone(), l), g)),
                RuleSpec::FlowsToRefl,
            );
        }
        let g = self.gp(2);
        Proof::leaf(Sequent::new(ctx.clone(), Belief::new(Formula::True, g)), RuleSpec::TrueR)
    }

    /// One trust-closure rule stacked over an axiom on a trust atom.
    fn trust_leaf(&mut self, ctx: &Context) -> Option<Proof> {
        let mut cands: Vec<(usize, RuleSpec)> = Vec::new();
        for (i, b) in ctx.iter().enumerate() {
            if let Formula::Rel(r, args) = &b.formula {
                if args.len() != 2 {
                    continue;
                }
                let spec = if r == FLOWS {
                    RuleSpec::FlowsToTrans { mid: args[1].clone() }
                } else if r == CANREAD {
                    RuleSpec::CRVar { via: args[1].clone() }
                } else if r == CANWRITE {
                    RuleSpec::CWVar { via: args[1].clone() }
                } else {
                    continue;
                };
                cands.push((i, spec));
            }
        }
        if cands.is_empty() {
            return None;
        }
        let (i, spec) = cands[self.rng.gen_range(0..cands.len())].clone();
        let concl = Sequent::new(ctx.clone(), ctx[i].clone());
        let prems = premises(self.sig, &concl, &spec).ok()?;
        let mut children = Vec::with_capacity(prems.len());
        for s in &prems {
            children.push(self.leaf_for(s)?);
        }
        Some(Proof::new(concl, spec, children))
    }

    fn false_leaf(&mut self, ctx: &Context) -> Option<Proof> {
        let opts: Vec<usize> = ctx
            .iter()
            .enumerate()
            .filter(|(_, b)| b.formula == Formula::False)
            .map(|(i, _)| i)
            .collect();
        if opts.is_empty() {
            return None;
        }
        let i = opts[self.rng.gen_range(0..opts.len())];
        let mut g = ctx[i].gp.clone();
        if self.pct(40) {
            let p = self.principal();
            let l = self.label();
            g = g.push(p, l);
        }
        let f = self.formula(1);
        Some(Proof::leaf(Sequent::new(ctx.clone(), Belief::new(f, g)), RuleSpec::FalseL { i }))
    }

    /// The main generator: a valid proof over exactly `ctx`.
    fn gen_any(&mut self, ctx: &Context, depth: usize, guards: &Guards) -> Proof {
        if depth == 0 || self.pct(18) {
            return self.leaf(ctx);
        }
        let roll = self.rng.gen_range(0..100u32);
        if roll < 45 {
            let moves = self.left_moves(ctx, guards);
            if !moves.is_empty() {
                let (spec, branch) = moves[self.rng.gen_range(0..moves.len())].clone();
                if let Some(p) = self.exec_left(ctx, spec, branch, depth, guards) {
                    return p;
                }
            }
        } else if roll < 58 {
            if let Some(p) = self.exec_impr(ctx, depth, guards) {
                return p;
            }
        }
        self.exec_wrap(ctx, depth, guards)
    }

    /// Context-side moves applicable to `ctx`, as (spec, main branch).
    fn left_moves(&mut self, ctx: &Context, guards: &Guards) -> Vec<(RuleSpec, usize)> {
        let mut v: Vec<(RuleSpec, usize)> = Vec::new();
        for (i, b) in ctx.iter().enumerate() {
            if guards.connective_ok(i) {
                match &b.formula {
                    Formula::And(..) => v.push((RuleSpec::AndL { i }, 0)),
                    Formula::Or(..) => {
                        let branch = self.rng.gen_range(0..2usize);
                        v.push((RuleSpec::OrL { i }, branch));
                    }
                    Formula::Implies(..) => v.push((RuleSpec::ImpL { i }, 1)),
                    Formula::Says(..) => v.push((RuleSpec::SaysL { i }, 0)),
                    Formula::Forall(bi, _) => {
                        if let Some(t) = self.term_of(&bi.sort) {
                            v.push((RuleSpec::ForallL { i, t }, 0));
                        }
                    }
                    Formula::Exists(..) => {
                        let eigen = self.fresh_for(ctx);
                        v.push((RuleSpec::ExistsL { i, eigen }, 0));
                    }
                    _ => {}
                }
            }
            let st = b.gp.stack.clone();
            if st.is_empty() || !guards.change_ok(i) {
                continue;
            }
            let pos = self.rng.gen_range(0..st.len());
            let (p, l) = st[pos].clone();
            v.push((RuleSpec::SelfLElim { i, pos }, 0));
            v.push((RuleSpec::VarL { i, pos, l2: l.clone() }, 0));
            if let Some(dp) = (0..st.len() - 1).find(|k| st[*k] == st[*k + 1]) {
                v.push((RuleSpec::SelfLIntro { i, pos: dp }, 0));
            }
            let prefix = b.gp.prefix(pos);
            for l2 in self.labels.clone() {
                if l2 == l {
                    continue;
                }
                let side = Belief::new(
                    Formula::flows(l.clone(), l2.clone()),
                    prefix.push(p.clone(), l2.clone()),
                );
                if ctx.contains(&side) {
                    v.push((RuleSpec::VarL { i, pos, l2 }, 0));
                }
            }
            for q in self.principals.clone() {
                if q == p {
                    continue;
                }
                let read = Belief::new(
                    Formula::canread(q.clone(), l.clone()),
                    prefix.push(p.clone(), l.clone()),
                );
                let write = Belief::new(
                    Formula::canwrite(p.clone(), l.clone()),
                    prefix.push(q.clone(), l.clone()),
                );
                if ctx.contains(&read) && ctx.contains(&write) {
                    v.push((RuleSpec::FwdL { i, pos, q }, 0));
                }
            }
        }
        if ctx.len() >= 2 {
            let i = self.rng.gen_range(0..ctx.len() - 1);
            if guards.change_ok(i) && guards.change_ok(i + 1) {
                v.push((RuleSpec::Exchange { i }, 0));
            }
        }
        if !ctx.is_empty() && self.pct(20) {
            let i = self.rng.gen_range(0..ctx.len());
            if guards.change_ok(i) {
                v.push((RuleSpec::Weakening { i }, 0));
            }
        }
        v
    }

    /// Premise context and guard adjustments for branch `branch` of `spec`.
    fn child_setup(
        &mut self,
        ctx: &Context,
        spec: &RuleSpec,
        branch: usize,
        guards: &Guards,
    ) -> Option<(Context, Guards)> {
        let mut c = ctx.clone();
        let mut fz = guards.clone();
        match spec {
            RuleSpec::Weakening { i } => {
                c.remove(*i);
                fz = fz.remove_at(*i);
            }
            RuleSpec::Exchange { i } => {
                c.swap(*i, *i + 1);
                fz = fz.swap_at(*i);
                // the normalizer cannot commute a connective rule past an
                // exchange of the position it addresses
                fz.frozen.insert(*i);
                fz.frozen.insert(*i + 1);
            }
            RuleSpec::AndL { i } => {
                let Formula::And(a, b) = c[*i].formula.clone() else {
                    return None;
                };
                let g = c[*i].gp.clone();
                c[*i] = Belief::new(*a, g.clone());
                c.insert(*i + 1, Belief::new(*b, g));
                fz = fz.insert_at(*i + 1);
            }
            RuleSpec::OrL { i } => {
                let Formula::Or(a, b) = c[*i].formula.clone() else {
                    return None;
                };
                let g = c[*i].gp.clone();
                let f = if branch == 0 { *a } else { *b };
                c[*i] = Belief::new(f, g);
            }
            RuleSpec::ImpL { i } => {
                let Formula::Implies(_, _, conseq) = c[*i].formula.clone() else {
                    return None;
                };
                let g = c[*i].gp.clone();
                c[*i] = Belief::new(*conseq, g);
            }
            RuleSpec::SaysL { i } => {
                let Formula::Says(p, l, f) = c[*i].formula.clone() else {
                    return None;
                };
                let g = c[*i].gp.push(p, l);
                c[*i] = Belief::new(*f, g);
            }
            RuleSpec::ForallL { i, t } => {
                let Formula::Forall(_, body) = c[*i].formula.clone() else {
                    return None;
                };
                c[*i] = Belief::new(body.open(t), c[*i].gp.clone());
            }
            RuleSpec::ExistsL { i, eigen } => {
                let Formula::Exists(bi, body) = c[*i].formula.clone() else {
                    return None;
                };
                let v = Term::var(eigen, bi.sort.clone());
                c[*i] = Belief::new(body.open(&v), c[*i].gp.clone());
            }
            RuleSpec::SelfLElim { i, pos } => {
                let mut g = c[*i].gp.clone();
                let pair = g.stack.get(*pos)?.clone();
                g.stack.insert(*pos + 1, pair);
                c[*i] = Belief::new(c[*i].formula.clone(), g);
                fz.frozen.insert(*i);
            }
            RuleSpec::SelfLIntro { i, pos } => {
                let mut g = c[*i].gp.clone();
                if *pos + 1 >= g.stack.len() || g.stack[*pos] != g.stack[*pos + 1] {
                    return None;
                }
                g.stack.remove(*pos + 1);
                c[*i] = Belief::new(c[*i].formula.clone(), g);
                fz.frozen.insert(*i);
            }
            RuleSpec::VarL { i, pos, l2 } => {
                let mut g = c[*i].gp.clone();
                g.stack.get_mut(*pos)?.1 = l2.clone();
                c[*i] = Belief::new(c[*i].formula.clone(), g);
                fz.frozen.insert(*i);
            }
            RuleSpec::FwdL { i, pos, q } => {
                let mut g = c[*i].gp.clone();
                g.stack.get_mut(*pos)?.0 = q.clone();
                c[*i] = Belief::new(c[*i].formula.clone(), g);
                fz.frozen.insert(*i);
            }
            _ => return None,
        }
        Some((c, fz))
    }

    /// Apply a context-side rule below the recursively generated branch.
    fn exec_left(
        &mut self,
        ctx: &Context,
        spec: RuleSpec,
        branch: usize,
        depth: usize,
        guards: &Guards,
    ) -> Option<Proof> {
        let (cprem, fz) = self.child_setup(ctx, &spec, branch, guards)?;
        let child = self.gen_any(&cprem, depth - 1, &fz);
        let concl = Sequent::new(ctx.clone(), child.conclusion.goal.clone());
        let prems = premises(self.sig, &concl, &spec).ok()?;
        if prems.get(branch) != Some(&child.conclusion) {
            return None;
        }
        let mut children = Vec::with_capacity(prems.len());
        for (k, s) in prems.iter().enumerate() {
            if k == branch {
                children.push(child.clone());
            } else {
                children.push(self.close_branch(s, &spec)?);
            }
        }
        Some(Proof::new(concl, spec, children))
    }

    /// Close a secondary branch: by a single leaf if possible, otherwise —
    /// for connective rules, whose subtrees are unconstrained — by bounded
    /// search followed by normalization.
    fn close_branch(&mut self, s: &Sequent, spec: &RuleSpec) -> Option<Proof> {
        if let Some(p) = self.leaf_for(s) {
            return Some(p);
        }
        match spec {
            RuleSpec::ImpL { .. } | RuleSpec::OrL { .. } | RuleSpec::AndR => {
                let cfg = SearchConfig {
                    max_depth: BRANCH_SEARCH_DEPTH,
                    universe: self.cfg.universe.clone(),
                    structural: self.cfg.structural,
                    timeout: None,
                };
                match bounded_prove(self.sig, s, &cfg) {
                    SearchOutcome::Found(p) => normalize(self.sig, &p).ok(),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Hypothetical reasoning: extend the context, prove under it, then
    /// discharge the extension into an implication goal.
    fn exec_impr(
        &mut self,
        ctx: &Context,
        depth: usize,
        guards: &Guards,
    ) -> Option<Proof> {
        let hyp = self.formula(1);
        let l = self.label();
        let mut cprem = ctx.clone();
        cprem.push(Belief::new(hyp.clone(), GenPrincipal::ground_only(l.clone())));
        let child = self.gen_any(&cprem, depth - 1, guards);
        let g = child.conclusion.goal.clone();
        let concl =
            Sequent::new(ctx.clone(), Belief::new(Formula::implies(hyp, l, g.formula), g.gp));
        let prems = premises(self.sig, &concl, &RuleSpec::ImpR).ok()?;
        if prems.len() != 1 || prems[0] != child.conclusion {
            return None;
        }
        Some(Proof::new(concl, RuleSpec::ImpR, vec![child]))
    }

    /// Generate a branch and wrap its goal with a goal-side rule.
    fn exec_wrap(&mut self, ctx: &Context, depth: usize, guards: &Guards) -> Proof {
        let child = self.gen_any(ctx, depth - 1, guards);
        match self.try_wrap(ctx, &child) {
            Some(p) => p,
            None => child,
        }
    }

    fn try_wrap(&mut self, ctx: &Context, child: &Proof) -> Option<Proof> {
        let g = child.conclusion.goal.clone();
        // candidates: (spec, conclusion goal, main branch)
        let mut cands: Vec<(RuleSpec, Belief, usize)> = Vec::new();
        {
            // conjunction with a cheaply provable partner
            let mut partners = vec![Formula::True];
            partners.extend(
                ctx.iter().filter(|b| b.gp == g.gp).map(|b| b.formula.clone()),
            );
            let other = partners[self.rng.gen_range(0..partners.len())].clone();
            let branch = self.rng.gen_range(0..2usize);
            let goal = if branch == 0 {
                Formula::and(g.formula.clone(), other)
            } else {
                Formula::and(other, g.formula.clone())
            };
            cands.push((RuleSpec::AndR, Belief::new(goal, g.gp.clone()), branch));
        }
        let extra = self.formula(1);
        cands.push((
            RuleSpec::OrR1,
            Belief::new(Formula::or(g.formula.clone(), extra.clone()), g.gp.clone()),
            0,
        ));
        cands.push((
            RuleSpec::OrR2,
            Belief::new(Formula::or(extra, g.formula.clone()), g.gp.clone()),
            0,
        ));
        {
            // vacuous quantifications over the current goal
            let sort = if self.pct(50) { Sort::principal() } else { Sort::label() };
            let mut vars = BTreeSet::new();
            child.conclusion.free_vars(&mut vars);
            let avoid: BTreeSet<String> = vars.into_iter().map(|(n, _)| n).collect();
            let hint = fresh_name("q", &avoid);
            let eigen = fresh_name("w", &avoid);
            cands.push((
                RuleSpec::ForallR { eigen },
                Belief::new(
                    Formula::forall(&hint, sort.clone(), g.formula.clone()),
                    g.gp.clone(),
                ),
                0,
            ));
            if let Some(t) = self.term_of(&sort) {
                cands.push((
                    RuleSpec::ExistsR { t },
                    Belief::new(Formula::exists(&hint, sort, g.formula.clone()), g.gp.clone()),
                    0,
                ));
            }
        }
        let st = g.gp.stack.clone();
        if !st.is_empty() {
            let last = st.len() - 1;
            let (p, l) = st[last].clone();
            cands.push((
                RuleSpec::SaysR,
                Belief::new(Formula::says(p, l, g.formula.clone()), g.gp.prefix(last)),
                0,
            ));
            let pos = self.rng.gen_range(0..st.len());
            {
                let mut gp = g.gp.clone();
                let pair = gp.stack[pos].clone();
                gp.stack.insert(pos + 1, pair);
                cands.push((
                    RuleSpec::SelfRIntro { pos },
                    Belief::new(g.formula.clone(), gp),
                    0,
                ));
            }
            if let Some(dp) = (0..st.len() - 1).find(|k| st[*k] == st[*k + 1]) {
                let mut gp = g.gp.clone();
                gp.stack.remove(dp + 1);
                cands.push((
                    RuleSpec::SelfRElim { pos: dp },
                    Belief::new(g.formula.clone(), gp),
                    0,
                ));
            }
            let (pp, pl) = st[pos].clone();
            // identity relabelling is always available; seeded rewrites and
            // forwardings need their side facts in the context
            cands.push((
                RuleSpec::VarR { pos, l2: pl.clone() },
                Belief::new(g.formula.clone(), g.gp.clone()),
                0,
            ));
            let prefix = g.gp.prefix(pos);
            for lnew in self.labels.clone() {
                if lnew == pl {
                    continue;
                }
                let side = Belief::new(
                    Formula::flows(pl.clone(), lnew.clone()),
                    prefix.push(pp.clone(), lnew.clone()),
                );
                if ctx.contains(&side) {
                    let mut gp = g.gp.clone();
                    gp.stack[pos].1 = lnew;
                    cands.push((
                        RuleSpec::VarR { pos, l2: pl.clone() },
                        Belief::new(g.formula.clone(), gp),
                        0,
                    ));
                }
            }
            for qnew in self.principals.clone() {
                if qnew == pp {
                    continue;
                }
                let read = Belief::new(
                    Formula::canread(qnew.clone(), pl.clone()),
                    prefix.push(pp.clone(), pl.clone()),
                );
                let write = Belief::new(
                    Formula::canwrite(pp.clone(), pl.clone()),
                    prefix.push(qnew.clone(), pl.clone()),
                );
                if ctx.contains(&read) && ctx.contains(&write) {
                    let mut gp = g.gp.clone();
                    gp.stack[pos].0 = qnew;
                    cands.push((
                        RuleSpec::FwdR { pos, p: pp.clone() },
                        Belief::new(g.formula.clone(), gp),
                        0,
                    ));
                }
            }
        }
        // trust-closure rules demand connective-free subtrees
        if !has_manip(child) {
            if let Formula::Rel(r, args) = &g.formula {
                if args.len() == 2 {
                    if r == FLOWS {
                        cands.push((
                            RuleSpec::FlowsToTrans { mid: args[1].clone() },
                            Belief::new(
                                Formula::flows(args[0].clone(), args[1].clone()),
                                g.gp.clone(),
                            ),
                            0,
                        ));
                    } else if r == CANREAD {
                        cands.push((
                            RuleSpec::CRVar { via: args[1].clone() },
                            g.clone(),
                            0,
                        ));
                    } else if r == CANWRITE {
                        cands.push((
                            RuleSpec::CWVar { via: args[1].clone() },
                            g.clone(),
                            0,
                        ));
                    }
                }
            }
        }
        let (spec, goal, branch) = cands[self.rng.gen_range(0..cands.len())].clone();
        let concl = Sequent::new(ctx.clone(), goal);
        let prems = premises(self.sig, &concl, &spec).ok()?;
        if prems.get(branch) != Some(&child.conclusion) {
            return None;
        }
        let mut children = Vec::with_capacity(prems.len());
        for (k, s) in prems.iter().enumerate() {
            if k == branch {
                children.push(child.clone());
            } else {
                children.push(self.close_branch(s, &spec)?);
            }
        }
        Some(Proof::new(concl, spec, children))
    }

    /// Wrap a proof whose goal voice is pushed into a says goal.
    fn wrap_says(&mut self, child: &Proof) -> Option<Proof> {
        let g = &child.conclusion.goal;
        let st = &g.gp.stack;
        if st.is_empty() {
            return None;
        }
        let last = st.len() - 1;
        let (p, l) = st[last].clone();
        let goal = Belief::new(Formula::says(p, l, g.formula.clone()), g.gp.prefix(last));
        let concl = Sequent::new(child.conclusion.context.clone(), goal);
        let prems = premises(self.sig, &concl, &RuleSpec::SaysR).ok()?;
        if prems.len() != 1 || prems[0] != child.conclusion {
            return None;
        }
        Some(Proof::new(concl, RuleSpec::SaysR, vec![child.clone()]))
    }

    /// A guaranteed says-goal proof: truth spoken under a pushed voice.
    fn says_fallback(&mut self, ctx: &Context) -> Proof {
        let g0 = GenPrincipal::ground_only(self.label());
        let p = self.principal();
        let l = self.label();
        let inner = Sequent::new(ctx.clone(), Belief::new(Formula::True, g0.push(p, l)));
        let leaf = Proof::leaf(inner, RuleSpec::TrueR);
        self.wrap_says(&leaf).expect("says wrap over a pushed voice")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{classify_normal_form, eliminate_cut, unsays_r, NormalFormTag};

    fn setup(depth: usize) -> (Signature, SearchConfig) {
        let sig = sample_signature();
        let cfg = SearchConfig::with_signature_constants(&sig, depth);
        (sig, cfg)
    }

    #[test]
    fn an_empty_request_yields_no_proofs() {
        let (sig, cfg) = setup(4);
        assert!(generate_random_proofs(&sig, &cfg, 11, 0).is_empty());
    }

    #[test]
    fn generated_proofs_check_valid() {
        let (sig, cfg) = setup(5);
        let ps = generate_random_proofs(&sig, &cfg, 7, 100);
        assert_eq!(ps.len(), 100);
        for p in &ps {
            assert!(check_proof(&sig, p).is_valid());
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let (sig, cfg) = setup(5);
        let a = generate_random_proofs(&sig, &cfg, 42, 60);
        let b = generate_random_proofs(&sig, &cfg, 42, 60);
        assert_eq!(a, b);
        let c = generate_random_proofs(&sig, &cfg, 43, 60);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_rule_mix_is_broad() {
        let (sig, cfg) = setup(6);
        let ps = generate_random_proofs(&sig, &cfg, 3, 150);
        let mut names = BTreeSet::new();
        for p in &ps {
            let r = check_proof(&sig, p);
            names.extend(r.stats.rules.keys().cloned());
        }
        assert!(names.len() >= 15, "rule coverage too narrow: {names:?}");
    }

    #[test]
    fn generated_proofs_normalize() {
        let (sig, cfg) = setup(5);
        for p in generate_random_proofs(&sig, &cfg, 19, 40) {
            let n = normalize(&sig, &p).expect("generated proofs stay normalizable");
            assert_eq!(n.conclusion, p.conclusion);
            assert!(check_proof(&sig, &n).is_valid());
            assert!(!matches!(classify_normal_form(&n), NormalFormTag::NotNormal(_)));
        }
    }

    #[test]
    fn says_goal_proofs_shift_under_unsays() {
        let (sig, cfg) = setup(4);
        let ps = generate_says_goal_proofs(&sig, &cfg, 23, 40);
        assert_eq!(ps.len(), 40);
        for p in ps {
            let Formula::Says(q, l, body) = p.conclusion.goal.formula.clone() else {
                panic!("not a says goal");
            };
            let out = unsays_r(&sig, &p).expect("says goals shift");
            let want = Belief::new(*body, p.conclusion.goal.gp.push(q, l));
            assert_eq!(out.conclusion, Sequent::new(p.conclusion.context.clone(), want));
            assert!(check_proof(&sig, &out).is_valid());
        }
    }

    #[test]
    fn cut_instances_respect_the_interface() {
        let (sig, cfg) = setup(5);
        let cuts = generate_cut_instances(&sig, &cfg, 31, 25);
        assert_eq!(cuts.len(), 25);
        for c in &cuts {
            assert!(check_proof(&sig, &c.left).is_valid());
            assert!(check_proof(&sig, &c.right).is_valid());
            let mut ctx = c.right.conclusion.context.clone();
            let b = ctx.remove(c.index);
            assert_eq!(b, c.left.conclusion.goal);
            assert_eq!(ctx, c.left.conclusion.context);
        }
    }

    #[test]
    fn cut_instances_eliminate() {
        let (sig, cfg) = setup(4);
        for c in generate_cut_instances(&sig, &cfg, 5, 12) {
            let out = eliminate_cut(&sig, &c.left, &c.right, c.index)
                .expect("generated instances eliminate");
            assert_eq!(
                out.conclusion,
                Sequent::new(
                    c.left.conclusion.context.clone(),
                    c.right.conclusion.goal.clone()
                )
            );
            assert!(check_proof(&sig, &out).is_valid());
        }
    }
}
