//! The signed-subformula relation and positivity.
//!
//! A formula occurrence in a sequent is *positive* when it sits on the right
//! of the turnstile and *negative* on the left. Implication premises flip the
//! sign of their subformulae; every other connective preserves it. The
//! relation `a^s <= b^s'` ("`a` at sign `s` is a signed subformula of `b` at
//! sign `s'`") is the reflexive-transitive closure of one-step peels of the
//! outermost connective, where quantifier steps instantiate the bound
//! variable with a term drawn from a caller-supplied finite universe.
//!
//! A formula is *positive* when `false` does not occur in it at negative
//! sign (reading the formula itself at negative sign, i.e. as a context
//! formula). Contexts of positive formulae can never derive `false`.

use std::collections::BTreeMap;

use crate::formula::Formula;
use crate::signature::{Signature, Sort};
use crate::term::{sort_check, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Pos => write!(f, "+"),
            Sign::Neg => write!(f, "-"),
        }
    }
}

/// A formula together with the sign of its occurrence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedFormula {
    pub formula: Formula,
    pub sign: Sign,
}

impl SignedFormula {
    pub fn pos(formula: Formula) -> SignedFormula {
        SignedFormula {
            formula,
            sign: Sign::Pos,
        }
    }
    pub fn neg(formula: Formula) -> SignedFormula {
        SignedFormula {
            formula,
            sign: Sign::Neg,
        }
    }
}

/// One peel of the outermost connective of the superformula, read from the
/// superformula towards the subformula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubStep {
    AndLeft,
    AndRight,
    OrLeft,
    OrRight,
    /// Premise of an implication; the sign flips.
    ImpPremise,
    ImpConsequent,
    /// Instantiate the outermost universal binder with the witness term.
    ForallInst(Term),
    /// Instantiate the outermost existential binder with the witness term.
    ExistsInst(Term),
    SaysBody,
}

/// Evidence that `sub <= sup`: the chain of peels from `sup` down to `sub`,
/// outermost first, ending in reflexivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubDerivation {
    pub steps: Vec<SubStep>,
}

impl SubDerivation {
    pub fn refl() -> SubDerivation {
        SubDerivation { steps: vec![] }
    }
}

fn sort_of(sig: &Signature, t: &Term) -> Option<Sort> {
    let mut env = BTreeMap::new();
    sort_check(sig, &mut env, t).ok()
}

/// Apply one peel to a signed formula; returns the signed subformula one
/// level in, or `None` if the step does not apply.
pub fn apply_step(sf: &SignedFormula, step: &SubStep) -> Option<SignedFormula> {
    let s = sf.sign;
    match (&sf.formula, step) {
        (Formula::And(a, _), SubStep::AndLeft) => Some(SignedFormula {
            formula: (**a).clone(),
            sign: s,
        }),
        (Formula::And(_, b), SubStep::AndRight) => Some(SignedFormula {
            formula: (**b).clone(),
            sign: s,
        }),
        (Formula::Or(a, _), SubStep::OrLeft) => Some(SignedFormula {
            formula: (**a).clone(),
            sign: s,
        }),
        (Formula::Or(_, b), SubStep::OrRight) => Some(SignedFormula {
            formula: (**b).clone(),
            sign: s,
        }),
        (Formula::Implies(a, _, _), SubStep::ImpPremise) => Some(SignedFormula {
            formula: (**a).clone(),
            sign: s.flip(),
        }),
        (Formula::Implies(_, _, b), SubStep::ImpConsequent) => Some(SignedFormula {
            formula: (**b).clone(),
            sign: s,
        }),
        (Formula::Forall(_, body), SubStep::ForallInst(t)) => Some(SignedFormula {
            formula: body.open(t),
            sign: s,
        }),
        (Formula::Exists(_, body), SubStep::ExistsInst(t)) => Some(SignedFormula {
            formula: body.open(t),
            sign: s,
        }),
        (Formula::Says(_, _, body), SubStep::SaysBody) => Some(SignedFormula {
            formula: (**body).clone(),
            sign: s,
        }),
        _ => None,
    }
}

/// Check a derivation: replay the steps from `sup` and compare with `sub`.
pub fn verify_derivation(sub: &SignedFormula, sup: &SignedFormula, d: &SubDerivation) -> bool {
    let mut cur = sup.clone();
    for step in &d.steps {
        match apply_step(&cur, step) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    cur == *sub
}

/// Search for a derivation `sub <= sup`, peeling at most `bound` connectives.
/// Quantifier witnesses are drawn from `universe`, filtered by binder sort;
/// free variables of `sub` are added to the candidate pool so that
/// eigenvariable-opened bodies remain reachable.
pub fn signed_subformula(
    sub: &SignedFormula,
    sup: &SignedFormula,
    sig: &Signature,
    universe: &[Term],
    bound: usize,
) -> Option<SubDerivation> {
    let mut pool: Vec<Term> = universe.to_vec();
    let mut fv = std::collections::BTreeSet::new();
    sub.formula.free_vars(&mut fv);
    for (name, sort) in fv {
        let v = Term::Var(name, sort);
        if !pool.contains(&v) {
            pool.push(v);
        }
    }
    search(sub, sup, sig, &pool, bound)
}

fn search(
    sub: &SignedFormula,
    sup: &SignedFormula,
    sig: &Signature,
    pool: &[Term],
    bound: usize,
) -> Option<SubDerivation> {
    if sub == sup {
        return Some(SubDerivation::refl());
    }
    if bound == 0 {
        return None;
    }
    let mut candidates: Vec<SubStep> = Vec::new();
    match &sup.formula {
        Formula::And(_, _) => {
            candidates.push(SubStep::AndLeft);
            candidates.push(SubStep::AndRight);
        }
        Formula::Or(_, _) => {
            candidates.push(SubStep::OrLeft);
            candidates.push(SubStep::OrRight);
        }
        Formula::Implies(_, _, _) => {
            candidates.push(SubStep::ImpPremise);
            candidates.push(SubStep::ImpConsequent);
        }
        Formula::Forall(bi, _) => {
            for t in pool {
                if sort_of(sig, t).as_ref() == Some(&bi.sort) {
                    candidates.push(SubStep::ForallInst(t.clone()));
                }
            }
        }
        Formula::Exists(bi, _) => {
            for t in pool {
                if sort_of(sig, t).as_ref() == Some(&bi.sort) {
                    candidates.push(SubStep::ExistsInst(t.clone()));
                }
            }
        }
        Formula::Says(_, _, _) => candidates.push(SubStep::SaysBody),
        Formula::Rel(_, _) | Formula::True | Formula::False => {}
    }
    for step in candidates {
        if let Some(next) = apply_step(sup, &step) {
            if let Some(mut d) = search(sub, &next, sig, pool, bound - 1) {
                d.steps.insert(0, step);
                return Some(d);
            }
        }
    }
    None
}

/// True when `false` occurs in `phi` at the given sign (no instantiation is
/// needed: substitution cannot create or destroy an occurrence of `false`).
pub fn contains_false_at(phi: &Formula, sign: Sign) -> bool {
    match phi {
        Formula::False => sign == Sign::Neg,
        Formula::True | Formula::Rel(_, _) => false,
        Formula::And(a, b) | Formula::Or(a, b) => {
            contains_false_at(a, sign) || contains_false_at(b, sign)
        }
        Formula::Implies(a, _, b) => {
            contains_false_at(a, sign.flip()) || contains_false_at(b, sign)
        }
        Formula::Forall(_, body) | Formula::Exists(_, body) => contains_false_at(body, sign),
        Formula::Says(_, _, body) => contains_false_at(body, sign),
    }
}

/// A formula is positive when it has no negative occurrence of `false`,
/// reading the formula itself at negative sign (as a context formula).
pub fn is_positive(phi: &Formula) -> bool {
    !contains_false_at(phi, Sign::Neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{FuncDecl, Signature};

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.add_func(FuncDecl {
            name: "Pub".into(),
            args: vec![],
            result: Sort::label(),
        })
        .unwrap();
        s.add_func(FuncDecl {
            name: "Alice".into(),
            args: vec![],
            result: Sort::principal(),
        })
        .unwrap();
        s.add_rel(crate::signature::RelDecl {
            name: "R".into(),
            args: vec![Sort::principal()],
        })
        .unwrap();
        s
    }

    fn pub_l() -> Term {
        Term::constant("Pub")
    }

    #[test]
    fn imp_premise_flips_sign() {
        let sig = sig();
        let a = Formula::rel("R", vec![Term::constant("Alice")]);
        let imp = Formula::implies(a.clone(), pub_l(), Formula::True);
        let d = signed_subformula(
            &SignedFormula::neg(a.clone()),
            &SignedFormula::pos(imp.clone()),
            &sig,
            &[],
            4,
        )
        .expect("premise at flipped sign");
        assert!(verify_derivation(
            &SignedFormula::neg(a.clone()),
            &SignedFormula::pos(imp.clone()),
            &d
        ));
        // Same sign is not derivable.
        assert!(signed_subformula(
            &SignedFormula::pos(a),
            &SignedFormula::pos(imp),
            &sig,
            &[],
            4
        )
        .is_none());
    }

    #[test]
    fn forall_instantiates_from_universe() {
        let sig = sig();
        let p = Sort::principal();
        let body = Formula::rel("R", vec![Term::var("x", p.clone())]);
        let all = Formula::forall("x", p.clone(), body);
        let inst = Formula::rel("R", vec![Term::constant("Alice")]);
        let d = signed_subformula(
            &SignedFormula::neg(inst.clone()),
            &SignedFormula::neg(all.clone()),
            &sig,
            &[Term::constant("Alice")],
            4,
        )
        .expect("instantiated body");
        assert_eq!(d.steps, vec![SubStep::ForallInst(Term::constant("Alice"))]);
        // Without the witness in the universe the search fails.
        assert!(signed_subformula(
            &SignedFormula::neg(inst),
            &SignedFormula::neg(all),
            &sig,
            &[],
            4
        )
        .is_none());
    }

    #[test]
    fn eigenvariable_bodies_reachable() {
        let sig = sig();
        let p = Sort::principal();
        let body = Formula::rel("R", vec![Term::var("x", p.clone())]);
        let all = Formula::forall("x", p.clone(), body);
        // The opened body mentions the fresh variable y; its free variables
        // join the witness pool automatically.
        let opened = Formula::rel("R", vec![Term::var("y", p.clone())]);
        assert!(signed_subformula(
            &SignedFormula::pos(opened),
            &SignedFormula::pos(all),
            &sig,
            &[],
            4
        )
        .is_some());
    }

    #[test]
    fn says_and_chained_peels() {
        let sig = sig();
        let atom = Formula::rel("R", vec![Term::constant("Alice")]);
        let inner = Formula::and(atom.clone(), Formula::True);
        let says = Formula::says(Term::constant("Alice"), pub_l(), inner);
        let d = signed_subformula(
            &SignedFormula::neg(atom.clone()),
            &SignedFormula::neg(says.clone()),
            &sig,
            &[],
            4,
        )
        .expect("says body then and-left");
        assert_eq!(d.steps, vec![SubStep::SaysBody, SubStep::AndLeft]);
        assert!(verify_derivation(
            &SignedFormula::neg(atom),
            &SignedFormula::neg(says),
            &d
        ));
    }

    #[test]
    fn positivity_examples() {
        // Atoms and disjunctions of atoms are positive.
        let atom = Formula::rel("R", vec![Term::constant("Alice")]);
        assert!(is_positive(&atom));
        assert!(is_positive(&Formula::or(atom.clone(), Formula::True)));
        // A context formula `true ->[Pub] false` is not positive: the
        // consequent keeps the (negative) sign of the whole formula.
        let bad = Formula::implies(Formula::True, pub_l(), Formula::False);
        assert!(!is_positive(&bad));
        // `false` in a premise position flips to positive sign, so the whole
        // formula stays positive.
        let ok = Formula::implies(Formula::False, pub_l(), atom.clone());
        assert!(is_positive(&ok));
        // Double flip: premise-of-premise is negative again.
        let double = Formula::implies(
            Formula::implies(Formula::False, pub_l(), atom.clone()),
            pub_l(),
            atom,
        );
        assert!(!is_positive(&double));
    }

    /// Brute-force oracle for positivity: enumerate every signed subformula
    /// reachable by peeling (opening quantifiers with a dummy constant) and
    /// look for `false` at negative sign.
    fn oracle_is_positive(phi: &Formula) -> bool {
        fn scan(sf: SignedFormula, acc: &mut Vec<SignedFormula>) {
            if acc.contains(&sf) {
                return;
            }
            acc.push(sf.clone());
            let steps: Vec<SubStep> = match &sf.formula {
                Formula::And(_, _) => vec![SubStep::AndLeft, SubStep::AndRight],
                Formula::Or(_, _) => vec![SubStep::OrLeft, SubStep::OrRight],
                Formula::Implies(_, _, _) => {
                    vec![SubStep::ImpPremise, SubStep::ImpConsequent]
                }
                Formula::Forall(_, _) => vec![SubStep::ForallInst(Term::constant("c"))],
                Formula::Exists(_, _) => vec![SubStep::ExistsInst(Term::constant("c"))],
                Formula::Says(_, _, _) => vec![SubStep::SaysBody],
                _ => vec![],
            };
            for st in steps {
                if let Some(next) = apply_step(&sf, &st) {
                    scan(next, acc);
                }
            }
        }
        let mut acc = Vec::new();
        scan(SignedFormula::neg(phi.clone()), &mut acc);
        !acc.contains(&SignedFormula::neg(Formula::False))
    }

    proptest::proptest! {
        #[test]
        fn is_positive_agrees_with_oracle(seed in 0u64..500) {
            let phi = random_formula(seed);
            proptest::prop_assert_eq!(is_positive(&phi), oracle_is_positive(&phi));
        }
    }

    /// Small deterministic formula generator over a fixed signature.
    fn random_formula(seed: u64) -> Formula {
        fn go(state: &mut u64, depth: u32) -> Formula {
            *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let choice = (*state >> 33) % if depth == 0 { 3 } else { 8 };
            let p = Sort::principal();
            match choice {
                0 => Formula::True,
                1 => Formula::False,
                2 => Formula::rel("R", vec![Term::constant("Alice")]),
                3 => Formula::and(go(state, depth - 1), go(state, depth - 1)),
                4 => Formula::or(go(state, depth - 1), go(state, depth - 1)),
                5 => Formula::implies(
                    go(state, depth - 1),
                    Term::constant("Pub"),
                    go(state, depth - 1),
                ),
                6 => Formula::forall("x", p, go(state, depth - 1)),
                _ => Formula::says(
                    Term::constant("Alice"),
                    Term::constant("Pub"),
                    go(state, depth - 1),
                ),
            }
        }
        let mut st = seed.wrapping_add(17);
        go(&mut st, 4)
    }
}
