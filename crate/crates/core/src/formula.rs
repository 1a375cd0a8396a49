//! Formulae: atomic relations, the constants true and false, conjunction,
//! disjunction, labelled implication, sorted quantifiers, and the `says`
//! modality.
//!
//! Binders are locally nameless: a quantifier stores a display hint and the
//! binder sort, and its body refers to the bound variable through de Bruijn
//! indices. The hint is ignored by equality, so derived `==` on [`Formula`]
//! is exactly alpha-equivalence.
//!
//! An implication `phi ->[l] psi` carries the label `l` at which its premise
//! is interpreted as ground truth; `!phi` is surface sugar for
//! `phi ->[l_d] false` with the theory's default ground label and never
//! appears as a distinct constructor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::signature::{Signature, Sort};
use crate::term::{sort_check_expect, SortError, Term};

/// A quantifier binder: a printing hint plus the sort of the bound variable.
/// Only the sort participates in equality, ordering, and hashing, so formula
/// equality is alpha-equivalence.
#[derive(Debug, Clone)]
pub struct Binder {
    pub hint: String,
    pub sort: Sort,
}

impl Binder {
    pub fn new(hint: &str, sort: Sort) -> Binder {
        Binder {
            hint: hint.to_string(),
            sort,
        }
    }
}

impl PartialEq for Binder {
    fn eq(&self, other: &Self) -> bool {
        self.sort == other.sort
    }
}
impl Eq for Binder {}
impl PartialOrd for Binder {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Binder {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort.cmp(&other.sort)
    }
}
impl Hash for Binder {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.sort.hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// Atomic relation applied to terms.
    Rel(String, Vec<Term>),
    True,
    False,
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// `phi ->[label] psi`; the label is a `Label`-sorted term.
    Implies(Box<Formula>, Term, Box<Formula>),
    Forall(Binder, Box<Formula>),
    Exists(Binder, Box<Formula>),
    /// `p says[l] phi`; `p` is `Principal`-sorted, `l` is `Label`-sorted.
    Says(Term, Term, Box<Formula>),
}

impl Formula {
    pub fn rel(name: &str, args: Vec<Term>) -> Formula {
        Formula::Rel(name.to_string(), args)
    }

    pub fn flows(l1: Term, l2: Term) -> Formula {
        Formula::Rel(crate::signature::FLOWS.to_string(), vec![l1, l2])
    }

    pub fn canread(p: Term, l: Term) -> Formula {
        Formula::Rel(crate::signature::CANREAD.to_string(), vec![p, l])
    }

    pub fn canwrite(p: Term, l: Term) -> Formula {
        Formula::Rel(crate::signature::CANWRITE.to_string(), vec![p, l])
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, label: Term, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), label, Box::new(b))
    }

    /// Negation sugar: `!phi` elaborates to `phi ->[label] false`.
    pub fn not(a: Formula, label: Term) -> Formula {
        Formula::implies(a, label, Formula::False)
    }

    pub fn says(p: Term, l: Term, body: Formula) -> Formula {
        Formula::Says(p, l, Box::new(body))
    }

    /// Build `forall hint:sort. body` by closing the free variable `hint`.
    pub fn forall(hint: &str, sort: Sort, body: Formula) -> Formula {
        let closed = body.close_at(0, hint);
        Formula::Forall(Binder::new(hint, sort), Box::new(closed))
    }

    /// Build `exists hint:sort. body` by closing the free variable `hint`.
    pub fn exists(hint: &str, sort: Sort, body: Formula) -> Formula {
        let closed = body.close_at(0, hint);
        Formula::Exists(Binder::new(hint, sort), Box::new(closed))
    }

    /// Replace bound index `k` with the term `t` (and shift indices above).
    pub fn open_at(&self, k: u32, t: &Term) -> Formula {
        match self {
            Formula::Rel(r, args) => {
                Formula::Rel(r.clone(), args.iter().map(|a| a.open_at(k, t)).collect())
            }
            Formula::True | Formula::False => self.clone(),
            Formula::And(a, b) => Formula::and(a.open_at(k, t), b.open_at(k, t)),
            Formula::Or(a, b) => Formula::or(a.open_at(k, t), b.open_at(k, t)),
            Formula::Implies(a, l, b) => {
                Formula::implies(a.open_at(k, t), l.open_at(k, t), b.open_at(k, t))
            }
            Formula::Forall(bi, body) => {
                Formula::Forall(bi.clone(), Box::new(body.open_at(k + 1, t)))
            }
            Formula::Exists(bi, body) => {
                Formula::Exists(bi.clone(), Box::new(body.open_at(k + 1, t)))
            }
            Formula::Says(p, l, body) => {
                Formula::Says(p.open_at(k, t), l.open_at(k, t), Box::new(body.open_at(k, t)))
            }
        }
    }

    /// Instantiate the outermost binder of a quantifier body with `t`.
    pub fn open(&self, t: &Term) -> Formula {
        self.open_at(0, t)
    }

    /// Abstract the free variable `name` at bound index `k`.
    pub fn close_at(&self, k: u32, name: &str) -> Formula {
        match self {
            Formula::Rel(r, args) => {
                Formula::Rel(r.clone(), args.iter().map(|a| a.close_at(k, name)).collect())
            }
            Formula::True | Formula::False => self.clone(),
            Formula::And(a, b) => Formula::and(a.close_at(k, name), b.close_at(k, name)),
            Formula::Or(a, b) => Formula::or(a.close_at(k, name), b.close_at(k, name)),
            Formula::Implies(a, l, b) => Formula::implies(
                a.close_at(k, name),
                l.close_at(k, name),
                b.close_at(k, name),
            ),
            Formula::Forall(bi, body) => {
                Formula::Forall(bi.clone(), Box::new(body.close_at(k + 1, name)))
            }
            Formula::Exists(bi, body) => {
                Formula::Exists(bi.clone(), Box::new(body.close_at(k + 1, name)))
            }
            Formula::Says(p, l, body) => Formula::Says(
                p.close_at(k, name),
                l.close_at(k, name),
                Box::new(body.close_at(k, name)),
            ),
        }
    }

    /// Capture-free substitution of `t` for the free variable `name`.
    pub fn subst(&self, name: &str, t: &Term) -> Formula {
        match self {
            Formula::Rel(r, args) => {
                Formula::Rel(r.clone(), args.iter().map(|a| a.subst(name, t)).collect())
            }
            Formula::True | Formula::False => self.clone(),
            Formula::And(a, b) => Formula::and(a.subst(name, t), b.subst(name, t)),
            Formula::Or(a, b) => Formula::or(a.subst(name, t), b.subst(name, t)),
            Formula::Implies(a, l, b) => {
                Formula::implies(a.subst(name, t), l.subst(name, t), b.subst(name, t))
            }
            Formula::Forall(bi, body) => {
                Formula::Forall(bi.clone(), Box::new(body.subst(name, t)))
            }
            Formula::Exists(bi, body) => {
                Formula::Exists(bi.clone(), Box::new(body.subst(name, t)))
            }
            Formula::Says(p, l, body) => Formula::Says(
                p.subst(name, t),
                l.subst(name, t),
                Box::new(body.subst(name, t)),
            ),
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            Formula::Rel(_, args) => {
                for a in args {
                    a.free_vars(out);
                }
            }
            Formula::True | Formula::False => {}
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Formula::Implies(a, l, b) => {
                a.free_vars(out);
                l.free_vars(out);
                b.free_vars(out);
            }
            Formula::Forall(_, body) | Formula::Exists(_, body) => body.free_vars(out),
            Formula::Says(p, l, body) => {
                p.free_vars(out);
                l.free_vars(out);
                body.free_vars(out);
            }
        }
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        match self {
            Formula::Rel(_, args) => args.iter().any(|a| a.has_free_var(name)),
            Formula::True | Formula::False => false,
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.has_free_var(name) || b.has_free_var(name)
            }
            Formula::Implies(a, l, b) => {
                a.has_free_var(name) || l.has_free_var(name) || b.has_free_var(name)
            }
            Formula::Forall(_, body) | Formula::Exists(_, body) => body.has_free_var(name),
            Formula::Says(p, l, body) => {
                p.has_free_var(name) || l.has_free_var(name) || body.has_free_var(name)
            }
        }
    }

    /// Collect every term occurring in the formula (labels, says principals,
    /// and relation arguments), descending under binders as-is.
    pub fn terms(&self, out: &mut Vec<Term>) {
        match self {
            Formula::Rel(_, args) => out.extend(args.iter().cloned()),
            Formula::True | Formula::False => {}
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.terms(out);
                b.terms(out);
            }
            Formula::Implies(a, l, b) => {
                a.terms(out);
                out.push(l.clone());
                b.terms(out);
            }
            Formula::Forall(_, body) | Formula::Exists(_, body) => body.terms(out),
            Formula::Says(p, l, body) => {
                out.push(p.clone());
                out.push(l.clone());
                body.terms(out);
            }
        }
    }

    /// Sort-check the formula. Bodies of quantifiers are checked by opening
    /// them with a fresh variable of the binder sort.
    pub fn sort_check(
        &self,
        sig: &Signature,
        env: &mut BTreeMap<String, Sort>,
    ) -> Result<(), SortError> {
        match self {
            Formula::Rel(r, args) => {
                let decl = sig
                    .rel(r)
                    .ok_or_else(|| SortError::UnknownFunc(r.clone()))?
                    .clone();
                if decl.args.len() != args.len() {
                    return Err(SortError::Arity(r.clone(), decl.args.len(), args.len()));
                }
                for (a, s) in args.iter().zip(decl.args.iter()) {
                    sort_check_expect(sig, env, a, s)?;
                }
                Ok(())
            }
            Formula::True | Formula::False => Ok(()),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.sort_check(sig, env)?;
                b.sort_check(sig, env)
            }
            Formula::Implies(a, l, b) => {
                a.sort_check(sig, env)?;
                sort_check_expect(sig, env, l, &Sort::label())?;
                b.sort_check(sig, env)
            }
            Formula::Forall(bi, body) | Formula::Exists(bi, body) => {
                if !sig.has_sort(&bi.sort) {
                    return Err(SortError::UnknownSort(bi.sort.0.clone()));
                }
                let mut avoid: BTreeSet<String> = env.keys().cloned().collect();
                let mut fv = BTreeSet::new();
                body.free_vars(&mut fv);
                avoid.extend(fv.into_iter().map(|(n, _)| n));
                let fresh = fresh_name(&bi.hint, &avoid);
                let opened = body.open(&Term::Var(fresh.clone(), bi.sort.clone()));
                let mut inner = env.clone();
                opened.sort_check(sig, &mut inner)?;
                // Propagate constraints on pre-existing variables only.
                for (k, v) in inner {
                    if k != fresh {
                        env.entry(k).or_insert(v);
                    }
                }
                Ok(())
            }
            Formula::Says(p, l, body) => {
                sort_check_expect(sig, env, p, &Sort::principal())?;
                sort_check_expect(sig, env, l, &Sort::label())?;
                body.sort_check(sig, env)
            }
        }
    }
}

/// Alpha-equivalence of formulae. Binder hints are ignored by `==`, so this
/// is the derived equality, exposed under its conventional name.
pub fn alpha_equal(a: &Formula, b: &Formula) -> bool {
    a == b
}

/// Pick a name based on `hint` that avoids every name in `avoid`.
pub fn fresh_name(hint: &str, avoid: &BTreeSet<String>) -> String {
    let base = if hint.is_empty() { "x" } else { hint };
    if !avoid.contains(base) {
        return base.to_string();
    }
    for i in 1.. {
        let cand = format!("{base}{i}");
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Substitute `t` for `x` in `phi`: the operational form of quantifier
/// instantiation. `phi` is the body of a quantifier whose bound variable has
/// been opened as the free variable `x`.
pub fn substitute(phi: &Formula, x: &str, t: &Term) -> Formula {
    phi.subst(x, t)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::surface::fmt_formula(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str, s: Sort) -> Term {
        Term::var(n, s)
    }

    #[test]
    fn alpha_equality_ignores_hints() {
        let p = Sort::principal();
        let a = Formula::forall("x", p.clone(), Formula::rel("R", vec![v("x", p.clone())]));
        let b = Formula::forall("y", p.clone(), Formula::rel("R", vec![v("y", p.clone())]));
        assert_eq!(a, b);
        assert!(alpha_equal(&a, &b));
    }

    #[test]
    fn alpha_distinguishes_structure() {
        let p = Sort::principal();
        let a = Formula::forall("x", p.clone(), Formula::rel("R", vec![v("x", p.clone())]));
        let c = Formula::forall(
            "x",
            p.clone(),
            Formula::rel("R", vec![Term::constant("Alice")]),
        );
        assert_ne!(a, c);
    }

    #[test]
    fn forall_open_instantiates() {
        let p = Sort::principal();
        let a = Formula::forall("x", p.clone(), Formula::rel("R", vec![v("x", p.clone())]));
        if let Formula::Forall(_, body) = &a {
            let inst = body.open(&Term::constant("Alice"));
            assert_eq!(inst, Formula::rel("R", vec![Term::constant("Alice")]));
        } else {
            panic!("expected forall");
        }
    }

    #[test]
    fn labels_participate_in_binding() {
        // forall l:Label. A ->[l] B : the label inside the implication is the
        // bound variable.
        let l = Sort::label();
        let body = Formula::implies(
            Formula::rel("A", vec![]),
            v("l", l.clone()),
            Formula::rel("B", vec![]),
        );
        let q = Formula::forall("l", l.clone(), body);
        if let Formula::Forall(_, inner) = &q {
            assert_eq!(
                **inner,
                Formula::implies(
                    Formula::rel("A", vec![]),
                    Term::Bound(0),
                    Formula::rel("B", vec![])
                )
            );
            let inst = inner.open(&Term::constant("Pub"));
            assert_eq!(
                inst,
                Formula::implies(
                    Formula::rel("A", vec![]),
                    Term::constant("Pub"),
                    Formula::rel("B", vec![])
                )
            );
        } else {
            panic!("expected forall");
        }
    }

    #[test]
    fn nested_binders_shift_correctly() {
        let p = Sort::principal();
        // forall x. exists y. R(x, y)
        let inner = Formula::exists(
            "y",
            p.clone(),
            Formula::rel("R", vec![v("x", p.clone()), v("y", p.clone())]),
        );
        let q = Formula::forall("x", p.clone(), inner);
        if let Formula::Forall(_, b1) = &q {
            if let Formula::Exists(_, b2) = &**b1 {
                assert_eq!(
                    **b2,
                    Formula::rel("R", vec![Term::Bound(1), Term::Bound(0)])
                );
            } else {
                panic!("expected exists");
            }
            let opened = b1.open(&Term::constant("Alice"));
            if let Formula::Exists(_, b2) = &opened {
                assert_eq!(
                    **b2,
                    Formula::rel("R", vec![Term::constant("Alice"), Term::Bound(0)])
                );
            } else {
                panic!("expected exists");
            }
        } else {
            panic!("expected forall");
        }
    }

    #[test]
    fn substitute_matches_naive_named_substitution() {
        // Oracle: on formulas whose binders never shadow and whose
        // substituted term contains no variable bound anywhere in the
        // formula, naive textual substitution agrees with `substitute`.
        let p = Sort::principal();
        let phi = Formula::and(
            Formula::rel("R", vec![v("x", p.clone())]),
            Formula::forall("z", p.clone(), Formula::rel("S", vec![v("x", p.clone()), v("z", p.clone())])),
        );
        let r = substitute(&phi, "x", &Term::constant("Alice"));
        let expected = Formula::and(
            Formula::rel("R", vec![Term::constant("Alice")]),
            Formula::forall(
                "z",
                p.clone(),
                Formula::rel("S", vec![Term::constant("Alice"), v("z", p.clone())]),
            ),
        );
        assert_eq!(r, expected);
    }
}
