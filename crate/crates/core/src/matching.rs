//! One-way first-order matching of terms against patterns.
//!
//! A pattern is an ordinary term in which a designated set of free variables
//! act as match variables. Matching binds each match variable to at most one
//! subject term (sort-consistently) and treats every other symbol rigidly.
//! Bound-variable indices never appear in bindings: a pattern variable only
//! matches a locally closed subject term.

use std::collections::BTreeMap;

use crate::sequent::GenPrincipal;
use crate::term::Term;

pub type Bindings = BTreeMap<String, Term>;

/// Match `subject` against `pattern`, where free variables of the pattern
/// named in `vars` may be bound. Existing bindings in `binds` are respected.
pub fn match_term(
    pattern: &Term,
    subject: &Term,
    vars: &[String],
    binds: &mut Bindings,
) -> bool {
    match (pattern, subject) {
        (Term::Var(x, _), _) if vars.iter().any(|v| v == x) => {
            if !subject.locally_closed_at(0) {
                return false;
            }
            match binds.get(x) {
                Some(prev) => prev == subject,
                None => {
                    binds.insert(x.clone(), subject.clone());
                    true
                }
            }
        }
        (Term::Var(x, s), Term::Var(y, t)) => x == y && s == t,
        (Term::Bound(i), Term::Bound(j)) => i == j,
        (Term::App(f, fa), Term::App(g, ga)) => {
            f == g
                && fa.len() == ga.len()
                && fa
                    .iter()
                    .zip(ga.iter())
                    .all(|(p, s)| match_term(p, s, vars, binds))
        }
        _ => false,
    }
}

/// Match a generalized principal against a pattern generalized principal.
pub fn match_gp(
    pattern: &GenPrincipal,
    subject: &GenPrincipal,
    vars: &[String],
    binds: &mut Bindings,
) -> bool {
    if pattern.stack.len() != subject.stack.len() {
        return false;
    }
    if !match_term(&pattern.ground, &subject.ground, vars, binds) {
        return false;
    }
    pattern
        .stack
        .iter()
        .zip(subject.stack.iter())
        .all(|((pp, pl), (sp, sl))| {
            match_term(pp, sp, vars, binds) && match_term(pl, sl, vars, binds)
        })
}

/// Apply bindings to a term, replacing bound match variables.
pub fn apply_bindings(t: &Term, binds: &Bindings) -> Term {
    match t {
        Term::Var(x, _) => binds.get(x).cloned().unwrap_or_else(|| t.clone()),
        Term::Bound(_) => t.clone(),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| apply_bindings(a, binds)).collect(),
        ),
    }
}

/// Apply bindings to a generalized principal.
pub fn apply_bindings_gp(g: &GenPrincipal, binds: &Bindings) -> GenPrincipal {
    GenPrincipal {
        ground: apply_bindings(&g.ground, binds),
        stack: g
            .stack
            .iter()
            .map(|(p, l)| (apply_bindings(p, binds), apply_bindings(l, binds)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Sort;

    #[test]
    fn matches_and_binds() {
        let pat = Term::App(
            "f".into(),
            vec![Term::var("x", Sort::principal()), Term::constant("Pub")],
        );
        let subj = Term::App(
            "f".into(),
            vec![Term::constant("Alice"), Term::constant("Pub")],
        );
        let mut b = Bindings::new();
        assert!(match_term(&pat, &subj, &["x".into()], &mut b));
        assert_eq!(b.get("x"), Some(&Term::constant("Alice")));
        assert_eq!(apply_bindings(&pat, &b), subj);
    }

    #[test]
    fn consistent_bindings_required() {
        let pat = Term::App(
            "g".into(),
            vec![
                Term::var("x", Sort::principal()),
                Term::var("x", Sort::principal()),
            ],
        );
        let subj_ok = Term::App(
            "g".into(),
            vec![Term::constant("A"), Term::constant("A")],
        );
        let subj_bad = Term::App(
            "g".into(),
            vec![Term::constant("A"), Term::constant("B")],
        );
        let mut b = Bindings::new();
        assert!(match_term(&pat, &subj_ok, &["x".into()], &mut b));
        let mut b2 = Bindings::new();
        assert!(!match_term(&pat, &subj_bad, &["x".into()], &mut b2));
    }

    #[test]
    fn non_pattern_vars_are_rigid() {
        let pat = Term::var("x", Sort::principal());
        let subj = Term::constant("Alice");
        let mut b = Bindings::new();
        assert!(!match_term(&pat, &subj, &[], &mut b));
        assert!(match_term(&pat, &Term::var("x", Sort::principal()), &[], &mut b));
    }

    #[test]
    fn pattern_var_rejects_open_subject() {
        let pat = Term::var("x", Sort::principal());
        let subj = Term::Bound(0);
        let mut b = Bindings::new();
        assert!(!match_term(&pat, &subj, &["x".into()], &mut b));
    }

    #[test]
    fn gp_matching() {
        let pat = GenPrincipal {
            ground: Term::constant("Pub"),
            stack: vec![(
                Term::var("p", Sort::principal()),
                Term::constant("L"),
            )],
        };
        let subj = GenPrincipal {
            ground: Term::constant("Pub"),
            stack: vec![(Term::constant("Bob"), Term::constant("L"))],
        };
        let mut b = Bindings::new();
        assert!(match_gp(&pat, &subj, &["p".into()], &mut b));
        assert_eq!(apply_bindings_gp(&pat, &b), subj);
    }
}
