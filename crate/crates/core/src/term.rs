//! First-order terms in locally nameless style.
//!
//! Free variables carry their name and sort inline; bound variables are de
//! Bruijn indices managed by the binders in [`crate::formula`]. Function
//! application covers constants (nullary application).

use std::collections::BTreeSet;
use std::fmt;

use crate::signature::{Signature, Sort};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// A free variable with its sort.
    Var(String, Sort),
    /// A bound variable (de Bruijn index, counting enclosing binders from the
    /// innermost outward).
    Bound(u32),
    /// Function application; constants are nullary applications.
    App(String, Vec<Term>),
}

/// Errors from sort checking a term.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SortError {
    #[error("unknown function symbol {0}")]
    UnknownFunc(String),
    #[error("function {0} expects {1} arguments, got {2}")]
    Arity(String, usize, usize),
    #[error("expected sort {expected}, found {found} in {context}")]
    Mismatch {
        expected: Sort,
        found: Sort,
        context: String,
    },
    #[error("variable {0} used at sorts {1} and {2}")]
    InconsistentVar(String, Sort, Sort),
    #[error("unknown sort {0}")]
    UnknownSort(String),
    #[error("dangling bound variable with index {0}")]
    DanglingBound(u32),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::App(name.to_string(), vec![])
    }

    pub fn var(name: &str, sort: Sort) -> Term {
        Term::Var(name.to_string(), sort)
    }

    /// Replace bound index `k` by `t`, decrementing bound indices above `k`.
    pub fn open_at(&self, k: u32, t: &Term) -> Term {
        match self {
            Term::Var(_, _) => self.clone(),
            Term::Bound(i) => {
                if *i == k {
                    t.clone()
                } else if *i > k {
                    Term::Bound(i - 1)
                } else {
                    self.clone()
                }
            }
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.open_at(k, t)).collect())
            }
        }
    }

    /// Abstract the free variable `name` as bound index `k`, incrementing
    /// bound indices at or above `k`.
    pub fn close_at(&self, k: u32, name: &str) -> Term {
        match self {
            Term::Var(x, _) => {
                if x == name {
                    Term::Bound(k)
                } else {
                    self.clone()
                }
            }
            Term::Bound(i) => {
                if *i >= k {
                    Term::Bound(i + 1)
                } else {
                    self.clone()
                }
            }
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.close_at(k, name)).collect())
            }
        }
    }

    /// Capture-free substitution of `t` for the free variable `name`.
    /// Locally nameless terms never capture: bound variables are indices, and
    /// `t` is inserted unchanged.
    pub fn subst(&self, name: &str, t: &Term) -> Term {
        match self {
            Term::Var(x, _) => {
                if x == name {
                    t.clone()
                } else {
                    self.clone()
                }
            }
            Term::Bound(_) => self.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.subst(name, t)).collect())
            }
        }
    }

    /// Free variable names (with sorts) of the term.
    pub fn free_vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            Term::Var(x, s) => {
                out.insert((x.clone(), s.clone()));
            }
            Term::Bound(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.free_vars(out);
                }
            }
        }
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        match self {
            Term::Var(x, _) => x == name,
            Term::Bound(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.has_free_var(name)),
        }
    }

    /// True when the term contains no bound-variable indices at or above
    /// `depth` (i.e. it is closed under `depth` enclosing binders).
    pub fn locally_closed_at(&self, depth: u32) -> bool {
        match self {
            Term::Var(_, _) => true,
            Term::Bound(i) => *i < depth,
            Term::App(_, args) => args.iter().all(|a| a.locally_closed_at(depth)),
        }
    }

    /// All subterms (including the term itself), for term-universe harvesting.
    pub fn subterms(&self, out: &mut Vec<Term>) {
        out.push(self.clone());
        if let Term::App(_, args) = self {
            for a in args {
                a.subterms(out);
            }
        }
    }
}

/// Infer the sort of `t` and check it against the signature.
///
/// `env` accumulates the sorts at which free variables are used; using the
/// same variable at two different sorts is an error. Bound indices are
/// rejected: sort checking applies to locally closed terms only.
pub fn sort_check(
    sig: &Signature,
    env: &mut std::collections::BTreeMap<String, Sort>,
    t: &Term,
) -> Result<Sort, SortError> {
    match t {
        Term::Var(x, s) => {
            if s.is_unknown() || !sig.has_sort(s) {
                return Err(SortError::UnknownSort(s.0.clone()));
            }
            match env.get(x) {
                Some(prev) if prev != s => Err(SortError::InconsistentVar(
                    x.clone(),
                    prev.clone(),
                    s.clone(),
                )),
                Some(_) => Ok(s.clone()),
                None => {
                    env.insert(x.clone(), s.clone());
                    Ok(s.clone())
                }
            }
        }
        Term::Bound(i) => Err(SortError::DanglingBound(*i)),
        Term::App(f, args) => {
            let decl = sig
                .func(f)
                .ok_or_else(|| SortError::UnknownFunc(f.clone()))?
                .clone();
            if decl.args.len() != args.len() {
                return Err(SortError::Arity(f.clone(), decl.args.len(), args.len()));
            }
            for (a, expected) in args.iter().zip(decl.args.iter()) {
                let found = sort_check(sig, env, a)?;
                if &found != expected {
                    return Err(SortError::Mismatch {
                        expected: expected.clone(),
                        found,
                        context: f.clone(),
                    });
                }
            }
            Ok(decl.result)
        }
    }
}

/// Check `t` against an `expected` sort.
pub fn sort_check_expect(
    sig: &Signature,
    env: &mut std::collections::BTreeMap<String, Sort>,
    t: &Term,
    expected: &Sort,
) -> Result<(), SortError> {
    let found = sort_check(sig, env, t)?;
    if &found != expected {
        return Err(SortError::Mismatch {
            expected: expected.clone(),
            found,
            context: format!("{t}"),
        });
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x, _) => write!(f, "{x}"),
            Term::Bound(i) => write!(f, "#{i}"),
            Term::App(g, args) => {
                write!(f, "{g}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sig_with_f() -> Signature {
        let mut sig = Signature::new();
        sig.add_func(crate::signature::FuncDecl {
            name: "Alice".into(),
            args: vec![],
            result: Sort::principal(),
        })
        .unwrap();
        sig.add_func(crate::signature::FuncDecl {
            name: "f".into(),
            args: vec![Sort::principal()],
            result: Sort::label(),
        })
        .unwrap();
        sig
    }

    #[test]
    fn open_close_roundtrip() {
        // close then open with the same variable is the identity on terms
        // that do not already mention the bound index.
        let t = Term::App(
            "f".into(),
            vec![Term::var("x", Sort::principal())],
        );
        let closed = t.close_at(0, "x");
        assert_eq!(
            closed,
            Term::App("f".into(), vec![Term::Bound(0)])
        );
        let reopened = closed.open_at(0, &Term::var("x", Sort::principal()));
        assert_eq!(reopened, t);
    }

    #[test]
    fn open_decrements_outer_indices() {
        let t = Term::App("g".into(), vec![Term::Bound(0), Term::Bound(1)]);
        let u = t.open_at(0, &Term::constant("Alice"));
        assert_eq!(
            u,
            Term::App("g".into(), vec![Term::constant("Alice"), Term::Bound(0)])
        );
    }

    #[test]
    fn close_increments_outer_indices() {
        let t = Term::App("g".into(), vec![Term::Bound(0)]);
        let u = t.close_at(0, "x");
        assert_eq!(u, Term::App("g".into(), vec![Term::Bound(1)]));
    }

    #[test]
    fn sort_check_app() {
        let sig = sig_with_f();
        let mut env = BTreeMap::new();
        let t = Term::App("f".into(), vec![Term::constant("Alice")]);
        assert_eq!(sort_check(&sig, &mut env, &t), Ok(Sort::label()));
    }

    #[test]
    fn sort_check_rejects_bad_arg() {
        let sig = sig_with_f();
        let mut env = BTreeMap::new();
        let t = Term::App(
            "f".into(),
            vec![Term::App("f".into(), vec![Term::constant("Alice")])],
        );
        assert!(matches!(
            sort_check(&sig, &mut env, &t),
            Err(SortError::Mismatch { .. })
        ));
    }

    #[test]
    fn sort_check_consistent_vars() {
        let sig = sig_with_f();
        let mut env = BTreeMap::new();
        let ok = Term::App("f".into(), vec![Term::var("p", Sort::principal())]);
        sort_check(&sig, &mut env, &ok).unwrap();
        // Reusing p at Label now fails.
        let bad = Term::var("p", Sort::label());
        assert!(matches!(
            sort_check(&sig, &mut env, &bad),
            Err(SortError::InconsistentVar(_, _, _))
        ));
    }

    #[test]
    fn subst_replaces_only_named_var() {
        let t = Term::App(
            "f".into(),
            vec![Term::var("x", Sort::principal())],
        );
        let r = t.subst("x", &Term::constant("Alice"));
        assert_eq!(r, Term::App("f".into(), vec![Term::constant("Alice")]));
        assert_eq!(t.subst("y", &Term::constant("Alice")), t);
    }
}
